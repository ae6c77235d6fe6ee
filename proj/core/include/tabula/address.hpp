#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace tabula {

inline constexpr int kMaxColumn = 16384;
inline constexpr int kMaxRow = 1048576;

/// 1-based column/row pair. Ordering is row-major: (row, column).
struct CellAddress {
    int column = 1;
    int row = 1;

    friend bool operator==(const CellAddress&, const CellAddress&) = default;
    friend std::strong_ordering operator<=>(const CellAddress& a, const CellAddress& b) {
        if (auto c = a.row <=> b.row; c != 0) return c;
        return a.column <=> b.column;
    }

    /// "A1" form. Accepts and drops "$" markers; rejects out-of-range addresses.
    static std::optional<CellAddress> parse(std::string_view text);
    /// Like parse() but throws InvalidArgumentError.
    static CellAddress from_a1(std::string_view text);

    std::string a1() const;
};

std::string column_letters(int column);
/// "A" → 1 … "XFD" → 16384; nullopt for anything else.
std::optional<int> parse_column_letters(std::string_view letters);

struct CellRange {
    CellAddress from;
    CellAddress to;

    /// Normalized so from is the top-left corner.
    static CellRange spanning(CellAddress a, CellAddress b);
    bool contains(const CellAddress& a) const {
        return a.column >= from.column && a.column <= to.column && a.row >= from.row && a.row <= to.row;
    }
    friend bool operator==(const CellRange&, const CellRange&) = default;
    friend auto operator<=>(const CellRange&, const CellRange&) = default;
};

}  // namespace tabula
