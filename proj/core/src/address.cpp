#include "tabula/address.hpp"

#include <algorithm>

#include "tabula/errors.hpp"

namespace tabula {

std::string column_letters(int column) {
    std::string out;
    while (column > 0) {
        int rem = (column - 1) % 26;
        out.insert(out.begin(), static_cast<char>('A' + rem));
        column = (column - 1) / 26;
    }
    return out;
}

std::optional<int> parse_column_letters(std::string_view letters) {
    if (letters.empty() || letters.size() > 3) return std::nullopt;
    int col = 0;
    for (char c : letters) {
        if (c < 'A' || c > 'Z') return std::nullopt;
        col = col * 26 + (c - 'A' + 1);
    }
    if (col > kMaxColumn) return std::nullopt;
    return col;
}

std::optional<CellAddress> CellAddress::parse(std::string_view text) {
    std::size_t i = 0;
    if (i < text.size() && text[i] == '$') ++i;
    std::size_t letters_begin = i;
    while (i < text.size() && text[i] >= 'A' && text[i] <= 'Z') ++i;
    std::string_view letters = text.substr(letters_begin, i - letters_begin);
    if (i < text.size() && text[i] == '$') ++i;
    std::string_view digits = text.substr(i);
    if (digits.empty() || digits.size() > 7 || digits[0] == '0') return std::nullopt;
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return std::nullopt;
    }
    auto col = parse_column_letters(letters);
    if (!col) return std::nullopt;
    int row = std::stoi(std::string(digits));
    if (row > kMaxRow) return std::nullopt;
    return CellAddress{*col, row};
}

CellAddress CellAddress::from_a1(std::string_view text) {
    if (auto a = parse(text)) return *a;
    throw InvalidArgumentError("malformed cell address \"" + std::string(text) + "\"");
}

std::string CellAddress::a1() const { return column_letters(column) + std::to_string(row); }

CellRange CellRange::spanning(CellAddress a, CellAddress b) {
    return CellRange{{std::min(a.column, b.column), std::min(a.row, b.row)},
                     {std::max(a.column, b.column), std::max(a.row, b.row)}};
}

}  // namespace tabula
