#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tabula/address.hpp"
#include "tabula/value.hpp"

namespace tabula {

enum class EnforcedType { Text, Number, Integer, Date };

std::string_view to_string(EnforcedType t);
std::optional<EnforcedType> parse_enforced_type(std::string_view text);

enum class Align { Left, Right, Center };

/// Display-only formatting. Canonical text form: "bold;align=right;number=0.00" with
/// default parts omitted; the all-default spec renders as "".
struct FormatSpec {
    bool bold = false;
    Align align = Align::Left;
    std::optional<std::string> number_format;

    bool is_default() const { return !bold && align == Align::Left && !number_format; }
    std::string canonical() const;
    /// Throws InvalidArgumentError on unknown parts.
    static FormatSpec parse(std::string_view text);

    friend bool operator==(const FormatSpec&, const FormatSpec&) = default;
};

struct FormulaSource {
    std::string text;  // verbatim, including the leading "="
    friend bool operator==(const FormulaSource&, const FormulaSource&) = default;
};

struct Cell {
    std::variant<Value, FormulaSource> content;
    std::optional<EnforcedType> enforced_type;
    std::optional<FormatSpec> format;

    bool is_formula() const { return std::holds_alternative<FormulaSource>(content); }
    bool is_constant() const { return std::holds_alternative<Value>(content); }
    const FormulaSource& formula() const { return std::get<FormulaSource>(content); }
    const Value& constant() const { return std::get<Value>(content); }

    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Text a user would type to reproduce the cell's stored content.
std::string stored_text(const Cell& cell);

/// Cell holding only an enforced type and/or format, waiting for content. Not part of bounds.
bool is_placeholder(const Cell& cell);

struct BoundsRect {
    CellAddress min;
    CellAddress max;
    bool empty = true;

    friend bool operator==(const BoundsRect&, const BoundsRect&) = default;
};

/// Grows a bounds rectangle to include `a`.
void include(BoundsRect& b, const CellAddress& a);

struct Worksheet {
    std::string name;
    std::map<CellAddress, Cell> cells;
    std::optional<FormulaSource> worksheet_formula;
    /// Default formats applied at render time; precedence cell > row > column.
    std::map<int, FormatSpec> row_formats;
    std::map<int, FormatSpec> column_formats;

    bool derived() const { return worksheet_formula.has_value(); }
    const Cell* find(const CellAddress& a) const;

    friend bool operator==(const Worksheet&, const Worksheet&) = default;
};

struct DataSource {
    std::string path;
    std::string target_sheet;
    bool has_header = false;

    friend bool operator==(const DataSource&, const DataSource&) = default;
};

enum class UserSection { PreConstants, PreFormulae, PostFormulae };

struct UserSections {
    std::string pre_constants;
    std::string pre_formulae;
    std::string post_formulae;

    std::string& operator[](UserSection s);
    const std::string& operator[](UserSection s) const;

    friend bool operator==(const UserSections&, const UserSections&) = default;
};

/// Immutable-by-convention document snapshot. Every operation below returns a new value.
struct Workbook {
    std::string name = "Book1";
    std::vector<Worksheet> sheets;
    UserSections user_sections;
    std::vector<DataSource> data_sources;
    bool locked = false;

    const Worksheet* find_sheet(std::string_view sheet) const;
    Worksheet* find_sheet(std::string_view sheet);
    const Worksheet& sheet(std::string_view sheet) const;
    /// Index in creation order, or -1.
    int sheet_index(std::string_view sheet) const;
    const DataSource* data_source_for(std::string_view sheet) const;

    friend bool operator==(const Workbook&, const Workbook&) = default;
};

/// Sheet names: non-empty, at most 64 characters from [A-Za-z0-9_ .-], not starting with
/// a space. Quotes, "!" and brackets are excluded so names embed in formulae and code.
bool is_valid_sheet_name(std::string_view name);

Workbook new_workbook(std::vector<std::string> sheet_names = {"Sheet1"});
Workbook add_sheet(const Workbook& wb, const std::string& name);

/// Stores raw grid input. "=..." is a formula (kept verbatim); "" deletes the cell;
/// anything else is a constant after literal inference and type enforcement.
Workbook set_cell(const Workbook& wb, std::string_view sheet, CellAddress addr, std::string_view raw);

Workbook set_enforced_type(const Workbook& wb, std::string_view sheet, CellAddress addr,
                           std::optional<EnforcedType> type);
Workbook set_format(const Workbook& wb, std::string_view sheet, CellAddress addr,
                    std::optional<FormatSpec> format);
Workbook set_row_format(const Workbook& wb, std::string_view sheet, int row, std::optional<FormatSpec> format);
Workbook set_column_format(const Workbook& wb, std::string_view sheet, int column,
                           std::optional<FormatSpec> format);

/// Effective display format for an address: cell, then row, then column default.
std::optional<FormatSpec> effective_format(const Worksheet& ws, const CellAddress& a,
                                           const std::optional<FormatSpec>& cell_format);

/// Converts a value to conform to an enforced type; throws TypeConformanceError.
/// Empty and error values pass through unchanged.
Value coerce_to_type(const Value& v, EnforcedType t);

BoundsRect bounds(const Worksheet& ws);

Workbook lock(const Workbook& wb);
Workbook unlock(const Workbook& wb);

/// Copy holding only constant cells (with their types and formats) and sheet-level formats.
Workbook extract_data(const Workbook& wb);

}  // namespace tabula
