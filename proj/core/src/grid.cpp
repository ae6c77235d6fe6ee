#include "tabula/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabula/errors.hpp"

namespace tabula {

namespace {

Worksheet& mutable_sheet(Workbook& wb, std::string_view sheet) {
    auto* ws = wb.find_sheet(sheet);
    if (!ws) throw UnknownSheetError(std::string(sheet));
    return *ws;
}

std::string describe(const Value& v) { return std::string(v.type_name()) + " \"" + display(v) + "\""; }

[[noreturn]] void nonconforming(const Value& v, EnforcedType t) {
    throw TypeConformanceError(describe(v) + " does not conform to " + std::string(to_string(t)));
}

bool is_import_target(const Workbook& wb, std::string_view sheet) {
    return wb.data_source_for(sheet) != nullptr;
}

}  // namespace

std::string_view to_string(EnforcedType t) {
    switch (t) {
        case EnforcedType::Text: return "TEXT";
        case EnforcedType::Number: return "NUMBER";
        case EnforcedType::Integer: return "INTEGER";
        case EnforcedType::Date: return "DATE";
    }
    return "TEXT";
}

std::optional<EnforcedType> parse_enforced_type(std::string_view text) {
    for (auto t : {EnforcedType::Text, EnforcedType::Number, EnforcedType::Integer, EnforcedType::Date}) {
        if (to_string(t) == text) return t;
    }
    return std::nullopt;
}

std::string FormatSpec::canonical() const {
    std::string out;
    auto add = [&](const std::string& part) {
        if (!out.empty()) out += ';';
        out += part;
    };
    if (bold) add("bold");
    if (align == Align::Right) add("align=right");
    if (align == Align::Center) add("align=center");
    if (number_format) add("number=" + *number_format);
    return out;
}

FormatSpec FormatSpec::parse(std::string_view text) {
    FormatSpec spec;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(';', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view part = text.substr(pos, end - pos);
        pos = end + 1;
        if (part == "bold") {
            spec.bold = true;
        } else if (part == "align=left") {
            spec.align = Align::Left;
        } else if (part == "align=right") {
            spec.align = Align::Right;
        } else if (part == "align=center") {
            spec.align = Align::Center;
        } else if (part.substr(0, 7) == "number=" && part.size() > 7) {
            std::string pattern(part.substr(7));
            if (pattern.find_first_of("\"\\\n\r") != std::string::npos) {
                throw InvalidArgumentError("number format may not contain quotes, backslashes or newlines");
            }
            spec.number_format = pattern;
        } else {
            throw InvalidArgumentError("unknown format part \"" + std::string(part) + "\"");
        }
    }
    return spec;
}

std::string stored_text(const Cell& cell) {
    if (cell.is_formula()) return cell.formula().text;
    return display(cell.constant());
}

void include(BoundsRect& b, const CellAddress& a) {
    if (b.empty) {
        b = BoundsRect{a, a, false};
        return;
    }
    b.min.column = std::min(b.min.column, a.column);
    b.min.row = std::min(b.min.row, a.row);
    b.max.column = std::max(b.max.column, a.column);
    b.max.row = std::max(b.max.row, a.row);
}

const Cell* Worksheet::find(const CellAddress& a) const {
    auto it = cells.find(a);
    return it == cells.end() ? nullptr : &it->second;
}

std::string& UserSections::operator[](UserSection s) {
    switch (s) {
        case UserSection::PreConstants: return pre_constants;
        case UserSection::PreFormulae: return pre_formulae;
        case UserSection::PostFormulae: return post_formulae;
    }
    return post_formulae;
}

const std::string& UserSections::operator[](UserSection s) const {
    return const_cast<UserSections&>(*this)[s];
}

const Worksheet* Workbook::find_sheet(std::string_view sheet) const {
    for (const auto& ws : sheets) {
        if (ws.name == sheet) return &ws;
    }
    return nullptr;
}

Worksheet* Workbook::find_sheet(std::string_view sheet) {
    for (auto& ws : sheets) {
        if (ws.name == sheet) return &ws;
    }
    return nullptr;
}

const Worksheet& Workbook::sheet(std::string_view sheet) const {
    if (const auto* ws = find_sheet(sheet)) return *ws;
    throw UnknownSheetError(std::string(sheet));
}

int Workbook::sheet_index(std::string_view sheet) const {
    for (std::size_t i = 0; i < sheets.size(); ++i) {
        if (sheets[i].name == sheet) return static_cast<int>(i);
    }
    return -1;
}

const DataSource* Workbook::data_source_for(std::string_view sheet) const {
    for (const auto& ds : data_sources) {
        if (ds.target_sheet == sheet) return &ds;
    }
    return nullptr;
}

bool is_valid_sheet_name(std::string_view name) {
    if (name.empty() || name.size() > 64 || name.front() == ' ' || name.back() == ' ') return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
               c == ' ' || c == '.' || c == '-';
    });
}

Workbook new_workbook(std::vector<std::string> sheet_names) {
    Workbook wb;
    for (auto& name : sheet_names) wb = add_sheet(wb, name);
    return wb;
}

Workbook add_sheet(const Workbook& wb, const std::string& name) {
    if (!is_valid_sheet_name(name)) throw InvalidArgumentError("invalid sheet name \"" + name + "\"");
    if (wb.find_sheet(name)) throw InvalidArgumentError("sheet \"" + name + "\" already exists");
    Workbook out = wb;
    out.sheets.push_back(Worksheet{name, {}, std::nullopt, {}, {}});
    return out;
}

bool is_placeholder(const Cell& cell) {
    return cell.is_constant() && cell.constant().is_empty() && (cell.enforced_type || cell.format);
}

namespace {

void require_editable_sheet(const Workbook& wb, const Worksheet& ws) {
    if (ws.derived() || is_import_target(wb, ws.name)) {
        throw DerivedSheetError("sheet \"" + ws.name + "\" is derived; its cells cannot be edited");
    }
}

/// Attribute-only cells keep a type or format ahead of content; a cell with neither is removed.
Workbook store_cell(const Workbook& wb, std::string_view sheet, CellAddress addr, Cell cell) {
    Workbook out = wb;
    auto& cells = mutable_sheet(out, sheet).cells;
    if (cell.is_constant() && cell.constant().is_empty() && !cell.enforced_type && !cell.format) {
        cells.erase(addr);
    } else {
        cells[addr] = std::move(cell);
    }
    return out;
}

}  // namespace

Workbook set_cell(const Workbook& wb, std::string_view sheet, CellAddress addr, std::string_view raw) {
    const Worksheet& ws = wb.sheet(sheet);
    require_editable_sheet(wb, ws);
    const Cell* existing = ws.find(addr);
    const bool is_formula = !raw.empty() && raw.front() == '=';
    if (wb.locked && (is_formula || (existing && existing->is_formula()))) {
        throw LockedError("workbook is locked; formula at " + std::string(sheet) + "!" + addr.a1() +
                          " cannot be changed");
    }
    if (is_formula && raw.find_first_of("\r\n") != std::string_view::npos) {
        throw InvalidArgumentError("formulae must be a single line");
    }

    Workbook out = wb;
    Worksheet& target = mutable_sheet(out, sheet);
    if (raw.empty()) {
        target.cells.erase(addr);
        return out;
    }
    Cell cell = existing ? *existing : Cell{};
    if (is_formula) {
        cell.content = FormulaSource{std::string(raw)};
    } else if (cell.enforced_type == EnforcedType::Text) {
        cell.content = Value::text(std::string(raw));
    } else {
        Value v = infer_literal(raw);
        if (cell.enforced_type) v = coerce_to_type(v, *cell.enforced_type);
        cell.content = std::move(v);
    }
    target.cells[addr] = std::move(cell);
    return out;
}

Workbook set_enforced_type(const Workbook& wb, std::string_view sheet, CellAddress addr,
                           std::optional<EnforcedType> type) {
    const Worksheet& ws = wb.sheet(sheet);
    require_editable_sheet(wb, ws);
    const Cell* existing = ws.find(addr);
    Cell cell = existing ? *existing : Cell{};
    cell.enforced_type = type;
    if (type && cell.is_constant() && !cell.constant().is_empty()) {
        const Value& v = cell.constant();
        cell.content = *type == EnforcedType::Text && v.is_text() ? v : coerce_to_type(v, *type);
    }
    return store_cell(wb, sheet, addr, std::move(cell));
}

Workbook set_format(const Workbook& wb, std::string_view sheet, CellAddress addr,
                    std::optional<FormatSpec> format) {
    require_editable_sheet(wb, wb.sheet(sheet));
    const Cell* existing = wb.sheet(sheet).find(addr);
    if (format && format->is_default()) format.reset();
    Cell cell = existing ? *existing : Cell{};
    cell.format = std::move(format);
    return store_cell(wb, sheet, addr, std::move(cell));
}

Workbook set_row_format(const Workbook& wb, std::string_view sheet, int row, std::optional<FormatSpec> format) {
    if (row < 1 || row > kMaxRow) throw InvalidArgumentError("row out of range");
    Workbook out = wb;
    auto& rows = mutable_sheet(out, sheet).row_formats;
    if (format && !format->is_default()) {
        rows[row] = *format;
    } else {
        rows.erase(row);
    }
    return out;
}

Workbook set_column_format(const Workbook& wb, std::string_view sheet, int column,
                           std::optional<FormatSpec> format) {
    if (column < 1 || column > kMaxColumn) throw InvalidArgumentError("column out of range");
    Workbook out = wb;
    auto& cols = mutable_sheet(out, sheet).column_formats;
    if (format && !format->is_default()) {
        cols[column] = *format;
    } else {
        cols.erase(column);
    }
    return out;
}

std::optional<FormatSpec> effective_format(const Worksheet& ws, const CellAddress& a,
                                           const std::optional<FormatSpec>& cell_format) {
    if (cell_format) return cell_format;
    if (auto it = ws.row_formats.find(a.row); it != ws.row_formats.end()) return it->second;
    if (auto it = ws.column_formats.find(a.column); it != ws.column_formats.end()) return it->second;
    return std::nullopt;
}

Value coerce_to_type(const Value& v, EnforcedType t) {
    if (v.is_empty() || v.is_error()) return v;
    if (v.is_list()) nonconforming(v, t);
    switch (t) {
        case EnforcedType::Text:
            return v.is_text() ? v : Value::text(display(v));
        case EnforcedType::Number:
        case EnforcedType::Integer: {
            double d = 0;
            if (v.is_numeric()) {
                if (t == EnforcedType::Integer && v.is_integer()) return v;
                d = v.as_double();
            } else if (v.is_boolean()) {
                d = v.as_boolean() ? 1 : 0;
            } else if (v.is_text()) {
                auto parsed = parse_number(v.as_text());
                if (!parsed) nonconforming(v, t);
                d = *parsed;
            } else {
                nonconforming(v, t);
            }
            if (t == EnforcedType::Number) return Value::number(d);
            if (d != std::trunc(d) || std::abs(d) >= 9.2e18) nonconforming(v, t);
            return Value::integer(static_cast<std::int64_t>(d));
        }
        case EnforcedType::Date:
            if (v.is_date()) return v;
            if (v.is_text()) {
                if (auto d = Date::parse_iso(v.as_text())) return Value::date(*d);
            }
            nonconforming(v, t);
    }
    nonconforming(v, t);
}

BoundsRect bounds(const Worksheet& ws) {
    BoundsRect b;
    for (const auto& [addr, cell] : ws.cells) {
        if (!is_placeholder(cell)) include(b, addr);
    }
    return b;
}

Workbook lock(const Workbook& wb) {
    Workbook out = wb;
    out.locked = true;
    return out;
}

Workbook unlock(const Workbook& wb) {
    Workbook out = wb;
    out.locked = false;
    return out;
}

Workbook extract_data(const Workbook& wb) {
    Workbook out;
    out.name = wb.name;
    for (const auto& ws : wb.sheets) {
        Worksheet copy{ws.name, {}, std::nullopt, ws.row_formats, ws.column_formats};
        for (const auto& [addr, cell] : ws.cells) {
            if (cell.is_constant()) copy.cells.emplace(addr, cell);
        }
        out.sheets.push_back(std::move(copy));
    }
    return out;
}

}  // namespace tabula
