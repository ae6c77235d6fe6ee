#include "tabula/engine.hpp"

#include <algorithm>
#include <functional>

#include "tabula/errors.hpp"
#include "tabula/formula.hpp"

namespace tabula {

BoundsRect RecalcResult::bounds(std::string_view sheet) const {
    const script::ResultSheet* s = grid.find(sheet);
    return s ? s->bounds() : BoundsRect{};
}

Value RecalcResult::value(std::string_view sheet, std::string_view a1) const {
    return grid.value_at(sheet, CellAddress::from_a1(a1));
}

const script::ResultCell* RecalcResult::cell(std::string_view sheet, std::string_view a1) const {
    const script::ResultSheet* s = grid.find(sheet);
    if (!s) return nullptr;
    auto it = s->cells.find(CellAddress::from_a1(a1));
    return it == s->cells.end() ? nullptr : &it->second;
}

RecalcResult recalculate(const Workbook& wb, const script::ExecOptions& options) {
    RecalcResult r;
    r.program = generate_program(wb);
    script::ExecutionResult exec = script::execute(r.program, options);
    r.grid = std::move(exec.grid);
    r.output = std::move(exec.output);
    r.errors = std::move(exec.errors);
    r.incomplete = exec.incomplete;
    const std::size_t base = r.program.section(SectionKind::Formulae).first_line;
    for (const SheetCell& c : r.program.cycle_members) {
        script::RuntimeErrorRecord e{"CycleError", c.first + "!" + c.second.a1() + " is part of a dependency cycle", {}, c};
        if (auto line = r.program.line_map.line_of(c)) e.stack.push_back({SectionKind::Formulae, *line - base + 1, "<module>"});
        r.errors.push_back(std::move(e));
    }
    return r;
}

namespace {

std::vector<std::string> sheet_names(const Workbook& wb) {
    std::vector<std::string> names;
    for (const auto& ws : wb.sheets) names.push_back(ws.name);
    return names;
}

/// Operand sheets of each derived sheet's formula, for cycle checks.
std::vector<std::string> operands_of(const Workbook& wb, const FormulaSource& wf, const std::string& target) {
    return formula::translate_worksheet_formula(formula::parse_formula(wf.text), target, sheet_names(wb))
        .operand_sheets;
}

}  // namespace

std::string fill_worksheet(const Workbook& wb, const std::string& target, const FormulaSource& wf) {
    const auto t = formula::translate_worksheet_formula(formula::parse_formula(wf.text), target, sheet_names(wb));
    return "# worksheet formula " + target + ": " + wf.text + "\n" + t.loop_header + "\n" + t.body + "\n";
}

Workbook set_worksheet_formula(const Workbook& wb, const std::string& target, std::optional<std::string> source) {
    if (wb.locked) throw LockedError("workbook is locked; worksheet formulae cannot be changed");
    const Worksheet* ws = wb.find_sheet(target);
    if (!ws) throw UnknownSheetError(target);
    if (source && source->empty()) source.reset();
    Workbook out = wb;
    Worksheet& dest = *out.find_sheet(target);
    if (!source) {
        dest.worksheet_formula.reset();
        return out;
    }
    if (!ws->cells.empty()) {
        throw SheetInUseError("sheet \"" + target + "\" holds cells; a worksheet formula needs an empty sheet");
    }
    if (wb.data_source_for(target)) {
        throw SheetInUseError("sheet \"" + target + "\" is filled from a data source");
    }
    if (source->front() != '=') throw InvalidArgumentError("worksheet formula must start with '='");
    if (source->find_first_of("\r\n") != std::string::npos) {
        throw InvalidArgumentError("worksheet formulae must be a single line");
    }
    dest.worksheet_formula = FormulaSource{*source};
    operands_of(out, *dest.worksheet_formula, target);

    // Depth-first search over derived sheets only.
    std::map<std::string, std::vector<std::string>> graph;
    for (const auto& s : out.sheets) {
        if (!s.derived()) continue;
        try {
            graph[s.name] = operands_of(out, *s.worksheet_formula, s.name);
        } catch (const Error&) {
            graph[s.name] = {};
        }
    }
    std::map<std::string, int> state;
    std::function<void(const std::string&, std::vector<std::string>&)> visit = [&](const std::string& name,
                                                                                   std::vector<std::string>& path) {
        state[name] = 1;
        path.push_back(name);
        for (const auto& next : graph[name]) {
            if (!graph.count(next)) continue;
            if (state[next] == 1) {
                std::string chain;
                auto from = std::find(path.begin(), path.end(), next);
                for (auto it = from; it != path.end(); ++it) chain += *it + " -> ";
                throw DerivedCycleError("worksheet formulae form a cycle: " + chain + next);
            }
            if (state[next] == 0) visit(next, path);
        }
        path.pop_back();
        state[name] = 2;
    };
    std::vector<std::string> path;
    visit(target, path);
    return out;
}

std::string normalize_section_text(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 1);
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            out += '\n';
            continue;
        }
        out += text[i];
    }
    if (!out.empty() && out.back() != '\n') out += '\n';
    std::size_t start = 0;
    std::size_t line = 1;
    while (start < out.size()) {
        const std::size_t end = out.find('\n', start);
        if (out.compare(start, 13, "#=== SECTION:") == 0) {
            throw InvalidArgumentError("line " + std::to_string(line) + " reads as a section marker");
        }
        start = end + 1;
        ++line;
    }
    return out;
}

SectionUpdate set_user_section(const Workbook& wb, UserSection section, std::string_view text) {
    if (wb.locked) throw LockedError("workbook is locked; code sections cannot be changed");
    SectionUpdate u{wb, std::nullopt};
    u.workbook.user_sections[section] = normalize_section_text(text);
    u.diagnostic = script::check_syntax(u.workbook.user_sections[section]);
    return u;
}

Workbook attach_data_source(const Workbook& wb, const DataSource& ds) {
    if (ds.path.empty() || ds.path.find_first_of("\r\n") != std::string::npos) {
        throw InvalidArgumentError("data source path must be a non-empty single line");
    }
    Workbook out = wb.find_sheet(ds.target_sheet) ? wb : add_sheet(wb, ds.target_sheet);
    const Worksheet& ws = out.sheet(ds.target_sheet);
    if (!ws.cells.empty()) throw SheetInUseError("sheet \"" + ds.target_sheet + "\" already holds cells");
    if (ws.derived()) throw SheetInUseError("sheet \"" + ds.target_sheet + "\" has a worksheet formula");
    if (out.data_source_for(ds.target_sheet)) {
        throw SheetInUseError("sheet \"" + ds.target_sheet + "\" already has a data source");
    }
    out.data_sources.push_back(ds);
    return out;
}

Workbook detach_data_source(const Workbook& wb, const std::string& target_sheet) {
    if (!wb.data_source_for(target_sheet)) {
        throw InvalidArgumentError("sheet \"" + target_sheet + "\" has no data source");
    }
    Workbook out = wb;
    std::erase_if(out.data_sources, [&](const DataSource& d) { return d.target_sheet == target_sheet; });
    return out;
}

}  // namespace tabula
