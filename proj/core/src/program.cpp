#include "tabula/program.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <queue>
#include <tuple>

#include "tabula/errors.hpp"

namespace tabula {

// ---- section metadata --------------------------------------------------------------------

std::string_view to_string(SectionKind kind) {
    switch (kind) {
        case SectionKind::Imports: return "IMPORTS";
        case SectionKind::PreConstants: return "PRE_CONSTANTS";
        case SectionKind::Constants: return "CONSTANTS";
        case SectionKind::PreFormulae: return "PRE_FORMULAE";
        case SectionKind::Formulae: return "FORMULAE";
        case SectionKind::PostFormulae: return "POST_FORMULAE";
    }
    return "?";
}

std::optional<SectionKind> parse_section_kind(std::string_view text) {
    for (SectionKind k : kSectionOrder) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

bool is_editable(SectionKind kind) {
    return kind == SectionKind::PreConstants || kind == SectionKind::PreFormulae ||
           kind == SectionKind::PostFormulae;
}

std::optional<UserSection> user_section_of(SectionKind kind) {
    switch (kind) {
        case SectionKind::PreConstants: return UserSection::PreConstants;
        case SectionKind::PreFormulae: return UserSection::PreFormulae;
        case SectionKind::PostFormulae: return UserSection::PostFormulae;
        default: return std::nullopt;
    }
}

std::string section_marker(SectionKind kind) {
    return "#=== SECTION: " + std::string(to_string(kind)) + (is_editable(kind) ? " (editable)" : " (generated)") +
           " ===#";
}

std::size_t Section::line_count() const { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::optional<std::size_t> LineMap::line_of(const SheetCell& c) const {
    auto it = cell_to_line.find(c);
    if (it == cell_to_line.end()) return std::nullopt;
    return it->second;
}

std::optional<SheetCell> LineMap::cell_at(std::size_t line) const {
    auto it = line_to_cell.find(line);
    if (it == line_to_cell.end()) return std::nullopt;
    return it->second;
}

const Section& GeneratedProgram::section(SectionKind kind) const { return sections[static_cast<std::size_t>(kind)]; }

std::string GeneratedProgram::text() const {
    std::string out;
    for (const auto& s : sections) {
        out += s.header_marker;
        out += '\n';
        out += s.text;
    }
    return out;
}

namespace {

std::string sheet_access(const std::string& sheet) { return "workbook[" + formula::quote(sheet) + "]"; }

std::string cell_access(const std::string& sheet, const CellAddress& a) {
    return sheet_access(sheet) + "." + a.a1();
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

// ---- dependency analysis -----------------------------------------------------------------

struct Node {
    bool worksheet = false;
    int sheet = 0;
    CellAddress addr;

    std::tuple<int, int, int> key() const { return {sheet, worksheet ? 0 : addr.row, worksheet ? 0 : addr.column}; }
};

struct Analysis {
    std::vector<Node> nodes;
    std::vector<std::vector<int>> out_edges;  // dependency -> dependent
    std::vector<bool> self_loop;
};

Analysis analyse(const Workbook& wb) {
    Analysis an;
    const int n_sheets = static_cast<int>(wb.sheets.size());
    std::vector<std::map<CellAddress, int>> formula_nodes(wb.sheets.size());
    std::vector<int> worksheet_node(wb.sheets.size(), -1);

    for (int s = 0; s < n_sheets; ++s) {
        const Worksheet& ws = wb.sheets[s];
        if (ws.derived()) {
            worksheet_node[s] = static_cast<int>(an.nodes.size());
            an.nodes.push_back({true, s, {}});
        }
        for (const auto& [addr, cell] : ws.cells) {
            if (!cell.is_formula()) continue;
            formula_nodes[s][addr] = static_cast<int>(an.nodes.size());
            an.nodes.push_back({false, s, addr});
        }
    }
    an.out_edges.resize(an.nodes.size());
    an.self_loop.assign(an.nodes.size(), false);

    auto edge = [&](int from, int to) {
        if (from == to) {
            an.self_loop[to] = true;
        } else {
            an.out_edges[from].push_back(to);
        }
    };
    auto depend_on_rect = [&](int node, int s, int col_lo, int col_hi, int row_lo, int row_hi) {
        if (worksheet_node[s] >= 0) {
            edge(worksheet_node[s], node);
            return;
        }
        const auto& cells = formula_nodes[s];
        for (auto it = cells.lower_bound({1, row_lo}); it != cells.end() && it->first.row <= row_hi; ++it) {
            if (it->first.column >= col_lo && it->first.column <= col_hi) edge(it->second, node);
        }
    };

    for (int v = 0; v < static_cast<int>(an.nodes.size()); ++v) {
        const Node& node = an.nodes[v];
        const Worksheet& ws = wb.sheets[node.sheet];
        if (node.worksheet) {
            try {
                const auto ast = formula::parse_formula(ws.worksheet_formula->text);
                for (const auto& name : formula_dependencies(ast, ws.name).names) {
                    const int s = wb.sheet_index(name);
                    if (s >= 0) depend_on_rect(v, s, 1, kMaxColumn, 1, kMaxRow);
                }
            } catch (const Error&) {
            }
            continue;
        }
        formula::References refs;
        try {
            refs = formula_dependencies(formula::parse_formula(ws.cells.at(node.addr).formula().text), ws.name);
        } catch (const Error&) {
            continue;
        }
        for (const auto& [sheet, addr] : refs.cells) {
            const int s = wb.sheet_index(sheet);
            if (s >= 0) depend_on_rect(v, s, addr.column, addr.column, addr.row, addr.row);
        }
        for (const auto& [sheet, range] : refs.ranges) {
            const int s = wb.sheet_index(sheet);
            if (s >= 0) depend_on_rect(v, s, range.from.column, range.to.column, range.from.row, range.to.row);
        }
        for (const auto& [sheet, column] : refs.columns) {
            const int s = wb.sheet_index(sheet);
            if (s >= 0) depend_on_rect(v, s, column, column, 1, kMaxRow);
        }
    }
    return an;
}

/// Iterative Tarjan; returns the component id of every node.
std::vector<int> strongly_connected(const std::vector<std::vector<int>>& adj, int& n_components) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    std::vector<std::pair<int, std::size_t>> calls;
    int counter = 0;
    n_components = 0;
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        auto enter = [&](int v) {
            index[v] = low[v] = counter++;
            stack.push_back(v);
            on_stack[v] = true;
            calls.emplace_back(v, 0);
        };
        enter(root);
        while (!calls.empty()) {
            auto& [u, pos] = calls.back();
            if (pos < adj[u].size()) {
                const int w = adj[u][pos++];
                if (index[w] == -1) {
                    enter(w);
                } else if (on_stack[w]) {
                    low[u] = std::min(low[u], index[w]);
                }
                continue;
            }
            const int done = u;
            if (low[done] == index[done]) {
                while (true) {
                    const int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = n_components;
                    if (w == done) break;
                }
                ++n_components;
            }
            calls.pop_back();
            if (!calls.empty()) {
                const int parent = calls.back().first;
                low[parent] = std::min(low[parent], low[done]);
            }
        }
    }
    return comp;
}

SheetCell sheet_cell(const Workbook& wb, const Node& n) { return {wb.sheets[n.sheet].name, n.addr}; }

}  // namespace

FormulaOrder order_formulae(const Workbook& wb) {
    const Analysis an = analyse(wb);
    int n_comp = 0;
    const std::vector<int> comp = strongly_connected(an.out_edges, n_comp);

    std::vector<std::vector<int>> members(n_comp);
    for (int v = 0; v < static_cast<int>(an.nodes.size()); ++v) members[comp[v]].push_back(v);
    std::vector<std::tuple<int, int, int>> key(n_comp);
    for (int c = 0; c < n_comp; ++c) {
        auto& m = members[c];
        std::sort(m.begin(), m.end(), [&](int a, int b) { return an.nodes[a].key() < an.nodes[b].key(); });
        key[c] = an.nodes[m.front()].key();
    }
    std::vector<int> indegree(n_comp, 0);
    for (int u = 0; u < static_cast<int>(an.nodes.size()); ++u) {
        for (int w : an.out_edges[u]) {
            if (comp[u] != comp[w]) ++indegree[comp[w]];
        }
    }
    using Entry = std::pair<std::tuple<int, int, int>, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
    for (int c = 0; c < n_comp; ++c) {
        if (indegree[c] == 0) ready.emplace(key[c], c);
    }

    FormulaOrder order;
    while (!ready.empty()) {
        const int c = ready.top().second;
        ready.pop();
        const auto& m = members[c];
        const bool cyclic = m.size() > 1 || an.self_loop[m.front()];
        FormulaOrder::Item item;
        if (cyclic) {
            item.kind = FormulaOrder::Item::Kind::Cycle;
            for (int v : m) {
                const Node& n = an.nodes[v];
                if (n.worksheet) {
                    item.cycle_sheets.push_back(wb.sheets[n.sheet].name);
                    order.cyclic_worksheet_formulae.insert(wb.sheets[n.sheet].name);
                } else {
                    item.cycle_cells.push_back(sheet_cell(wb, n));
                    order.cycle_members.insert(sheet_cell(wb, n));
                }
            }
        } else {
            const Node& n = an.nodes[m.front()];
            if (n.worksheet) {
                item.kind = FormulaOrder::Item::Kind::WorksheetFormula;
                item.sheet = wb.sheets[n.sheet].name;
            } else {
                item.kind = FormulaOrder::Item::Kind::Cell;
                item.cell = sheet_cell(wb, n);
            }
        }
        order.items.push_back(std::move(item));
        for (int u : m) {
            for (int w : an.out_edges[u]) {
                if (comp[w] != c && --indegree[comp[w]] == 0) ready.emplace(key[comp[w]], comp[w]);
            }
        }
    }
    return order;
}

// ---- generation --------------------------------------------------------------------------

std::string constant_literal(const Value& v) {
    if (v.is_integer()) return std::to_string(v.as_integer());
    if (v.is_number()) {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v.as_number());
        std::string s(buf, end);
        if (s.find_first_of(".e") == std::string::npos) s += ".0";
        return s;
    }
    if (v.is_text()) return formula::quote(v.as_text());
    if (v.is_boolean()) return v.as_boolean() ? "True" : "False";
    if (v.is_date()) return "Date(\"" + v.as_date().iso() + "\")";
    throw InvalidArgumentError("a " + std::string(v.type_name()) + " cannot be stored as a constant");
}

namespace {

class Emitter {
public:
    explicit Emitter(const Workbook& wb) : wb_(wb) {}

    GeneratedProgram run() {
        GeneratedProgram p;
        for (std::size_t i = 0; i < kSectionOrder.size(); ++i) {
            p.sections[i].kind = kSectionOrder[i];
            p.sections[i].editable = is_editable(kSectionOrder[i]);
            p.sections[i].header_marker = section_marker(kSectionOrder[i]);
        }
        p.sections[0].text = imports();
        p.sections[1].text = user(UserSection::PreConstants);
        p.sections[2].text = constants();
        p.sections[3].text = user(UserSection::PreFormulae);
        p.sections[5].text = user(UserSection::PostFormulae);

        std::size_t line = 1;
        for (std::size_t i = 0; i < 4; ++i) {
            p.sections[i].first_line = line + 1;
            line += 1 + p.sections[i].line_count();
        }
        p.sections[4].first_line = line + 1;
        formulae(p, line + 1);
        line += 1 + p.sections[4].line_count();
        p.sections[5].first_line = line + 1;
        return p;
    }

private:
    std::string imports() const {
        std::string out = "workbook = Workbook()\n";
        for (const auto& ws : wb_.sheets) out += "workbook.add_sheet(" + formula::quote(ws.name) + ")\n";
        for (const auto& ds : wb_.data_sources) {
            out += sheet_access(ds.target_sheet) + ".load_csv(" + formula::quote(ds.path) +
                   ", header=" + (ds.has_header ? "True" : "False") + ")\n";
        }
        if (wb_.locked) out += "workbook.locked = True\n";
        return out;
    }

    std::string user(UserSection s) const {
        std::string text = wb_.user_sections[s];
        if (!text.empty() && text.back() != '\n') text += '\n';
        return text;
    }

    std::string constants() const {
        std::string out;
        for (const auto& ws : wb_.sheets) {
            const std::string sheet = sheet_access(ws.name);
            for (const auto& [col, spec] : ws.column_formats) {
                out += sheet + ".column_format(" + formula::quote(column_letters(col)) + ", " +
                       formula::quote(spec.canonical()) + ")\n";
            }
            for (const auto& [row, spec] : ws.row_formats) {
                out += sheet + ".row_format(" + std::to_string(row) + ", " + formula::quote(spec.canonical()) + ")\n";
            }
            for (const auto& [addr, cell] : ws.cells) {
                const std::string access = cell_access(ws.name, addr);
                if (cell.enforced_type) {
                    out += access + ".enforced_type = " + formula::quote(to_string(*cell.enforced_type)) + "\n";
                }
                if (cell.is_constant() && !cell.constant().is_empty()) out += access + ".value = " + constant_literal(cell.constant()) + "\n";
                if (cell.format) out += access + ".format = " + formula::quote(cell.format->canonical()) + "\n";
            }
        }
        return out;
    }

    void formulae(GeneratedProgram& p, std::size_t first_line) const {
        std::string& out = p.sections[4].text;
        std::size_t line = first_line;
        auto emit = [&](const std::string& text) {
            out += text;
            out += '\n';
            return line++;
        };
        auto cell_line = [&](const SheetCell& c, const std::string& stmt) {
            const std::size_t at = emit(stmt + "  # " + formula_of(c));
            p.line_map.cell_to_line[c] = at;
            p.line_map.line_to_cell[at] = c;
        };

        const FormulaOrder order = order_formulae(wb_);
        for (const auto& item : order.items) {
            switch (item.kind) {
                case FormulaOrder::Item::Kind::Cell: {
                    const std::string& src = formula_of(item.cell);
                    std::string stmt;
                    try {
                        stmt = formula::translate_formula(formula::parse_formula(src), item.cell.first,
                                                          item.cell.second)
                                   .statement_text;
                    } catch (const Error& e) {
                        emit("# parse error in " + item.cell.first + "!" + item.cell.second.a1() + ": " +
                             one_line(e.what()));
                        stmt = cell_access(item.cell.first, item.cell.second) + ".value = Error(\"NAME\")";
                    }
                    cell_line(item.cell, stmt);
                    break;
                }
                case FormulaOrder::Item::Kind::WorksheetFormula:
                    worksheet_block(p, item.sheet, false, emit);
                    break;
                case FormulaOrder::Item::Kind::Cycle: {
                    std::string names;
                    for (const auto& c : item.cycle_cells) {
                        names += (names.empty() ? "" : ", ") + c.first + "!" + c.second.a1();
                    }
                    for (const auto& s : item.cycle_sheets) {
                        names += (names.empty() ? "" : ", ") + s + " (worksheet formula)";
                    }
                    emit("# cycle: " + names);
                    for (const auto& c : item.cycle_cells) {
                        p.cycle_members.insert(c);
                        cell_line(c, cell_access(c.first, c.second) + ".value = Error(\"CYCLE\")");
                    }
                    for (const auto& s : item.cycle_sheets) worksheet_block(p, s, true, emit);
                    break;
                }
            }
        }
    }

    template <typename Emit>
    void worksheet_block(GeneratedProgram& p, const std::string& sheet, bool cyclic, Emit& emit) const {
        const std::string& src = wb_.sheet(sheet).worksheet_formula->text;
        const std::size_t header = emit("# worksheet formula " + sheet + ": " + src);
        p.worksheet_formula_lines[sheet] = header;
        std::vector<std::string> names;
        for (const auto& ws : wb_.sheets) names.push_back(ws.name);
        try {
            const auto t = formula::translate_worksheet_formula(formula::parse_formula(src), sheet, names);
            emit(t.loop_header);
            if (cyclic) {
                emit("    " + sheet_access(sheet) + "[addr].value = Error(\"CYCLE\")");
            } else {
                emit(t.body);
            }
        } catch (const Error& e) {
            emit("# error in worksheet formula for " + sheet + ": " + one_line(e.what()));
        }
    }

    const std::string& formula_of(const SheetCell& c) const {
        return wb_.sheet(c.first).cells.at(c.second).formula().text;
    }

    const Workbook& wb_;
};

}  // namespace

GeneratedProgram generate_program(const Workbook& wb) { return Emitter(wb).run(); }

std::string save(const Workbook& wb) { return generate_program(wb).text(); }

// ---- loading -----------------------------------------------------------------------------

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

/// Cursor over one line of a generated statement.
class LineReader {
public:
    LineReader(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(line_, what + " in \"" + std::string(text_) + "\"");
    }

    bool accept(std::string_view s) {
        if (text_.substr(pos_, s.size()) != s) return false;
        pos_ += s.size();
        return true;
    }

    void expect(std::string_view s) {
        if (!accept(s)) fail("expected '" + std::string(s) + "'");
    }

    bool done() const { return pos_ == text_.size(); }
    void expect_end() {
        if (!done()) fail("unexpected trailing text");
    }
    std::string_view rest() const { return text_.substr(pos_); }

    std::string string() {
        if (!accept("\"")) fail("expected a string literal");
        std::string out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (pos_ >= text_.size()) break;
            const char e = text_[pos_++];
            switch (e) {
                case 'n': out += '\n'; break;
                case 'r': out += '\r'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail("unknown escape");
            }
        }
        fail("unterminated string literal");
    }

    std::string word() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    /// `workbook["S"]`
    std::string sheet() {
        expect("workbook[");
        std::string name = string();
        expect("]");
        return name;
    }

    CellAddress address() {
        const std::string w = word();
        auto a = CellAddress::parse(w);
        if (!a || a->a1() != w) fail("expected a cell address");
        return *a;
    }

    Value literal() {
        if (text_.substr(pos_, 1) == "\"") return Value::text(string());
        if (accept("True")) return Value::boolean(true);
        if (accept("False")) return Value::boolean(false);
        if (accept("Date(")) {
            const std::string iso = string();
            expect(")");
            auto d = Date::parse_iso(iso);
            if (!d) fail("invalid date");
            return Value::date(*d);
        }
        const std::size_t start = pos_;
        if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                                       text_[pos_] == '+' || text_[pos_] == '-')) {
            ++pos_;
        }
        const std::string_view num = text_.substr(start, pos_ - start);
        if (num.find_first_of(".e") == std::string_view::npos) {
            std::int64_t i = 0;
            auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), i);
            if (ec != std::errc() || p != num.data() + num.size()) fail("invalid integer literal");
            return Value::integer(i);
        }
        double d = 0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), d);
        if (ec != std::errc() || p != num.data() + num.size() || !std::isfinite(d)) fail("invalid number literal");
        return Value::number(d);
    }

    std::size_t line() const { return line_; }

private:
    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

struct Loader {
    Workbook wb;
    std::map<std::pair<std::string, CellAddress>, std::size_t> cell_lines;

    Worksheet& sheet(const std::string& name, const LineReader& r) {
        Worksheet* ws = wb.find_sheet(name);
        if (!ws) r.fail("unknown sheet \"" + name + "\"");
        return *ws;
    }

    void imports(const std::vector<std::string_view>& lines, std::size_t first) {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            LineReader r(lines[i], first + i);
            if (i == 0) {
                r.expect("workbook = Workbook()");
                r.expect_end();
                continue;
            }
            if (r.accept("workbook.add_sheet(")) {
                std::string name = r.string();
                r.expect(")");
                r.expect_end();
                if (!is_valid_sheet_name(name)) r.fail("invalid sheet name");
                if (wb.find_sheet(name)) r.fail("duplicate sheet");
                wb.sheets.push_back(Worksheet{name, {}, std::nullopt, {}, {}});
            } else if (r.accept("workbook.locked = True")) {
                r.expect_end();
                wb.locked = true;
            } else {
                DataSource ds;
                ds.target_sheet = r.sheet();
                sheet(ds.target_sheet, r);
                r.expect(".load_csv(");
                ds.path = r.string();
                r.expect(", header=");
                if (r.accept("True")) {
                    ds.has_header = true;
                } else {
                    r.expect("False");
                }
                r.expect(")");
                r.expect_end();
                if (wb.data_source_for(ds.target_sheet)) r.fail("second data source for one sheet");
                wb.data_sources.push_back(ds);
            }
        }
        if (lines.empty()) throw FormatError(first, "IMPORTS must start with \"workbook = Workbook()\"");
    }

    void constants(const std::vector<std::string_view>& lines, std::size_t first) {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            LineReader r(lines[i], first + i);
            Worksheet& ws = sheet(r.sheet(), r);
            if (r.accept(".column_format(")) {
                const std::string letters = r.string();
                r.expect(", ");
                const std::string spec = r.string();
                r.expect(")");
                r.expect_end();
                auto col = parse_column_letters(letters);
                if (!col) r.fail("invalid column");
                ws.column_formats[*col] = parse_format(spec, r);
                continue;
            }
            if (r.accept(".row_format(")) {
                const Value row = r.literal();
                r.expect(", ");
                const std::string spec = r.string();
                r.expect(")");
                r.expect_end();
                if (!row.is_integer() || row.as_integer() < 1 || row.as_integer() > kMaxRow) r.fail("invalid row");
                ws.row_formats[static_cast<int>(row.as_integer())] = parse_format(spec, r);
                continue;
            }
            r.expect(".");
            const CellAddress addr = r.address();
            const auto key = std::make_pair(ws.name, addr);
            if (!cell_lines.count(key)) cell_lines[key] = r.line();
            Cell& cell = ws.cells[addr];
            if (r.accept(".enforced_type = ")) {
                auto t = parse_enforced_type(r.string());
                r.expect_end();
                if (!t) r.fail("unknown enforced type");
                cell.enforced_type = t;
            } else if (r.accept(".value = ")) {
                Value v = r.literal();
                r.expect_end();
                if (cell.enforced_type) {
                    try {
                        if (!(coerce_to_type(v, *cell.enforced_type) == v)) r.fail("constant does not conform to its type");
                    } catch (const TypeConformanceError&) {
                        r.fail("constant does not conform to its type");
                    }
                }
                cell.content = std::move(v);
            } else if (r.accept(".format = ")) {
                const std::string spec = r.string();
                r.expect_end();
                cell.format = parse_format(spec, r);
            } else {
                r.fail("expected .enforced_type, .value or .format");
            }
        }
    }

    static FormatSpec parse_format(const std::string& spec, const LineReader& r) {
        try {
            return FormatSpec::parse(spec);
        } catch (const Error& e) {
            r.fail(e.what());
        }
    }

    static bool matches_formula(const std::string& stmt, const std::string& target, const std::string& src,
                                const std::string& sheet, CellAddress addr) {
        if (stmt == target + "Error(\"CYCLE\")") return true;
        try {
            return formula::translate_formula(formula::parse_formula(src), sheet, addr).statement_text == stmt;
        } catch (const Error&) {
            return stmt == target + "Error(\"NAME\")";
        }
    }

    void formulae(const std::vector<std::string_view>& lines, std::size_t first) {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string_view line = lines[i];
            LineReader r(line, first + i);
            if (r.accept("# worksheet formula ")) {
                const std::string_view rest = r.rest();
                const std::size_t colon = rest.find(": ");
                if (colon == std::string_view::npos) r.fail("malformed worksheet formula header");
                Worksheet& ws = sheet(std::string(rest.substr(0, colon)), r);
                const std::string src(rest.substr(colon + 2));
                if (src.empty() || src.front() != '=') r.fail("worksheet formula must start with '='");
                if (ws.worksheet_formula) r.fail("second worksheet formula for one sheet");
                ws.worksheet_formula = FormulaSource{src};
                continue;
            }
            if (line.empty() || line.front() == '#' || line.front() == ' ' || line.rfind("for addr in ", 0) == 0) {
                continue;  // regenerated and compared afterwards
            }
            const std::string sheet_name = r.sheet();
            Worksheet& ws = sheet(sheet_name, r);
            r.expect(".");
            const CellAddress addr = r.address();
            r.expect(".value = ");
            const std::string target = cell_access(sheet_name, addr) + ".value = ";
            bool found = false;
            for (std::size_t at = line.find("  # ="); at != std::string_view::npos; at = line.find("  # =", at + 1)) {
                const std::string stmt(line.substr(0, at));
                const std::string src(line.substr(at + 4));
                if (!matches_formula(stmt, target, src, sheet_name, addr)) continue;
                Cell& cell = ws.cells[addr];
                if (cell.is_formula() || (cell.is_constant() && !cell.constant().is_empty())) {
                    r.fail("cell assigned twice");
                }
                cell.content = FormulaSource{src};
                found = true;
                break;
            }
            if (!found) r.fail("statement does not match its formula source comment");
        }
    }

    void check_cells() {
        for (const auto& ws : wb.sheets) {
            if ((ws.derived() || wb.data_source_for(ws.name)) && !ws.cells.empty()) {
                throw FormatError(cell_lines.at({ws.name, ws.cells.begin()->first}),
                                  "sheet " + ws.name + " is filled automatically and cannot hold cells");
            }
        }
    }
};

}  // namespace

std::array<std::string, 6> split_sections(std::string_view text) {
    std::array<std::string, 6> out;
    const auto lines = lines_of(text);
    std::size_t next = 0;
    bool started = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = lines[i];
        if (line.rfind("#=== SECTION:", 0) == 0) {
            if (next >= kSectionOrder.size()) throw FormatError(i + 1, "unexpected section marker");
            if (line != section_marker(kSectionOrder[next])) {
                throw FormatError(i + 1, "expected marker \"" + section_marker(kSectionOrder[next]) + "\"");
            }
            ++next;
            started = true;
            continue;
        }
        if (!started) throw FormatError(i + 1, "text before the first section marker");
        out[next - 1] += line;
        out[next - 1] += '\n';
    }
    if (next < kSectionOrder.size()) {
        throw FormatError(lines.size() + 1, "missing marker \"" + section_marker(kSectionOrder[next]) + "\"");
    }
    return out;
}

Workbook load(std::string_view raw, std::string name) {
    std::string text;
    text.reserve(raw.size() + 1);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') continue;
        text += raw[i];
    }
    if (!text.empty() && text.back() != '\n') text += '\n';

    const auto sections = split_sections(text);
    std::array<std::size_t, 6> first{};
    std::size_t line = 1;
    for (std::size_t i = 0; i < 6; ++i) {
        first[i] = line + 1;
        line += 1 + static_cast<std::size_t>(std::count(sections[i].begin(), sections[i].end(), '\n'));
    }

    Loader loader;
    loader.wb.name = std::move(name);
    loader.imports(lines_of(sections[0]), first[0]);
    loader.wb.user_sections.pre_constants = sections[1];
    loader.constants(lines_of(sections[2]), first[2]);
    loader.wb.user_sections.pre_formulae = sections[3];
    loader.formulae(lines_of(sections[4]), first[4]);
    loader.wb.user_sections.post_formulae = sections[5];
    loader.check_cells();

    const std::string canonical = save(loader.wb);
    if (canonical != text) {
        const auto want = lines_of(canonical);
        const auto got = lines_of(text);
        std::size_t i = 0;
        while (i < want.size() && i < got.size() && want[i] == got[i]) ++i;
        std::string detail = i < want.size() ? "expected \"" + std::string(want[i]) + "\"" : "unexpected extra line";
        throw FormatError(i + 1, "non-canonical generated statement; " + detail);
    }
    return std::move(loader.wb);
}

// ---- exports -----------------------------------------------------------------------------

std::string export_standalone(const Workbook& wb) {
    GeneratedProgram p = generate_program(wb);
    std::string& post = p.sections[static_cast<std::size_t>(SectionKind::PostFormulae)].text;
    post += std::string(kStandaloneEpilogue) + "\n";
    post += "for name in workbook.sheet_names():\n";
    post += "    for addr in workbook[name].addresses():\n";
    post += "        print(CONCAT(name, \"!\", addr), \"=\", workbook[name][addr].value)\n";
    return p.text();
}

std::string export_library(const Workbook& wb) {
    std::string out = "# GridScript library exported from workbook \"" + wb.name + "\"\n";
    out += "# function definitions from PRE_CONSTANTS, PRE_FORMULAE and POST_FORMULAE, in that order\n";
    for (SectionKind kind : {SectionKind::PreConstants, SectionKind::PreFormulae, SectionKind::PostFormulae}) {
        const auto lines = lines_of(wb.user_sections[*user_section_of(kind)]);
        for (std::size_t i = 0; i < lines.size();) {
            if (lines[i].rfind("def ", 0) != 0) {
                ++i;
                continue;
            }
            std::size_t end = i + 1;
            while (end < lines.size() &&
                   (lines[end].empty() || lines[end].front() == ' ' || lines[end].front() == '\t')) {
                ++end;
            }
            std::size_t last = end;
            while (last > i + 1 && lines[last - 1].find_first_not_of(" \t") == std::string_view::npos) --last;
            out += "\n# from " + std::string(to_string(kind)) + " line " + std::to_string(i + 1) + "\n";
            for (std::size_t k = i; k < last; ++k) {
                out += lines[k];
                out += '\n';
            }
            i = end;
        }
    }
    return out;
}

}  // namespace tabula
