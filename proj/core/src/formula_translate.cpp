#include <algorithm>
#include <cctype>
#include <functional>

#include "tabula/errors.hpp"
#include "tabula/formula.hpp"

namespace tabula::formula {

namespace {

// GridScript binding strength of an emitted expression.
enum Prec : int { kCompare = 1, kAdditive = 2, kMultiplicative = 3, kUnary = 4, kPower = 5, kPrimary = 6 };

struct Emitted {
    std::string text;
    int prec;
};

std::string wrap(const Emitted& e, int min_prec) { return e.prec >= min_prec ? e.text : "(" + e.text + ")"; }

std::string sheet_access(const std::string& sheet) { return "workbook[" + quote(sheet) + "]"; }

using NameResolver = std::function<std::string(const NameRef&)>;

class Translator {
public:
    Translator(std::string host, NameResolver names) : host_(std::move(host)), names_(std::move(names)) {}

    Emitted emit(const Expr& e) const { return std::visit([&](const auto& n) { return on(n); }, e.node); }

private:
    const std::string& sheet_of(const std::optional<std::string>& s) const { return s ? *s : host_; }

    Emitted on(const NumberLit& n) const { return {n.literal, kPrimary}; }
    Emitted on(const TextLit& t) const { return {quote(t.value), kPrimary}; }
    Emitted on(const BoolLit& b) const { return {b.value ? "True" : "False", kPrimary}; }
    Emitted on(const ListLit& l) const {
        std::string out = "[";
        for (std::size_t i = 0; i < l.items.size(); ++i) {
            if (i) out += ", ";
            out += emit(l.items[i]).text;
        }
        return {out + "]", kPrimary};
    }
    Emitted on(const CellRef& c) const {
        return {sheet_access(sheet_of(c.sheet)) + "." + c.addr.a1() + ".value", kPrimary};
    }
    Emitted on(const RangeRef& r) const {
        return {sheet_access(sheet_of(r.sheet)) + ".range(" + quote(r.from.a1()) + ", " + quote(r.to.a1()) + ")",
                kPrimary};
    }
    Emitted on(const ColumnRef& c) const {
        return {sheet_access(sheet_of(c.sheet)) + ".column(" + quote(column_letters(c.column)) + ")", kPrimary};
    }
    Emitted on(const NameRef& n) const { return {names_ ? names_(n) : n.name, kPrimary}; }
    Emitted on(const FuncCall& f) const {
        std::string out = f.name + "(";
        for (std::size_t i = 0; i < f.args.size(); ++i) {
            if (i) out += ", ";
            out += emit(f.args[i]).text;
        }
        return {out + ")", kPrimary};
    }
    Emitted on(const Paren& p) const { return {"(" + emit(*p.inner).text + ")", kPrimary}; }
    Emitted on(const UnaryOp& u) const {
        Emitted inner = emit(*u.operand);
        switch (u.op) {
            case UnaryOpKind::Neg: return {"-" + wrap(inner, kUnary), kUnary};
            case UnaryOpKind::Plus: return {"+" + wrap(inner, kUnary), kUnary};
            case UnaryOpKind::Percent: return {"(" + wrap(inner, kMultiplicative) + " / 100)", kPrimary};
        }
        return inner;
    }
    Emitted on(const BinOp& b) const {
        Emitted lhs = emit(*b.lhs);
        Emitted rhs = emit(*b.rhs);
        auto infix = [&](std::string_view op, int prec) {
            // Left-associative: the right operand must bind strictly tighter.
            return Emitted{wrap(lhs, prec) + " " + std::string(op) + " " + wrap(rhs, prec + 1), prec};
        };
        auto compare = [&](std::string_view op) {
            return Emitted{wrap(lhs, kCompare + 1) + " " + std::string(op) + " " + wrap(rhs, kCompare + 1), kCompare};
        };
        switch (b.op) {
            case BinaryOp::Add: return infix("+", kAdditive);
            case BinaryOp::Sub: return infix("-", kAdditive);
            case BinaryOp::Mul: return infix("*", kMultiplicative);
            case BinaryOp::Div: return infix("/", kMultiplicative);
            case BinaryOp::Pow: return {wrap(lhs, kPrimary) + " ** " + wrap(rhs, kUnary), kPower};
            case BinaryOp::Concat: return {"CONCAT(" + lhs.text + ", " + rhs.text + ")", kPrimary};
            case BinaryOp::Eq: return compare("==");
            case BinaryOp::Ne: return compare("!=");
            case BinaryOp::Lt: return compare("<");
            case BinaryOp::Le: return compare("<=");
            case BinaryOp::Gt: return compare(">");
            case BinaryOp::Ge: return compare(">=");
        }
        return lhs;
    }

    std::string host_;
    NameResolver names_;
};

void collect(const Expr& e, const std::string& host, References& refs) {
    auto sheet_of = [&](const std::optional<std::string>& s) { return s ? *s : host; };
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CellRef>) {
                refs.cells.emplace(sheet_of(n.sheet), n.addr);
            } else if constexpr (std::is_same_v<T, RangeRef>) {
                refs.ranges.emplace(sheet_of(n.sheet), CellRange{n.from, n.to});
            } else if constexpr (std::is_same_v<T, ColumnRef>) {
                refs.columns.emplace(sheet_of(n.sheet), n.column);
            } else if constexpr (std::is_same_v<T, NameRef>) {
                refs.names.insert(n.name);
            } else if constexpr (std::is_same_v<T, FuncCall>) {
                refs.names.insert(n.name);
                for (const auto& a : n.args) collect(a, host, refs);
            } else if constexpr (std::is_same_v<T, ListLit>) {
                for (const auto& a : n.items) collect(a, host, refs);
            } else if constexpr (std::is_same_v<T, BinOp>) {
                collect(*n.lhs, host, refs);
                collect(*n.rhs, host, refs);
            } else if constexpr (std::is_same_v<T, UnaryOp>) {
                collect(*n.operand, host, refs);
            } else if constexpr (std::is_same_v<T, Paren>) {
                collect(*n.inner, host, refs);
            }
        },
        e.node);
}

std::string formula_sheet_prefix(const std::optional<std::string>& sheet) {
    if (!sheet) return {};
    const bool plain = !sheet->empty() && std::all_of(sheet->begin(), sheet->end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
    if (plain && std::isalpha(static_cast<unsigned char>(sheet->front()))) return *sheet + "!";
    std::string out = "'";
    for (char c : *sheet) {
        if (c == '\'') out += '\'';
        out += c;
    }
    return out + "'!";
}

std::string text_of(const Expr& e) {
    return std::visit(
        [&](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NumberLit>) {
                return n.literal;
            } else if constexpr (std::is_same_v<T, TextLit>) {
                std::string out = "\"";
                for (char c : n.value) {
                    if (c == '"') out += '"';
                    out += c;
                }
                return out + "\"";
            } else if constexpr (std::is_same_v<T, BoolLit>) {
                return n.value ? "TRUE" : "FALSE";
            } else if constexpr (std::is_same_v<T, ListLit>) {
                std::string out = "[";
                for (std::size_t i = 0; i < n.items.size(); ++i) out += (i ? "," : "") + text_of(n.items[i]);
                return out + "]";
            } else if constexpr (std::is_same_v<T, CellRef>) {
                return formula_sheet_prefix(n.sheet) + n.addr.a1();
            } else if constexpr (std::is_same_v<T, RangeRef>) {
                return formula_sheet_prefix(n.sheet) + n.from.a1() + ":" + n.to.a1();
            } else if constexpr (std::is_same_v<T, ColumnRef>) {
                return formula_sheet_prefix(n.sheet) + column_letters(n.column) + ":" + column_letters(n.column);
            } else if constexpr (std::is_same_v<T, NameRef>) {
                return n.name;
            } else if constexpr (std::is_same_v<T, FuncCall>) {
                std::string out = n.name + "(";
                for (std::size_t i = 0; i < n.args.size(); ++i) out += (i ? "," : "") + text_of(n.args[i]);
                return out + ")";
            } else if constexpr (std::is_same_v<T, BinOp>) {
                return text_of(*n.lhs) + std::string(to_string(n.op)) + text_of(*n.rhs);
            } else if constexpr (std::is_same_v<T, UnaryOp>) {
                if (n.op == UnaryOpKind::Percent) return text_of(*n.operand) + "%";
                return (n.op == UnaryOpKind::Neg ? "-" : "+") + text_of(*n.operand);
            } else {
                return "(" + text_of(*n.inner) + ")";
            }
        },
        e.node);
}

void check_worksheet_operands(const Expr& e) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CellRef> || std::is_same_v<T, RangeRef> ||
                          std::is_same_v<T, ColumnRef>) {
                throw InvalidArgumentError(
                    "worksheet formulae combine whole sheets; cell, range and column references are not allowed");
            } else if constexpr (std::is_same_v<T, ListLit>) {
                throw InvalidArgumentError("worksheet formulae cannot contain list literals");
            } else if constexpr (std::is_same_v<T, FuncCall>) {
                for (const auto& a : n.args) check_worksheet_operands(a);
            } else if constexpr (std::is_same_v<T, BinOp>) {
                check_worksheet_operands(*n.lhs);
                check_worksheet_operands(*n.rhs);
            } else if constexpr (std::is_same_v<T, UnaryOp>) {
                check_worksheet_operands(*n.operand);
            } else if constexpr (std::is_same_v<T, Paren>) {
                check_worksheet_operands(*n.inner);
            }
        },
        e.node);
}

}  // namespace

std::string quote(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

std::string to_formula_text(const Expr& e) { return "=" + text_of(e); }

References formula_dependencies(const Expr& ast, const std::string& host_sheet) {
    References refs;
    collect(ast, host_sheet, refs);
    return refs;
}

std::string translate_expression(const Expr& ast, const std::string& host_sheet) {
    return Translator(host_sheet, nullptr).emit(ast).text;
}

TranslationUnit translate_formula(const Expr& ast, const std::string& sheet, CellAddress addr) {
    TranslationUnit unit;
    unit.sheet = sheet;
    unit.target = addr;
    unit.statement_text = sheet_access(sheet) + "." + addr.a1() + ".value = " + translate_expression(ast, sheet);
    unit.refs = formula_dependencies(ast, sheet);
    return unit;
}

WorksheetTranslation translate_worksheet_formula(const Expr& ast, const std::string& target_sheet,
                                                 const std::vector<std::string>& known_sheets) {
    check_worksheet_operands(ast);
    WorksheetTranslation out;
    auto resolve = [&](const NameRef& n) -> std::string {
        if (std::find(known_sheets.begin(), known_sheets.end(), n.name) == known_sheets.end()) {
            throw UnknownSheetError(n.name);
        }
        if (std::find(out.operand_sheets.begin(), out.operand_sheets.end(), n.name) == out.operand_sheets.end()) {
            out.operand_sheets.push_back(n.name);
        }
        return sheet_access(n.name) + "[addr].value";
    };
    const std::string rhs = Translator(target_sheet, resolve).emit(ast).text;
    if (out.operand_sheets.empty()) {
        throw InvalidArgumentError("worksheet formula must reference at least one sheet");
    }
    std::string args;
    for (std::size_t i = 0; i < out.operand_sheets.size(); ++i) {
        if (i) args += ", ";
        args += quote(out.operand_sheets[i]);
    }
    out.loop_header = "for addr in workbook.union_cells(" + args + "):";
    out.body = "    " + sheet_access(target_sheet) + "[addr].value = " + rhs;
    return out;
}

}  // namespace tabula::formula
