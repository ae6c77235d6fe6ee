#pragma once

// Cell and worksheet formulae: lexer, parser, AST and the translator into GridScript.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tabula/address.hpp"
#include "tabula/box.hpp"

namespace tabula::formula {

enum class TokenKind {
    Number,
    Text,
    Bool,
    Cell,
    Ident,
    Sheet,  // "Name!" or "'Quoted name'!" prefix; text holds the bare name
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Amp,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    End,
};

std::string_view to_string(TokenKind k);

struct Token {
    TokenKind kind;
    std::string text;     // canonical text: unquoted strings, "$"-free cells, upper-cased builtins
    std::size_t column;   // 1-based offset into the formula source

    friend bool operator==(const Token&, const Token&) = default;
};

/// Builtin function names; matched case-insensitively in formulae.
bool is_builtin_function(std::string_view upper_name);

/// Requires a leading "=". Throws LexError.
std::vector<Token> tokenize(std::string_view src);

struct Expr;

struct NumberLit {
    std::string literal;  // as written, e.g. "1.50"; integral spellings evaluate as Integer
    friend bool operator==(const NumberLit&, const NumberLit&) = default;
};
struct TextLit {
    std::string value;
    friend bool operator==(const TextLit&, const TextLit&) = default;
};
struct BoolLit {
    bool value;
    friend bool operator==(const BoolLit&, const BoolLit&) = default;
};
struct ListLit {
    std::vector<Expr> items;
    friend bool operator==(const ListLit&, const ListLit&);
};
struct CellRef {
    std::optional<std::string> sheet;
    CellAddress addr;
    friend bool operator==(const CellRef&, const CellRef&) = default;
};
struct RangeRef {
    std::optional<std::string> sheet;
    CellAddress from;
    CellAddress to;
    friend bool operator==(const RangeRef&, const RangeRef&) = default;
};
struct ColumnRef {
    std::optional<std::string> sheet;
    int column;
    friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};
/// Bare identifier: a user-defined GridScript name, or a sheet name in worksheet formulae.
struct NameRef {
    std::string name;
    friend bool operator==(const NameRef&, const NameRef&) = default;
};
struct FuncCall {
    std::string name;
    std::vector<Expr> args;
    friend bool operator==(const FuncCall&, const FuncCall&);
};

enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };
enum class UnaryOpKind { Neg, Plus, Percent };

std::string_view to_string(BinaryOp op);

struct BinOp {
    BinaryOp op;
    Box<Expr> lhs;
    Box<Expr> rhs;
    friend bool operator==(const BinOp&, const BinOp&) = default;
};
struct UnaryOp {
    UnaryOpKind op;
    Box<Expr> operand;
    friend bool operator==(const UnaryOp&, const UnaryOp&) = default;
};
struct Paren {
    Box<Expr> inner;
    friend bool operator==(const Paren&, const Paren&) = default;
};

struct Expr {
    using Node = std::variant<NumberLit, TextLit, BoolLit, ListLit, CellRef, RangeRef, ColumnRef, NameRef,
                              FuncCall, BinOp, UnaryOp, Paren>;
    Node node;
    std::size_t column = 0;  // not part of structural equality

    friend bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }
};

inline bool operator==(const ListLit& a, const ListLit& b) { return a.items == b.items; }
inline bool operator==(const FuncCall& a, const FuncCall& b) { return a.name == b.name && a.args == b.args; }

/// Throws LexError or ParseError.
Expr parse_formula(std::string_view src);

/// Canonical formula text for an AST (used by tests and diagnostics).
std::string to_formula_text(const Expr& e);

/// Static reference set of a formula. Unqualified references take the host sheet.
struct References {
    std::set<std::pair<std::string, CellAddress>> cells;
    std::set<std::pair<std::string, CellRange>> ranges;
    std::set<std::pair<std::string, int>> columns;
    std::set<std::string> names;  // user identifiers and function names

    friend bool operator==(const References&, const References&) = default;
};

References formula_dependencies(const Expr& ast, const std::string& host_sheet);

struct TranslationUnit {
    std::string sheet;
    CellAddress target;
    std::string statement_text;
    References refs;
};

/// GridScript rendering of a formula expression; unqualified refs resolve to host_sheet.
std::string translate_expression(const Expr& ast, const std::string& host_sheet);

/// One assignment line `workbook["<sheet>"].<A1>.value = <expr>`.
TranslationUnit translate_formula(const Expr& ast, const std::string& sheet, CellAddress addr);

/// GridScript string literal for arbitrary text.
std::string quote(std::string_view text);

/// Worksheet formula: elementwise expression over whole sheets named by bare identifiers.
struct WorksheetTranslation {
    std::vector<std::string> operand_sheets;  // first-appearance order
    std::string loop_header;                  // `for addr in workbook.union_cells(...):`
    std::string body;                         // indented assignment into the target sheet
};

/// Throws InvalidArgumentError for cell/range references or unknown sheet identifiers.
WorksheetTranslation translate_worksheet_formula(const Expr& ast, const std::string& target_sheet,
                                                 const std::vector<std::string>& known_sheets);

}  // namespace tabula::formula
