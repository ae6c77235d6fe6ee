#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tabula/box.hpp"
#include "tabula/value.hpp"

namespace tabula::script {

struct Expr;
struct Stmt;
using Block = std::shared_ptr<const std::vector<Stmt>>;

enum class BinOpKind { Add, Sub, Mul, Div, FloorDiv, Mod, Pow };
enum class CmpKind { Eq, Ne, Lt, Le, Gt, Ge };
enum class UnaryKind { Neg, Plus, Not };
enum class LogicKind { And, Or };

struct LiteralExpr {
    Value value;
};
struct NameExpr {
    std::string name;
};
struct ListExpr {
    std::vector<Expr> items;
};
struct DictExpr {
    std::vector<std::pair<Expr, Expr>> entries;
};
struct KeywordArg {
    std::string name;
    Box<Expr> value;
};
struct CallExpr {
    Box<Expr> callee;
    std::vector<Expr> args;
    std::vector<KeywordArg> kwargs;
};
struct AttributeExpr {
    Box<Expr> object;
    std::string name;
};
struct SubscriptExpr {
    Box<Expr> object;
    Box<Expr> index;
};
struct BinaryExpr {
    BinOpKind op;
    Box<Expr> lhs;
    Box<Expr> rhs;
};
struct CompareExpr {
    CmpKind op;
    Box<Expr> lhs;
    Box<Expr> rhs;
};
struct UnaryExpr {
    UnaryKind op;
    Box<Expr> operand;
};
struct LogicExpr {
    LogicKind op;
    Box<Expr> lhs;
    Box<Expr> rhs;
};

struct Expr {
    std::variant<LiteralExpr, NameExpr, ListExpr, DictExpr, CallExpr, AttributeExpr, SubscriptExpr, BinaryExpr,
                 CompareExpr, UnaryExpr, LogicExpr>
        node;
    std::size_t line = 0;
};

struct ExprStmt {
    Expr expr;
};
struct AssignStmt {
    Expr target;
    Expr value;
    std::optional<BinOpKind> augmented;
};
struct FuncDefStmt {
    std::string name;
    std::vector<std::string> params;
    Block body;
};
struct IfStmt {
    std::vector<std::pair<Expr, Block>> branches;
    Block else_body;  // may be null
};
struct ForStmt {
    std::string var;
    Expr iterable;
    Block body;
};
struct WhileStmt {
    Expr cond;
    Block body;
};
struct ReturnStmt {
    std::optional<Expr> value;
};
struct PassStmt {};
struct BreakStmt {};
struct ContinueStmt {};
struct GlobalStmt {
    std::vector<std::string> names;
};

struct Stmt {
    std::variant<ExprStmt, AssignStmt, FuncDefStmt, IfStmt, ForStmt, WhileStmt, ReturnStmt, PassStmt, BreakStmt,
                 ContinueStmt, GlobalStmt>
        node;
    std::size_t line = 0;
};

/// Throws ScriptSyntaxError.
std::vector<Stmt> parse_program(std::string_view source);

}  // namespace tabula::script
