#include <cctype>
#include <charconv>
#include <limits>
#include <set>

#include "script/ast.hpp"
#include "tabula/script.hpp"

namespace tabula::script {

namespace {

enum class Tok { Name, Number, String, Op, Keyword, Newline, Indent, Dedent, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t line;
    std::size_t column;
    Value literal;  // Number / String tokens
};

const std::set<std::string, std::less<>> kKeywords{"def",    "if",   "elif",  "else",     "for",  "in",
                                                   "while",  "return", "pass", "break", "continue", "and",
                                                   "or",     "not",  "True",  "False",    "None", "global",
                                                   "lambda", "class", "import", "try"};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<std::size_t> indents{0};
        bool at_line_start = true;
        while (pos_ < src_.size()) {
            if (at_line_start && depth_ == 0) {
                std::size_t width = 0;
                std::size_t p = pos_;
                while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t')) {
                    width += src_[p] == '\t' ? 4 : 1;
                    ++p;
                }
                // Blank and comment-only lines do not affect indentation.
                if (p >= src_.size() || src_[p] == '\n' || src_[p] == '\r' || src_[p] == '#') {
                    col_ += p - pos_;
                    pos_ = p;
                    skip_comment();
                    if (pos_ < src_.size()) newline();
                    continue;
                }
                col_ += p - pos_;
                pos_ = p;
                if (width > indents.back()) {
                    indents.push_back(width);
                    out_.push_back({Tok::Indent, "", line_, col_, {}});
                } else {
                    while (width < indents.back()) {
                        indents.pop_back();
                        out_.push_back({Tok::Dedent, "", line_, col_, {}});
                    }
                    if (width != indents.back()) fail("inconsistent indentation");
                }
                at_line_start = false;
            }
            const char c = src_[pos_];
            if (c == ' ' || c == '\t') {
                advance();
            } else if (c == '#') {
                skip_comment();
            } else if (c == '\\' && peek(1) == '\n') {
                advance();
                newline();
            } else if (c == '\n' || c == '\r') {
                if (depth_ == 0) {
                    out_.push_back({Tok::Newline, "", line_, col_, {}});
                    at_line_start = true;
                }
                newline();
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                number();
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                word();
            } else if (c == '"' || c == '\'') {
                string(c);
            } else {
                op();
            }
        }
        if (!out_.empty() && out_.back().kind != Tok::Newline) out_.push_back({Tok::Newline, "", line_, col_, {}});
        while (indents.size() > 1) {
            indents.pop_back();
            out_.push_back({Tok::Dedent, "", line_, col_, {}});
        }
        out_.push_back({Tok::End, "", line_, col_, {}});
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ScriptSyntaxError(line_, col_, msg); }

    char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }
    void advance(std::size_t n = 1) {
        pos_ += n;
        col_ += n;
    }
    void newline() {
        if (src_[pos_] == '\r' && peek(1) == '\n') ++pos_;
        ++pos_;
        ++line_;
        col_ = 1;
    }
    void skip_comment() {
        if (peek() != '#') return;
        while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') advance();
    }

    void number() {
        const std::size_t start = pos_, col = col_;
        bool fractional = false;
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        if (peek() == '.' && !(std::isalpha(static_cast<unsigned char>(peek(1))) || peek(1) == '_')) {
            fractional = true;
            advance();
            while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
        if ((peek() == 'e' || peek() == 'E') &&
            (std::isdigit(static_cast<unsigned char>(peek(1))) ||
             ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
            fractional = true;
            advance(2);
            while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
        std::string text(src_.substr(start, pos_ - start));
        if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') fail("invalid number literal");
        out_.push_back({Tok::Number, text, line_, col, number_value(text, fractional)});
    }

    Value number_value(const std::string& text, bool fractional) const {
        if (!fractional) {
            std::int64_t i = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
            if (ec == std::errc() && ptr == text.data() + text.size()) return Value::integer(i);
        }
        std::string body = text.front() == '.' ? "0" + text : text;
        double d = 0;
        auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), d);
        if (ec != std::errc()) fail("number literal out of range");
        return Value::number(d);
    }

    void word() {
        const std::size_t start = pos_, col = col_;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
        std::string text(src_.substr(start, pos_ - start));
        out_.push_back({kKeywords.count(text) ? Tok::Keyword : Tok::Name, text, line_, col, {}});
    }

    void string(char quote) {
        const std::size_t col = col_;
        const std::size_t line = line_;
        advance();
        std::string value;
        while (true) {
            if (pos_ >= src_.size() || peek() == '\n' || peek() == '\r') fail("unterminated string literal");
            char c = peek();
            advance();
            if (c == quote) break;
            if (c == '\\') {
                char e = peek();
                advance();
                switch (e) {
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    case 'r': value += '\r'; break;
                    case '\\': value += '\\'; break;
                    case '"': value += '"'; break;
                    case '\'': value += '\''; break;
                    case '0': value += '\0'; break;
                    default: fail(std::string("unknown escape \\") + e);
                }
                continue;
            }
            value += c;
        }
        out_.push_back({Tok::String, value, line, col, Value::text(value)});
    }

    void op() {
        static const std::vector<std::string> kOps{"**=", "//=", "//", "**", "==", "!=", "<=", ">=", "+=", "-=",
                                                   "*=",  "/=",  "%=", "+",  "-",  "*",  "/",  "%",  "<",  ">",
                                                   "=",   "(",   ")",  "[",  "]",  "{",  "}",  ",",  ":",  "."};
        for (const auto& o : kOps) {
            if (src_.compare(pos_, o.size(), o) == 0) {
                if (o == "(" || o == "[" || o == "{") ++depth_;
                if ((o == ")" || o == "]" || o == "}") && depth_ > 0) --depth_;
                out_.push_back({Tok::Op, o, line_, col_, {}});
                advance(o.size());
                return;
            }
        }
        fail(std::string("unexpected character '") + peek() + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
    int depth_ = 0;
    std::vector<Token> out_;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    std::vector<Stmt> program() {
        std::vector<Stmt> out;
        while (cur().kind != Tok::End) {
            if (cur().kind == Tok::Newline) {
                ++pos_;
                continue;
            }
            statement(out);
        }
        return out;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    const Token& next_tok() const { return toks_[std::min(pos_ + 1, toks_.size() - 1)]; }
    bool is_op(std::string_view o) const { return cur().kind == Tok::Op && cur().text == o; }
    bool is_kw(std::string_view k) const { return cur().kind == Tok::Keyword && cur().text == k; }
    bool accept_op(std::string_view o) {
        if (!is_op(o)) return false;
        ++pos_;
        return true;
    }
    bool accept_kw(std::string_view k) {
        if (!is_kw(k)) return false;
        ++pos_;
        return true;
    }
    [[noreturn]] void fail(const std::string& expected) const {
        std::string found;
        switch (cur().kind) {
            case Tok::Newline: found = "end of line"; break;
            case Tok::Indent: found = "indent"; break;
            case Tok::Dedent: found = "dedent"; break;
            case Tok::End: found = "end of input"; break;
            default: found = "'" + cur().text + "'";
        }
        throw ScriptSyntaxError(cur().line, cur().column, "expected " + expected + ", found " + found);
    }
    void expect_op(std::string_view o) {
        if (!accept_op(o)) fail("'" + std::string(o) + "'");
    }
    std::string expect_name() {
        if (cur().kind != Tok::Name) fail("name");
        return toks_[pos_++].text;
    }
    void expect_newline() {
        if (cur().kind == Tok::End) return;
        if (cur().kind != Tok::Newline) fail("end of line");
        ++pos_;
    }

    Block block() {
        expect_op(":");
        auto body = std::make_shared<std::vector<Stmt>>();
        if (cur().kind != Tok::Newline) {
            simple_statement(*body);
            return body;
        }
        ++pos_;
        if (cur().kind != Tok::Indent) fail("indented block");
        ++pos_;
        while (cur().kind != Tok::Dedent && cur().kind != Tok::End) {
            if (cur().kind == Tok::Newline) {
                ++pos_;
                continue;
            }
            statement(*body);
        }
        if (cur().kind == Tok::Dedent) ++pos_;
        return body;
    }

    void statement(std::vector<Stmt>& out) {
        const std::size_t line = cur().line;
        if (accept_kw("def")) {
            FuncDefStmt def;
            def.name = expect_name();
            expect_op("(");
            if (!accept_op(")")) {
                do {
                    def.params.push_back(expect_name());
                } while (accept_op(","));
                expect_op(")");
            }
            def.body = block();
            out.push_back({std::move(def), line});
            return;
        }
        if (accept_kw("if")) {
            IfStmt s;
            Expr cond = expression();
            s.branches.emplace_back(std::move(cond), block());
            while (true) {
                if (accept_kw("elif")) {
                    Expr c = expression();
                    s.branches.emplace_back(std::move(c), block());
                } else if (accept_kw("else")) {
                    s.else_body = block();
                    break;
                } else {
                    break;
                }
            }
            out.push_back({std::move(s), line});
            return;
        }
        if (accept_kw("for")) {
            ForStmt s;
            s.var = expect_name();
            if (!accept_kw("in")) fail("'in'");
            s.iterable = expression();
            s.body = block();
            out.push_back({std::move(s), line});
            return;
        }
        if (accept_kw("while")) {
            WhileStmt s;
            s.cond = expression();
            s.body = block();
            out.push_back({std::move(s), line});
            return;
        }
        for (const char* unsupported : {"class", "import", "try", "lambda"}) {
            if (is_kw(unsupported)) {
                throw ScriptSyntaxError(cur().line, cur().column,
                                        std::string("'") + unsupported + "' is not supported in GridScript");
            }
        }
        simple_statement(out);
    }

    void simple_statement(std::vector<Stmt>& out) {
        const std::size_t line = cur().line;
        if (accept_kw("pass")) {
            out.push_back({PassStmt{}, line});
        } else if (accept_kw("break")) {
            out.push_back({BreakStmt{}, line});
        } else if (accept_kw("continue")) {
            out.push_back({ContinueStmt{}, line});
        } else if (accept_kw("return")) {
            ReturnStmt r;
            if (cur().kind != Tok::Newline && cur().kind != Tok::End) r.value = expression();
            out.push_back({std::move(r), line});
        } else if (accept_kw("global")) {
            GlobalStmt g;
            do {
                g.names.push_back(expect_name());
            } while (accept_op(","));
            out.push_back({std::move(g), line});
        } else {
            Expr e = expression();
            static const std::vector<std::pair<std::string, std::optional<BinOpKind>>> kAssignOps{
                {"=", std::nullopt},         {"+=", BinOpKind::Add}, {"-=", BinOpKind::Sub},
                {"*=", BinOpKind::Mul},      {"/=", BinOpKind::Div}, {"//=", BinOpKind::FloorDiv},
                {"%=", BinOpKind::Mod},      {"**=", BinOpKind::Pow}};
            bool assigned = false;
            for (const auto& [text, kind] : kAssignOps) {
                if (is_op(text)) {
                    check_target(e);
                    ++pos_;
                    Expr value = expression();
                    out.push_back({AssignStmt{std::move(e), std::move(value), kind}, line});
                    assigned = true;
                    break;
                }
            }
            if (!assigned) out.push_back({ExprStmt{std::move(e)}, line});
        }
        expect_newline();
    }

    void check_target(const Expr& e) const {
        if (std::holds_alternative<NameExpr>(e.node) || std::holds_alternative<AttributeExpr>(e.node) ||
            std::holds_alternative<SubscriptExpr>(e.node)) {
            return;
        }
        throw ScriptSyntaxError(cur().line, cur().column, "cannot assign to expression");
    }

    static Expr make(decltype(Expr::node) node, std::size_t line) { return Expr{std::move(node), line}; }

    Expr expression() { return or_expr(); }

    Expr or_expr() {
        Expr lhs = and_expr();
        while (is_kw("or")) {
            const std::size_t line = cur().line;
            ++pos_;
            Expr rhs = and_expr();
            lhs = make(LogicExpr{LogicKind::Or, std::move(lhs), std::move(rhs)}, line);
        }
        return lhs;
    }

    Expr and_expr() {
        Expr lhs = not_expr();
        while (is_kw("and")) {
            const std::size_t line = cur().line;
            ++pos_;
            Expr rhs = not_expr();
            lhs = make(LogicExpr{LogicKind::And, std::move(lhs), std::move(rhs)}, line);
        }
        return lhs;
    }

    Expr not_expr() {
        if (is_kw("not")) {
            const std::size_t line = cur().line;
            ++pos_;
            Expr operand = not_expr();
            return make(UnaryExpr{UnaryKind::Not, std::move(operand)}, line);
        }
        return comparison();
    }

    Expr comparison() {
        Expr lhs = arith();
        static const std::vector<std::pair<std::string, CmpKind>> kCmp{
            {"==", CmpKind::Eq}, {"!=", CmpKind::Ne}, {"<=", CmpKind::Le},
            {">=", CmpKind::Ge}, {"<", CmpKind::Lt},  {">", CmpKind::Gt}};
        for (const auto& [text, kind] : kCmp) {
            if (is_op(text)) {
                const std::size_t line = cur().line;
                ++pos_;
                Expr rhs = arith();
                for (const auto& [t2, k2] : kCmp) {
                    if (is_op(t2)) fail("end of comparison (chained comparisons need parentheses)");
                }
                return make(CompareExpr{kind, std::move(lhs), std::move(rhs)}, line);
            }
        }
        return lhs;
    }

    Expr arith() {
        Expr lhs = term();
        while (is_op("+") || is_op("-")) {
            const std::size_t line = cur().line;
            const BinOpKind op = cur().text == "+" ? BinOpKind::Add : BinOpKind::Sub;
            ++pos_;
            Expr rhs = term();
            lhs = make(BinaryExpr{op, std::move(lhs), std::move(rhs)}, line);
        }
        return lhs;
    }

    Expr term() {
        Expr lhs = factor();
        while (is_op("*") || is_op("/") || is_op("//") || is_op("%")) {
            const std::size_t line = cur().line;
            BinOpKind op = BinOpKind::Mul;
            if (cur().text == "/") op = BinOpKind::Div;
            if (cur().text == "//") op = BinOpKind::FloorDiv;
            if (cur().text == "%") op = BinOpKind::Mod;
            ++pos_;
            Expr rhs = factor();
            lhs = make(BinaryExpr{op, std::move(lhs), std::move(rhs)}, line);
        }
        return lhs;
    }

    Expr factor() {
        if (is_op("-") || is_op("+")) {
            const std::size_t line = cur().line;
            const UnaryKind op = cur().text == "-" ? UnaryKind::Neg : UnaryKind::Plus;
            ++pos_;
            Expr operand = factor();
            return make(UnaryExpr{op, std::move(operand)}, line);
        }
        return power();
    }

    Expr power() {
        Expr base = postfix();
        if (is_op("**")) {
            const std::size_t line = cur().line;
            ++pos_;
            Expr exponent = factor();
            return make(BinaryExpr{BinOpKind::Pow, std::move(base), std::move(exponent)}, line);
        }
        return base;
    }

    Expr postfix() {
        Expr e = atom();
        while (true) {
            const std::size_t line = cur().line;
            if (accept_op("(")) {
                CallExpr call{std::move(e), {}, {}};
                if (!accept_op(")")) {
                    do {
                        if (is_op(")")) break;
                        if (cur().kind == Tok::Name && next_tok().kind == Tok::Op && next_tok().text == "=") {
                            std::string name = expect_name();
                            ++pos_;
                            call.kwargs.push_back({name, expression()});
                        } else {
                            if (!call.kwargs.empty()) fail("keyword argument");
                            call.args.push_back(expression());
                        }
                    } while (accept_op(","));
                    expect_op(")");
                }
                e = make(std::move(call), line);
            } else if (accept_op("[")) {
                Expr index = expression();
                expect_op("]");
                e = make(SubscriptExpr{std::move(e), std::move(index)}, line);
            } else if (accept_op(".")) {
                std::string name = expect_name();
                e = make(AttributeExpr{std::move(e), name}, line);
            } else {
                return e;
            }
        }
    }

    Expr atom() {
        const Token& t = cur();
        const std::size_t line = t.line;
        switch (t.kind) {
            case Tok::Number:
            case Tok::String: {
                Value v = t.literal;
                ++pos_;
                return make(LiteralExpr{std::move(v)}, line);
            }
            case Tok::Name: return make(NameExpr{toks_[pos_++].text}, line);
            case Tok::Keyword:
                if (accept_kw("True")) return make(LiteralExpr{Value::boolean(true)}, line);
                if (accept_kw("False")) return make(LiteralExpr{Value::boolean(false)}, line);
                if (accept_kw("None")) return make(LiteralExpr{Value::empty()}, line);
                if (is_kw("lambda")) {
                    throw ScriptSyntaxError(t.line, t.column, "lambda expressions are not supported");
                }
                fail("expression");
            case Tok::Op:
                if (accept_op("(")) {
                    Expr inner = expression();
                    expect_op(")");
                    return inner;
                }
                if (accept_op("[")) {
                    ListExpr list;
                    if (!accept_op("]")) {
                        do {
                            if (is_op("]")) break;
                            list.items.push_back(expression());
                        } while (accept_op(","));
                        expect_op("]");
                    }
                    return make(std::move(list), line);
                }
                if (accept_op("{")) {
                    DictExpr dict;
                    if (!accept_op("}")) {
                        do {
                            if (is_op("}")) break;
                            Expr key = expression();
                            expect_op(":");
                            Expr value = expression();
                            dict.entries.emplace_back(std::move(key), std::move(value));
                        } while (accept_op(","));
                        expect_op("}");
                    }
                    return make(std::move(dict), line);
                }
                fail("expression");
            default: fail("expression");
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<Stmt> parse_program(std::string_view source) { return Parser(Lexer(source).run()).program(); }

std::optional<Diagnostic> check_syntax(std::string_view source) {
    try {
        parse_program(source);
        return std::nullopt;
    } catch (const ScriptSyntaxError& e) {
        return Diagnostic{e.line(), e.column(), e.detail()};
    }
}

}  // namespace tabula::script
