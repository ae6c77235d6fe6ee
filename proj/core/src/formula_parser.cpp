#include <algorithm>
#include <array>
#include <cctype>

#include "tabula/errors.hpp"
#include "tabula/formula.hpp"

namespace tabula::formula {

namespace {

constexpr std::array<std::string_view, 11> kBuiltins{"SUM", "AVERAGE", "MIN", "MAX", "COUNT", "COUNTIF",
                                                     "IF", "ABS", "ROUND", "LEN", "CONCAT"};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        if (src_.empty() || src_[0] != '=') throw LexError(1, "formula must start with \"=\"");
        pos_ = 1;
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= src_.size()) {
                out.push_back({TokenKind::End, "", pos_ + 1});
                return out;
            }
            out.push_back(next());
        }
    }

private:
    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    Token simple(TokenKind k, std::size_t len) {
        Token t{k, std::string(src_.substr(pos_, len)), pos_ + 1};
        pos_ += len;
        return t;
    }

    Token next() {
        const char c = peek();
        switch (c) {
            case '(': return simple(TokenKind::LParen, 1);
            case ')': return simple(TokenKind::RParen, 1);
            case '[': return simple(TokenKind::LBracket, 1);
            case ']': return simple(TokenKind::RBracket, 1);
            case ',': return simple(TokenKind::Comma, 1);
            case ':': return simple(TokenKind::Colon, 1);
            case '+': return simple(TokenKind::Plus, 1);
            case '-': return simple(TokenKind::Minus, 1);
            case '*': return simple(TokenKind::Star, 1);
            case '/': return simple(TokenKind::Slash, 1);
            case '^': return simple(TokenKind::Caret, 1);
            case '&': return simple(TokenKind::Amp, 1);
            case '%': return simple(TokenKind::Percent, 1);
            case '=': return simple(TokenKind::Eq, 1);
            case '<':
                if (peek(1) == '=') return simple(TokenKind::Le, 2);
                if (peek(1) == '>') return simple(TokenKind::Ne, 2);
                return simple(TokenKind::Lt, 1);
            case '>':
                if (peek(1) == '=') return simple(TokenKind::Ge, 2);
                return simple(TokenKind::Gt, 1);
            case '"': return string_literal();
            case '\'': return quoted_sheet();
            default: break;
        }
        if (is_digit(c) || (c == '.' && is_digit(peek(1)))) return number();
        if (is_ident_start(c) || c == '$') return word();
        throw LexError(pos_ + 1, std::string("unexpected character '") + c + "'");
    }

    Token string_literal() {
        const std::size_t start = pos_;
        ++pos_;
        std::string value;
        while (true) {
            if (pos_ >= src_.size()) throw LexError(start + 1, "unterminated string literal");
            char c = src_[pos_++];
            if (c == '"') {
                if (peek() == '"') {
                    value += '"';
                    ++pos_;
                    continue;
                }
                break;
            }
            value += c;
        }
        return {TokenKind::Text, value, start + 1};
    }

    Token quoted_sheet() {
        const std::size_t start = pos_;
        ++pos_;
        std::string name;
        while (true) {
            if (pos_ >= src_.size()) throw LexError(start + 1, "unterminated quoted sheet name");
            char c = src_[pos_++];
            if (c == '\'') {
                if (peek() == '\'') {
                    name += '\'';
                    ++pos_;
                    continue;
                }
                break;
            }
            name += c;
        }
        if (peek() != '!') throw LexError(pos_ + 1, "expected '!' after quoted sheet name");
        ++pos_;
        return {TokenKind::Sheet, name, start + 1};
    }

    Token number() {
        const std::size_t start = pos_;
        while (is_digit(peek())) ++pos_;
        if (peek() == '.') {
            ++pos_;
            while (is_digit(peek())) ++pos_;
        }
        if ((peek() == 'e' || peek() == 'E') &&
            (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
            pos_ += 2;
            while (is_digit(peek())) ++pos_;
        }
        return {TokenKind::Number, std::string(src_.substr(start, pos_ - start)), start + 1};
    }

    Token word() {
        const std::size_t start = pos_;
        std::string raw;
        while (pos_ < src_.size() && (is_ident_char(src_[pos_]) || src_[pos_] == '$')) raw += src_[pos_++];
        std::string stripped;
        std::copy_if(raw.begin(), raw.end(), std::back_inserter(stripped), [](char c) { return c != '$'; });
        if (peek() == '!' && raw.find('$') == std::string::npos) {
            ++pos_;
            return {TokenKind::Sheet, raw, start + 1};
        }
        std::size_t look = pos_;
        while (look < src_.size() && (src_[look] == ' ' || src_[look] == '\t')) ++look;
        const bool call = look < src_.size() && src_[look] == '(';
        if (!call) {
            if (auto addr = CellAddress::parse(raw)) return {TokenKind::Cell, addr->a1(), start + 1};
        }
        if (raw.find('$') != std::string::npos) {
            // "$A" alone is a column marker for "$A:$A".
            if (parse_column_letters(stripped) && raw.front() == '$' &&
                raw.find('$', 1) == std::string::npos) {
                return {TokenKind::Ident, stripped, start + 1};
            }
            throw LexError(start + 1, "misplaced '$' in \"" + raw + "\"");
        }
        const std::string up = upper(raw);
        if (up == "TRUE" || up == "FALSE") return {TokenKind::Bool, up, start + 1};
        if (is_builtin_function(up)) return {TokenKind::Ident, up, start + 1};
        return {TokenKind::Ident, raw, start + 1};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

std::string describe(const Token& t) {
    if (t.kind == TokenKind::End) return "end of formula";
    if (t.kind == TokenKind::Text) return "\"" + t.text + "\"";
    return "\"" + t.text + "\"";
}

bool is_lambda_keyword(std::string_view text) {
    static constexpr std::string_view kWord = "lambda";
    if (text.size() != kWord.size()) return false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) != kWord[i]) return false;
    }
    return true;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Expr run() {
        Expr e = comparison();
        if (cur().kind != TokenKind::End) fail("operator or end of formula");
        return e;
    }

private:
    const Token& cur() const { return tokens_[pos_]; }
    const Token& ahead(std::size_t n) const { return tokens_[std::min(pos_ + n, tokens_.size() - 1)]; }
    Token take() { return tokens_[pos_++]; }
    bool accept(TokenKind k) {
        if (cur().kind != k) return false;
        ++pos_;
        return true;
    }
    void expect(TokenKind k, const std::string& what) {
        if (!accept(k)) fail(what);
    }
    [[noreturn]] void fail(const std::string& expected) const {
        throw ParseError(cur().column, expected, describe(cur()));
    }

    static Expr make(Expr::Node node, std::size_t column) { return Expr{std::move(node), column}; }

    Expr comparison() {
        Expr lhs = additive();
        while (true) {
            std::optional<BinaryOp> op;
            switch (cur().kind) {
                case TokenKind::Eq: op = BinaryOp::Eq; break;
                case TokenKind::Ne: op = BinaryOp::Ne; break;
                case TokenKind::Lt: op = BinaryOp::Lt; break;
                case TokenKind::Le: op = BinaryOp::Le; break;
                case TokenKind::Gt: op = BinaryOp::Gt; break;
                case TokenKind::Ge: op = BinaryOp::Ge; break;
                default: break;
            }
            if (!op) return lhs;
            const std::size_t col = take().column;
            Expr rhs = additive();
            lhs = make(BinOp{*op, std::move(lhs), std::move(rhs)}, col);
        }
    }

    Expr additive() {
        Expr lhs = multiplicative();
        while (true) {
            std::optional<BinaryOp> op;
            if (cur().kind == TokenKind::Plus) op = BinaryOp::Add;
            if (cur().kind == TokenKind::Minus) op = BinaryOp::Sub;
            if (cur().kind == TokenKind::Amp) op = BinaryOp::Concat;
            if (!op) return lhs;
            const std::size_t col = take().column;
            Expr rhs = multiplicative();
            lhs = make(BinOp{*op, std::move(lhs), std::move(rhs)}, col);
        }
    }

    Expr multiplicative() {
        Expr lhs = unary();
        while (true) {
            std::optional<BinaryOp> op;
            if (cur().kind == TokenKind::Star) op = BinaryOp::Mul;
            if (cur().kind == TokenKind::Slash) op = BinaryOp::Div;
            if (!op) return lhs;
            const std::size_t col = take().column;
            Expr rhs = unary();
            lhs = make(BinOp{*op, std::move(lhs), std::move(rhs)}, col);
        }
    }

    Expr unary() {
        if (cur().kind == TokenKind::Minus || cur().kind == TokenKind::Plus) {
            const Token t = take();
            Expr operand = unary();
            return make(UnaryOp{t.kind == TokenKind::Minus ? UnaryOpKind::Neg : UnaryOpKind::Plus,
                                std::move(operand)},
                        t.column);
        }
        return power();
    }

    Expr power() {
        Expr base = postfix();
        if (cur().kind == TokenKind::Caret) {
            const std::size_t col = take().column;
            Expr exponent = unary();
            return make(BinOp{BinaryOp::Pow, std::move(base), std::move(exponent)}, col);
        }
        return base;
    }

    Expr postfix() {
        Expr e = primary();
        while (cur().kind == TokenKind::Percent) {
            const std::size_t col = take().column;
            e = make(UnaryOp{UnaryOpKind::Percent, std::move(e)}, col);
        }
        return e;
    }

    Expr reference(std::optional<std::string> sheet, std::size_t col) {
        if (cur().kind == TokenKind::Cell) {
            CellAddress from = *CellAddress::parse(take().text);
            if (accept(TokenKind::Colon)) {
                if (cur().kind != TokenKind::Cell) fail("cell reference after ':'");
                CellAddress to = *CellAddress::parse(take().text);
                CellRange r = CellRange::spanning(from, to);
                return make(RangeRef{std::move(sheet), r.from, r.to}, col);
            }
            return make(CellRef{std::move(sheet), from}, col);
        }
        if (cur().kind == TokenKind::Ident && ahead(1).kind == TokenKind::Colon &&
            ahead(2).kind == TokenKind::Ident) {
            auto c1 = parse_column_letters(cur().text);
            auto c2 = parse_column_letters(ahead(2).text);
            if (c1 && c2) {
                if (*c1 != *c2) fail("single-column reference");
                pos_ += 3;
                return make(ColumnRef{std::move(sheet), *c1}, col);
            }
        }
        fail("cell, range or column reference");
    }

    Expr primary() {
        const Token& t = cur();
        switch (t.kind) {
            case TokenKind::Number: {
                Token n = take();
                return make(NumberLit{n.text}, n.column);
            }
            case TokenKind::Text: {
                Token s = take();
                return make(TextLit{s.text}, s.column);
            }
            case TokenKind::Bool: {
                Token b = take();
                return make(BoolLit{b.text == "TRUE"}, b.column);
            }
            case TokenKind::Cell: return reference(std::nullopt, t.column);
            case TokenKind::Sheet: {
                Token s = take();
                return reference(s.text, s.column);
            }
            case TokenKind::LParen: {
                const std::size_t col = take().column;
                Expr inner = comparison();
                expect(TokenKind::RParen, "\")\"");
                return make(Paren{std::move(inner)}, col);
            }
            case TokenKind::LBracket: {
                const std::size_t col = take().column;
                ListLit list;
                if (!accept(TokenKind::RBracket)) {
                    do {
                        list.items.push_back(comparison());
                    } while (accept(TokenKind::Comma));
                    expect(TokenKind::RBracket, "\",\" or \"]\"");
                }
                return make(std::move(list), col);
            }
            case TokenKind::Ident: {
                if (is_lambda_keyword(t.text)) {
                    throw ParseError(t.column, "expression (lambda expressions are not supported in formulae)",
                                     "\"lambda\"");
                }
                if (ahead(1).kind == TokenKind::Colon) return reference(std::nullopt, t.column);
                Token name = take();
                if (accept(TokenKind::LParen)) {
                    FuncCall call{name.text, {}};
                    if (!accept(TokenKind::RParen)) {
                        do {
                            call.args.push_back(comparison());
                        } while (accept(TokenKind::Comma));
                        expect(TokenKind::RParen, "\",\" or \")\"");
                    }
                    return make(std::move(call), name.column);
                }
                return make(NameRef{name.text}, name.column);
            }
            default: fail("expression");
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(TokenKind k) {
    switch (k) {
        case TokenKind::Number: return "NUMBER";
        case TokenKind::Text: return "TEXT";
        case TokenKind::Bool: return "BOOL";
        case TokenKind::Cell: return "CELL";
        case TokenKind::Ident: return "IDENT";
        case TokenKind::Sheet: return "SHEET";
        case TokenKind::LParen: return "LPAREN";
        case TokenKind::RParen: return "RPAREN";
        case TokenKind::LBracket: return "LBRACKET";
        case TokenKind::RBracket: return "RBRACKET";
        case TokenKind::Comma: return "COMMA";
        case TokenKind::Colon: return "COLON";
        case TokenKind::Plus: return "PLUS";
        case TokenKind::Minus: return "MINUS";
        case TokenKind::Star: return "STAR";
        case TokenKind::Slash: return "SLASH";
        case TokenKind::Caret: return "CARET";
        case TokenKind::Amp: return "AMP";
        case TokenKind::Percent: return "PERCENT";
        case TokenKind::Eq: return "EQ";
        case TokenKind::Ne: return "NE";
        case TokenKind::Lt: return "LT";
        case TokenKind::Le: return "LE";
        case TokenKind::Gt: return "GT";
        case TokenKind::Ge: return "GE";
        case TokenKind::End: return "END";
    }
    return "END";
}

std::string_view to_string(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Pow: return "^";
        case BinaryOp::Concat: return "&";
        case BinaryOp::Eq: return "=";
        case BinaryOp::Ne: return "<>";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
    }
    return "+";
}

bool is_builtin_function(std::string_view upper_name) {
    return std::find(kBuiltins.begin(), kBuiltins.end(), upper_name) != kBuiltins.end();
}

std::vector<Token> tokenize(std::string_view src) { return Lexer(src).run(); }

Expr parse_formula(std::string_view src) { return Parser(tokenize(src)).run(); }

}  // namespace tabula::formula
