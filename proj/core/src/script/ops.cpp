#include "script/ops.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>

namespace tabula::script {

namespace {

/// Integer or Number operand after arithmetic coercion (Empty → 0, Boolean → 0/1).
struct Numeric {
    bool is_int;
    std::int64_t i;
    double d;

    double as_double() const { return is_int ? static_cast<double>(i) : d; }
};

std::optional<Numeric> arith_operand(const Value& v) {
    if (v.is_integer()) return Numeric{true, v.as_integer(), 0};
    if (v.is_number()) return Numeric{false, 0, v.as_number()};
    if (v.is_empty()) return Numeric{true, 0, 0};
    if (v.is_boolean()) return Numeric{true, v.as_boolean() ? 1 : 0, 0};
    return std::nullopt;
}

Value finite_or_error(double d) {
    if (!std::isfinite(d)) return Value::error(ErrorKind::Value, "numeric result out of range");
    return Value::number(d);
}

Value value_error(const char* op, const Value& a, const Value& b) {
    return Value::error(ErrorKind::Value, std::string("unsupported operand types for ") + op + ": " +
                                              std::string(a.type_name()) + " and " + std::string(b.type_name()));
}

std::optional<std::int64_t> int_pow(std::int64_t base, std::int64_t exp) {
    std::int64_t result = 1;
    while (exp > 0) {
        if (exp & 1) {
            if (__builtin_mul_overflow(result, base, &result)) return std::nullopt;
        }
        exp >>= 1;
        if (exp > 0 && __builtin_mul_overflow(base, base, &base)) return std::nullopt;
    }
    return result;
}

const Value* first_error(const std::vector<Value>& values) {
    for (const auto& v : values) {
        if (v.is_error()) return &v;
    }
    return nullptr;
}

}  // namespace

void type_fault(const std::string& message) { throw Fault("TypeError", ErrorKind::Type, message); }

void arity_fault(const std::string& function, const std::string& expected, std::size_t got) {
    throw Fault("ArityError", ErrorKind::Value,
                function + "() takes " + expected + " argument(s), " + std::to_string(got) + " given");
}

Value binary_op(BinOpKind op, const Value& lhs, const Value& rhs) {
    if (lhs.is_error()) return lhs;
    if (rhs.is_error()) return rhs;
    static constexpr std::array<const char*, 7> kNames{"+", "-", "*", "/", "//", "%", "**"};
    const char* name = kNames[static_cast<std::size_t>(op)];
    auto a = arith_operand(lhs);
    auto b = arith_operand(rhs);
    if (!a || !b) return value_error(name, lhs, rhs);
    const bool ints = a->is_int && b->is_int;
    switch (op) {
        case BinOpKind::Add:
        case BinOpKind::Sub:
        case BinOpKind::Mul: {
            if (ints) {
                std::int64_t r = 0;
                bool overflow = op == BinOpKind::Add   ? __builtin_add_overflow(a->i, b->i, &r)
                                : op == BinOpKind::Sub ? __builtin_sub_overflow(a->i, b->i, &r)
                                                       : __builtin_mul_overflow(a->i, b->i, &r);
                if (!overflow) return Value::integer(r);
            }
            const double x = a->as_double(), y = b->as_double();
            return finite_or_error(op == BinOpKind::Add ? x + y : op == BinOpKind::Sub ? x - y : x * y);
        }
        case BinOpKind::Div: {
            if (b->as_double() == 0.0) return Value::error(ErrorKind::Div0, "division by zero");
            return finite_or_error(a->as_double() / b->as_double());
        }
        case BinOpKind::FloorDiv:
        case BinOpKind::Mod: {
            if (b->as_double() == 0.0) return Value::error(ErrorKind::Div0, "division by zero");
            if (ints && !(a->i == std::numeric_limits<std::int64_t>::min() && b->i == -1)) {
                std::int64_t q = a->i / b->i, r = a->i % b->i;
                if (r != 0 && ((r < 0) != (b->i < 0))) {
                    --q;
                    r += b->i;
                }
                return Value::integer(op == BinOpKind::FloorDiv ? q : r);
            }
            const double x = a->as_double(), y = b->as_double();
            if (op == BinOpKind::FloorDiv) return finite_or_error(std::floor(x / y));
            double r = std::fmod(x, y);
            if (r != 0 && ((r < 0) != (y < 0))) r += y;
            return finite_or_error(r);
        }
        case BinOpKind::Pow: {
            if (a->as_double() == 0.0 && b->as_double() < 0) {
                return Value::error(ErrorKind::Div0, "zero raised to a negative power");
            }
            if (ints && b->i >= 0) {
                if (auto r = int_pow(a->i, b->i)) return Value::integer(*r);
            }
            return finite_or_error(std::pow(a->as_double(), b->as_double()));
        }
    }
    return value_error(name, lhs, rhs);
}

namespace {

int sign(auto c) { return c < 0 ? -1 : c > 0 ? 1 : 0; }

}  // namespace

Value compare_op(CmpKind op, const Value& lhs, const Value& rhs) {
    if (lhs.is_error()) return lhs;
    if (rhs.is_error()) return rhs;
    // Empty takes the zero value of the other operand's type.
    auto fill = [](const Value& v, const Value& other) -> Value {
        if (!v.is_empty()) return v;
        if (other.is_numeric()) return Value::integer(0);
        if (other.is_text()) return Value::text("");
        if (other.is_boolean()) return Value::boolean(false);
        return v;
    };
    const Value a = fill(lhs, rhs);
    const Value b = fill(rhs, lhs);
    std::optional<int> order;
    if (a.is_empty() && b.is_empty()) {
        order = 0;
    } else if (a.is_numeric() && b.is_numeric()) {
        if (a.is_integer() && b.is_integer()) {
            order = a.as_integer() < b.as_integer() ? -1 : a.as_integer() > b.as_integer() ? 1 : 0;
        } else {
            const long double x = a.is_integer() ? static_cast<long double>(a.as_integer()) : a.as_number();
            const long double y = b.is_integer() ? static_cast<long double>(b.as_integer()) : b.as_number();
            order = x < y ? -1 : x > y ? 1 : 0;
        }
    } else if (a.is_text() && b.is_text()) {
        order = sign(a.as_text().compare(b.as_text()));
    } else if (a.is_boolean() && b.is_boolean()) {
        order = static_cast<int>(a.as_boolean()) - static_cast<int>(b.as_boolean());
    } else if (a.is_date() && b.is_date()) {
        order = a.as_date() < b.as_date() ? -1 : a.as_date() == b.as_date() ? 0 : 1;
    } else if (a.is_list() && b.is_list() && (op == CmpKind::Eq || op == CmpKind::Ne)) {
        return Value::boolean((a == b) == (op == CmpKind::Eq));
    }
    if (!order) {
        return Value::error(ErrorKind::Type, "cannot compare " + std::string(lhs.type_name()) + " with " +
                                                 std::string(rhs.type_name()));
    }
    switch (op) {
        case CmpKind::Eq: return Value::boolean(*order == 0);
        case CmpKind::Ne: return Value::boolean(*order != 0);
        case CmpKind::Lt: return Value::boolean(*order < 0);
        case CmpKind::Le: return Value::boolean(*order <= 0);
        case CmpKind::Gt: return Value::boolean(*order > 0);
        case CmpKind::Ge: return Value::boolean(*order >= 0);
    }
    return Value::boolean(false);
}

Value negate(const Value& v) {
    if (v.is_error()) return v;
    auto n = arith_operand(v);
    if (!n) return Value::error(ErrorKind::Value, "bad operand type for unary -: " + std::string(v.type_name()));
    if (n->is_int) {
        if (n->i == std::numeric_limits<std::int64_t>::min()) return Value::number(-static_cast<double>(n->i));
        return Value::integer(-n->i);
    }
    return Value::number(-n->d);
}

Value unary_plus(const Value& v) {
    if (v.is_error()) return v;
    auto n = arith_operand(v);
    if (!n) return Value::error(ErrorKind::Value, "bad operand type for unary +: " + std::string(v.type_name()));
    return n->is_int ? Value::integer(n->i) : Value::number(n->d);
}

bool truthy(const Value& v) {
    struct Visitor {
        bool operator()(Empty) const { return false; }
        bool operator()(double d) const { return d != 0.0; }
        bool operator()(std::int64_t i) const { return i != 0; }
        bool operator()(const std::string& s) const { return !s.empty(); }
        bool operator()(bool b) const { return b; }
        bool operator()(const Date&) const { return true; }
        bool operator()(const ListValue& l) const { return !l.items.empty(); }
        bool operator()(const ErrorValue& e) const {
            throw Fault("ValueError", e.kind, "error value used as a condition: " + display(Value::error(e.kind)));
        }
    };
    return std::visit(Visitor{}, v.storage());
}

std::vector<Value> flatten(const std::vector<Value>& args) {
    std::vector<Value> out;
    auto walk = [&](const Value& v, auto& self) -> void {
        if (v.is_list()) {
            for (const auto& item : v.as_list().items) self(item, self);
        } else {
            out.push_back(v);
        }
    };
    for (const auto& a : args) walk(a, walk);
    return out;
}

Value fn_sum(const std::vector<Value>& args) {
    const auto items = flatten(args);
    if (const Value* e = first_error(items)) return *e;
    bool is_int = true;
    std::int64_t isum = 0;
    double dsum = 0;
    for (const auto& v : items) {
        if (!v.is_numeric()) continue;
        if (is_int && v.is_integer() && !__builtin_add_overflow(isum, v.as_integer(), &isum)) continue;
        if (is_int) {
            dsum = static_cast<double>(isum);
            is_int = false;
        }
        dsum += v.as_double();
    }
    return is_int ? Value::integer(isum) : finite_or_error(dsum);
}

Value fn_average(const std::vector<Value>& args) {
    const auto items = flatten(args);
    if (const Value* e = first_error(items)) return *e;
    double total = 0;
    std::size_t count = 0;
    for (const auto& v : items) {
        if (!v.is_numeric()) continue;
        total += v.as_double();
        ++count;
    }
    if (count == 0) return Value::error(ErrorKind::Div0, "AVERAGE of no numbers");
    return finite_or_error(total / static_cast<double>(count));
}

namespace {

Value extreme(const std::vector<Value>& args, bool want_max) {
    const auto items = flatten(args);
    if (const Value* e = first_error(items)) return *e;
    const Value* best = nullptr;
    for (const auto& v : items) {
        if (!v.is_numeric()) continue;
        if (!best) {
            best = &v;
            continue;
        }
        const Value better = compare_op(want_max ? CmpKind::Gt : CmpKind::Lt, v, *best);
        if (better.as_boolean()) best = &v;
    }
    return best ? *best : Value::integer(0);
}

struct Criterion {
    CmpKind op = CmpKind::Eq;
    Value literal;
};

Criterion parse_criterion(const Value& c) {
    if (!c.is_text()) return {CmpKind::Eq, c.is_empty() ? Value::text("") : c};
    std::string_view text = c.as_text();
    static const std::array<std::pair<std::string_view, CmpKind>, 6> kPrefixes{{{">=", CmpKind::Ge},
                                                                                 {"<=", CmpKind::Le},
                                                                                 {"<>", CmpKind::Ne},
                                                                                 {">", CmpKind::Gt},
                                                                                 {"<", CmpKind::Lt},
                                                                                 {"=", CmpKind::Eq}}};
    Criterion out;
    for (const auto& [prefix, op] : kPrefixes) {
        if (text.substr(0, prefix.size()) == prefix) {
            out.op = op;
            text.remove_prefix(prefix.size());
            break;
        }
    }
    if (auto n = parse_number(text)) {
        out.literal = Value::number(*n);
    } else if (text == "TRUE" || text == "FALSE") {
        out.literal = Value::boolean(text == "TRUE");
    } else {
        out.literal = Value::text(std::string(text));
    }
    return out;
}

bool matches(const Criterion& c, const Value& v) {
    const Value& lit = c.literal;
    const bool empty_text = lit.is_text() && lit.as_text().empty();
    bool comparable = (lit.is_numeric() && v.is_numeric()) || (lit.is_boolean() && v.is_boolean()) ||
                      (lit.is_text() && v.is_text()) || (empty_text && v.is_empty());
    if (empty_text && c.op != CmpKind::Eq && c.op != CmpKind::Ne) comparable = false;
    if (!comparable) return c.op == CmpKind::Ne;
    const Value lhs = v.is_empty() ? Value::text("") : v;
    return compare_op(c.op, lhs, lit).as_boolean();
}

}  // namespace

Value fn_min(const std::vector<Value>& args) { return extreme(args, false); }
Value fn_max(const std::vector<Value>& args) { return extreme(args, true); }

Value fn_count(const std::vector<Value>& args) {
    const auto items = flatten(args);
    if (const Value* e = first_error(items)) return *e;
    std::int64_t n = 0;
    for (const auto& v : items) n += v.is_numeric() ? 1 : 0;
    return Value::integer(n);
}

Value fn_countif(const std::vector<Value>& args) {
    if (args.size() != 2) arity_fault("COUNTIF", "2", args.size());
    const auto items = flatten({args[0]});
    if (const Value* e = first_error(items)) return *e;
    if (args[1].is_error()) return args[1];
    if (args[1].is_list()) type_fault("COUNTIF criterion must be a single value");
    const Criterion c = parse_criterion(args[1]);
    std::int64_t n = 0;
    for (const auto& v : items) n += matches(c, v) ? 1 : 0;
    return Value::integer(n);
}

Value fn_if(const std::vector<Value>& args) {
    if (args.size() < 2 || args.size() > 3) arity_fault("IF", "2 or 3", args.size());
    if (const Value* e = first_error(args)) return *e;
    if (!args[0].is_boolean()) {
        type_fault("IF condition must be Boolean, got " + std::string(args[0].type_name()));
    }
    if (args[0].as_boolean()) return args[1];
    return args.size() == 3 ? args[2] : Value::boolean(false);
}

Value fn_abs(const std::vector<Value>& args) {
    if (args.size() != 1) arity_fault("ABS", "1", args.size());
    const Value& v = args[0];
    if (v.is_error()) return v;
    auto n = arith_operand(v);
    if (!n) return Value::error(ErrorKind::Value, "ABS of " + std::string(v.type_name()));
    if (n->is_int) {
        if (n->i == std::numeric_limits<std::int64_t>::min()) return Value::number(-static_cast<double>(n->i));
        return Value::integer(n->i < 0 ? -n->i : n->i);
    }
    return Value::number(std::fabs(n->d));
}

double round_half_away(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), std::fabs(x), std::chars_format::scientific);
    std::string_view s(buf.data(), static_cast<std::size_t>(end - buf.data()));
    const std::size_t e_pos = s.find('e');
    std::string mantissa_digits;
    for (char c : s.substr(0, e_pos)) {
        if (c != '.') mantissa_digits += c;
    }
    int exponent = 0;
    std::string_view exp_text = s.substr(e_pos + 1);
    if (!exp_text.empty() && exp_text.front() == '+') exp_text.remove_prefix(1);
    std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exponent);
    // Digits at places >= 10^-digits; the leading digit sits at 10^exponent.
    const long keep = static_cast<long>(exponent) + 1 + digits;
    if (keep >= static_cast<long>(mantissa_digits.size())) return x;
    if (keep < 0) return std::copysign(0.0, x);
    std::string kept = mantissa_digits.substr(0, static_cast<std::size_t>(keep));
    if (mantissa_digits[static_cast<std::size_t>(keep)] >= '5') {
        int i = static_cast<int>(kept.size()) - 1;
        while (i >= 0 && kept[static_cast<std::size_t>(i)] == '9') kept[static_cast<std::size_t>(i--)] = '0';
        if (i < 0) {
            kept.insert(kept.begin(), '1');
        } else {
            ++kept[static_cast<std::size_t>(i)];
        }
    }
    if (kept.empty()) return std::copysign(0.0, x);
    const std::string text = kept + "e" + std::to_string(-digits);
    double out = 0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return std::copysign(out, x);
}

Value fn_round(const std::vector<Value>& args) {
    if (args.empty() || args.size() > 2) arity_fault("ROUND", "1 or 2", args.size());
    if (const Value* e = first_error(args)) return *e;
    auto x = arith_operand(args[0]);
    auto n = args.size() == 2 ? arith_operand(args[1]) : Numeric{true, 0, 0};
    if (!x || !n) return Value::error(ErrorKind::Value, "ROUND needs numeric arguments");
    const double places = n->as_double();
    if (places != std::trunc(places) || std::fabs(places) > 400) {
        return Value::error(ErrorKind::Value, "ROUND digits must be an integer");
    }
    const int digits = static_cast<int>(places);
    if (x->is_int) {
        if (digits >= 0) return Value::integer(x->i);
        const double r = round_half_away(static_cast<double>(x->i), digits);
        if (std::fabs(r) < 9.2e18) return Value::integer(static_cast<std::int64_t>(r));
        return finite_or_error(r);
    }
    return finite_or_error(round_half_away(x->d, digits));
}

Value fn_len(const std::vector<Value>& args) {
    if (args.size() != 1) arity_fault("LEN", "1", args.size());
    const Value& v = args[0];
    if (v.is_error()) return v;
    if (v.is_list()) return Value::error(ErrorKind::Value, "LEN of a list");
    const std::string text = display(v);
    std::int64_t n = 0;
    for (unsigned char c : text) n += (c & 0xC0) != 0x80 ? 1 : 0;
    return Value::integer(n);
}

Value fn_concat(const std::vector<Value>& args) {
    const auto items = flatten(args);
    if (const Value* e = first_error(items)) return *e;
    std::string out;
    for (const auto& v : items) out += display(v);
    return Value::text(std::move(out));
}

}  // namespace tabula::script
