#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tabula {

struct Empty {
    friend bool operator==(Empty, Empty) = default;
};

/// ISO calendar date. Only equality and ordering are supported in computation.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend auto operator<=>(const Date&, const Date&) = default;

    /// Strict yyyy-mm-dd parse with calendar validation.
    static std::optional<Date> parse_iso(std::string_view text);
    std::string iso() const;
};

enum class ErrorKind { Div0, Name, Value, Cycle, Ref, Type };

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> parse_error_kind(std::string_view text);

struct ErrorValue {
    ErrorKind kind = ErrorKind::Value;
    std::string message;

    friend bool operator==(const ErrorValue&, const ErrorValue&) = default;
};

class Value;

struct ListValue {
    std::vector<Value> items;

    friend bool operator==(const ListValue&, const ListValue&);
};

/// A grid or runtime value. Number and Integer are distinct: Integer only arises from
/// integral literals, INTEGER enforcement, or Integer-preserving arithmetic.
class Value {
public:
    using Storage = std::variant<Empty, double, std::int64_t, std::string, bool, Date, ListValue, ErrorValue>;

    Value() = default;

    static Value empty() { return Value(Storage(Empty{})); }
    static Value number(double v) { return Value(Storage(v)); }
    static Value integer(std::int64_t v) { return Value(Storage(v)); }
    static Value text(std::string v) { return Value(Storage(std::move(v))); }
    static Value boolean(bool v) { return Value(Storage(v)); }
    static Value date(Date d) { return Value(Storage(d)); }
    static Value list(std::vector<Value> items) { return Value(Storage(ListValue{std::move(items)})); }
    static Value error(ErrorKind kind, std::string message = {}) {
        return Value(Storage(ErrorValue{kind, std::move(message)}));
    }

    bool is_empty() const { return std::holds_alternative<Empty>(data_); }
    bool is_number() const { return std::holds_alternative<double>(data_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(data_); }
    bool is_numeric() const { return is_number() || is_integer(); }
    bool is_text() const { return std::holds_alternative<std::string>(data_); }
    bool is_boolean() const { return std::holds_alternative<bool>(data_); }
    bool is_date() const { return std::holds_alternative<Date>(data_); }
    bool is_list() const { return std::holds_alternative<ListValue>(data_); }
    bool is_error() const { return std::holds_alternative<ErrorValue>(data_); }

    double as_number() const { return std::get<double>(data_); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(data_); }
    /// Numeric value of a Number or Integer as a double.
    double as_double() const { return is_integer() ? static_cast<double>(as_integer()) : as_number(); }
    const std::string& as_text() const { return std::get<std::string>(data_); }
    bool as_boolean() const { return std::get<bool>(data_); }
    const Date& as_date() const { return std::get<Date>(data_); }
    const ListValue& as_list() const { return std::get<ListValue>(data_); }
    const ErrorValue& as_error() const { return std::get<ErrorValue>(data_); }

    const Storage& storage() const { return data_; }

    std::string_view type_name() const;

    friend bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }

private:
    explicit Value(Storage s) : data_(std::move(s)) {}
    Storage data_;
};

inline bool operator==(const ListValue& a, const ListValue& b) { return a.items == b.items; }

/// Shortest round-trip decimal; integral values print without a decimal point.
std::string format_number(double v);

/// User-facing rendering (grid cells, print). Text renders raw; Empty renders "".
std::string display(const Value& v);

/// Strict decimal number parse (no inf/nan, no hex, no surrounding whitespace).
std::optional<double> parse_number(std::string_view text);

/// Literal inference for raw cell input: number, then boolean, then ISO date, else text.
Value infer_literal(std::string_view raw);

}  // namespace tabula
