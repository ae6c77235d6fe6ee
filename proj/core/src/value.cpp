#include "tabula/value.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <system_error>

namespace tabula {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[static_cast<std::size_t>(m - 1)];
}

bool all_digits(std::string_view s) {
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return !s.empty();
}

}  // namespace

std::optional<Date> Date::parse_iso(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return std::nullopt;
    Date d;
    std::from_chars(ys.data(), ys.data() + ys.size(), d.year);
    std::from_chars(ms.data(), ms.data() + ms.size(), d.month);
    std::from_chars(ds.data(), ds.data() + ds.size(), d.day);
    if (d.month < 1 || d.month > 12) return std::nullopt;
    if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
    return d;
}

std::string Date::iso() const {
    std::array<char, 16> buf{};
    std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02d", year, month, day);
    return buf.data();
}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Div0: return "DIV0";
        case ErrorKind::Name: return "NAME";
        case ErrorKind::Value: return "VALUE";
        case ErrorKind::Cycle: return "CYCLE";
        case ErrorKind::Ref: return "REF";
        case ErrorKind::Type: return "TYPE";
    }
    return "VALUE";
}

std::optional<ErrorKind> parse_error_kind(std::string_view text) {
    for (auto k : {ErrorKind::Div0, ErrorKind::Name, ErrorKind::Value, ErrorKind::Cycle, ErrorKind::Ref,
                   ErrorKind::Type}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

std::string_view Value::type_name() const {
    switch (data_.index()) {
        case 0: return "Empty";
        case 1: return "Number";
        case 2: return "Integer";
        case 3: return "Text";
        case 4: return "Boolean";
        case 5: return "Date";
        case 6: return "List";
        default: return "Error";
    }
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    std::array<char, 64> buf{};
    if (std::abs(v) < 1e16 && v == std::trunc(v)) {
        auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
        return std::string(buf.data(), end);
    }
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

std::string display(const Value& v) {
    struct Visitor {
        std::string operator()(Empty) const { return {}; }
        std::string operator()(double d) const { return format_number(d); }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
        std::string operator()(const Date& d) const { return d.iso(); }
        std::string operator()(const ListValue& l) const {
            std::string out = "[";
            for (std::size_t i = 0; i < l.items.size(); ++i) {
                if (i) out += ", ";
                const auto& item = l.items[i];
                out += item.is_text() ? "\"" + item.as_text() + "\"" : display(item);
            }
            return out + "]";
        }
        std::string operator()(const ErrorValue& e) const {
            return "Error(\"" + std::string(to_string(e.kind)) + "\")";
        }
    };
    return std::visit(Visitor{}, v.storage());
}

std::optional<double> parse_number(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::size_t i = 0;
    if (text[i] == '+' || text[i] == '-') ++i;
    bool digits = false;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        ++i;
        digits = true;
    }
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            ++i;
            digits = true;
        }
    }
    if (!digits) return std::nullopt;
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
        bool exp_digits = false;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            ++i;
            exp_digits = true;
        }
        if (!exp_digits) return std::nullopt;
    }
    if (i != text.size()) return std::nullopt;
    // from_chars rejects a leading '+'.
    std::string_view body = text[0] == '+' ? text.substr(1) : text;
    double out = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out);
    if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(out)) return std::nullopt;
    return out;
}

Value infer_literal(std::string_view raw) {
    if (auto n = parse_number(raw)) return Value::number(*n);
    auto upper = [&] {
        std::string u(raw);
        for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return u;
    }();
    if (upper == "TRUE") return Value::boolean(true);
    if (upper == "FALSE") return Value::boolean(false);
    if (auto d = Date::parse_iso(raw)) return Value::date(*d);
    return Value::text(std::string(raw));
}

}  // namespace tabula
