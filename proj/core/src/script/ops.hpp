#pragma once

// Value-level semantics shared by every GridScript operator and builtin.
//
// Value errors (division by zero, arithmetic on text, mixed-type comparison) come back as
// ErrorValue results. Structural misuse (wrong arity, non-Boolean IF condition) throws Fault,
// which the interpreter turns into a runtime error with a stack trace.

#include <stdexcept>
#include <string>
#include <vector>

#include "script/ast.hpp"
#include "tabula/value.hpp"

namespace tabula::script {

class Fault : public std::runtime_error {
public:
    Fault(std::string category, ErrorKind kind, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)), kind_(kind) {}

    const std::string& category() const noexcept { return category_; }
    ErrorKind kind() const noexcept { return kind_; }

private:
    std::string category_;
    ErrorKind kind_;
};

[[noreturn]] void type_fault(const std::string& message);
[[noreturn]] void arity_fault(const std::string& function, const std::string& expected, std::size_t got);

Value binary_op(BinOpKind op, const Value& lhs, const Value& rhs);
Value compare_op(CmpKind op, const Value& lhs, const Value& rhs);
Value negate(const Value& v);
Value unary_plus(const Value& v);

/// Condition truthiness; error values re-raise as a Fault of their own kind.
bool truthy(const Value& v);

/// Flattens nested lists into scalars in order.
std::vector<Value> flatten(const std::vector<Value>& args);

Value fn_sum(const std::vector<Value>& args);
Value fn_average(const std::vector<Value>& args);
Value fn_min(const std::vector<Value>& args);
Value fn_max(const std::vector<Value>& args);
Value fn_count(const std::vector<Value>& args);
Value fn_countif(const std::vector<Value>& args);
Value fn_if(const std::vector<Value>& args);
Value fn_abs(const std::vector<Value>& args);
Value fn_round(const std::vector<Value>& args);
Value fn_len(const std::vector<Value>& args);
Value fn_concat(const std::vector<Value>& args);

/// Decimal half-away-from-zero rounding on the shortest round-trip representation.
double round_half_away(double x, int digits);

}  // namespace tabula::script
