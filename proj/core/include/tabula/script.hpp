#pragma once

// GridScript: the small indentation-based language generated programs and user code are
// written in, and the sandboxed interpreter that runs them against a results grid.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabula/errors.hpp"
#include "tabula/grid.hpp"
#include "tabula/program.hpp"

namespace tabula::script {

/// Syntax error in GridScript source; line and column are 1-based within the section.
class ScriptSyntaxError : public Error {
public:
    ScriptSyntaxError(std::size_t line, std::size_t column, const std::string& message)
        : Error("SyntaxError", "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                   message),
          line_(line), column_(column), detail_(message) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string detail_;
};

struct Diagnostic {
    std::size_t line;
    std::size_t column;
    std::string message;
};

/// Parses without executing; returns the first syntax error, if any.
std::optional<Diagnostic> check_syntax(std::string_view source);

struct ResultCell {
    Value value;
    bool from_constant = false;  // assigned by the CONSTANTS section
    bool overridden = false;     // displaced by POST_FORMULAE code
    std::optional<Value> original;
    std::optional<EnforcedType> enforced_type;
    std::optional<FormatSpec> format;

    friend bool operator==(const ResultCell&, const ResultCell&) = default;
};

struct ResultSheet {
    std::string name;
    std::map<CellAddress, ResultCell> cells;
    std::map<int, FormatSpec> row_formats;
    std::map<int, FormatSpec> column_formats;

    /// Bounds over cells holding a non-Empty value.
    BoundsRect bounds() const;
    Value value_at(const CellAddress& a) const;
    std::optional<FormatSpec> format_at(const CellAddress& a) const;

    friend bool operator==(const ResultSheet&, const ResultSheet&) = default;
};

/// The separate copy of the grid populated while a program runs.
struct ResultsGrid {
    std::vector<ResultSheet> sheets;

    const ResultSheet* find(std::string_view name) const;
    ResultSheet* find(std::string_view name);
    Value value_at(std::string_view sheet, const CellAddress& a) const;

    friend bool operator==(const ResultsGrid&, const ResultsGrid&) = default;
};

struct StackFrame {
    SectionKind section;
    std::size_t line;  // 1-based within the section
    std::string function;

    friend bool operator==(const StackFrame&, const StackFrame&) = default;
};

struct RuntimeErrorRecord {
    std::string kind;  // e.g. "NameError", "TypeError", "SyntaxError", "BudgetExceeded"
    std::string message;
    std::vector<StackFrame> stack;  // outermost first
    std::optional<SheetCell> cell;

    friend bool operator==(const RuntimeErrorRecord&, const RuntimeErrorRecord&) = default;
};

struct ExecOptions {
    std::uint64_t step_budget = 10'000'000;
    std::chrono::milliseconds clock_budget{10'000};
    /// load_csv paths resolve under this directory and may not escape it.
    std::filesystem::path data_root = ".";
};

struct ExecutionResult {
    ResultsGrid grid;
    std::string output;
    std::vector<RuntimeErrorRecord> errors;
    bool incomplete = false;

    friend bool operator==(const ExecutionResult&, const ExecutionResult&) = default;
};

struct SectionSource {
    SectionKind kind;
    std::string text;
};

/// Runs the sections in order in one shared namespace.
ExecutionResult execute(const std::vector<SectionSource>& sections, const ExecOptions& options = {});
ExecutionResult execute(const GeneratedProgram& program, const ExecOptions& options = {});

}  // namespace tabula::script
