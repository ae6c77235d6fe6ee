#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace tabula {

/// Base class for every error the engine reports to callers.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    /// Machine-readable kind, e.g. "LockedError". Used verbatim by the HTTP service.
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class LockedError : public Error {
public:
    explicit LockedError(const std::string& message) : Error("LockedError", message) {}
};

class DerivedSheetError : public Error {
public:
    explicit DerivedSheetError(const std::string& message) : Error("DerivedSheetError", message) {}
};

class TypeConformanceError : public Error {
public:
    explicit TypeConformanceError(const std::string& message)
        : Error("TypeConformanceError", message) {}
};

class UnknownSheetError : public Error {
public:
    explicit UnknownSheetError(const std::string& sheet)
        : Error("UnknownSheet", "no sheet named \"" + sheet + "\"") {}
};

class InvalidArgumentError : public Error {
public:
    explicit InvalidArgumentError(const std::string& message)
        : Error("InvalidArgument", message) {}
};

class SheetInUseError : public Error {
public:
    explicit SheetInUseError(const std::string& message) : Error("SheetInUse", message) {}
};

class DerivedCycleError : public Error {
public:
    explicit DerivedCycleError(const std::string& message) : Error("DerivedCycle", message) {}
};

class NotEditableError : public Error {
public:
    explicit NotEditableError(const std::string& message) : Error("NotEditable", message) {}
};

/// Raised by load() for malformed documents. `line` is 1-based within the file.
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& message)
        : Error("FormatError", "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Lexing/parsing failure. `column` is a 1-based offset into the source text.
class SyntaxError : public Error {
public:
    SyntaxError(std::string kind, std::size_t column, const std::string& message)
        : Error(std::move(kind), message), column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

class LexError : public SyntaxError {
public:
    LexError(std::size_t column, const std::string& message)
        : SyntaxError("LexError", column, "column " + std::to_string(column) + ": " + message) {}
};

class ParseError : public SyntaxError {
public:
    ParseError(std::size_t column, std::string expected, std::string found)
        : SyntaxError("ParseError", column,
                      "column " + std::to_string(column) + ": expected " + expected + ", found " + found),
          expected_(std::move(expected)), found_(std::move(found)) {}

    const std::string& expected() const noexcept { return expected_; }
    const std::string& found() const noexcept { return found_; }

private:
    std::string expected_;
    std::string found_;
};

}  // namespace tabula
