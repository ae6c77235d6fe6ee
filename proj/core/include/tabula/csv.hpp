#pragma once

// RFC 4180 reader used by load_csv. UTF-8 in, comma separated, CRLF or LF row ends.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tabula/errors.hpp"

namespace tabula {

class CsvError : public Error {
public:
    CsvError(std::size_t line, const std::string& message)
        : Error("CsvError", "line " + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

using CsvRow = std::vector<std::string>;

/// Throws CsvError on a quote inside an unquoted field, text after a closing quote, or an
/// unterminated quoted field. A final row end is optional; a lone empty trailing line is ignored.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Resolves `path` against `root` and rejects anything that leaves it. Throws
/// InvalidArgumentError.
std::filesystem::path confine_path(const std::filesystem::path& root, const std::string& path);

}  // namespace tabula
