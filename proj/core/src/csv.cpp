#include "tabula/csv.hpp"

namespace tabula {

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    std::size_t line = 1;
    std::size_t i = 0;
    const std::size_t n = text.size();
    bool row_open = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_open = false;
    };

    while (i < n) {
        row_open = true;
        if (text[i] == '"' && field.empty()) {
            const std::size_t start_line = line;
            ++i;
            bool closed = false;
            while (i < n) {
                const char c = text[i];
                if (c == '"') {
                    if (i + 1 < n && text[i + 1] == '"') {
                        field += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                if (c == '\n') ++line;
                field += c;
                ++i;
            }
            if (!closed) throw CsvError(start_line, "unterminated quoted field");
            if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                throw CsvError(line, "unexpected text after closing quote");
            }
            continue;
        }
        const char c = text[i];
        if (c == ',') {
            end_field();
            ++i;
        } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
            end_row();
            i += 2;
            ++line;
        } else if (c == '\n') {
            end_row();
            ++i;
            ++line;
        } else if (c == '"') {
            throw CsvError(line, "quote inside unquoted field");
        } else {
            field += c;
            ++i;
        }
    }
    if (row_open) end_row();
    return rows;
}

std::filesystem::path confine_path(const std::filesystem::path& root, const std::string& path) {
    namespace fs = std::filesystem;
    if (path.empty()) throw InvalidArgumentError("empty data path");
    std::error_code ec;
    const fs::path base = fs::weakly_canonical(fs::absolute(root), ec);
    if (ec) throw InvalidArgumentError("cannot resolve data root " + root.string());
    fs::path candidate = fs::path(path);
    if (candidate.is_relative()) candidate = base / candidate;
    const fs::path resolved = fs::weakly_canonical(candidate, ec);
    if (ec) throw InvalidArgumentError("cannot resolve data path " + path);
    auto b = base.begin();
    auto r = resolved.begin();
    for (; b != base.end(); ++b, ++r) {
        if (b->empty()) continue;
        if (r == resolved.end() || *r != *b) {
            throw InvalidArgumentError("data path escapes the data root: " + path);
        }
    }
    return resolved;
}

}  // namespace tabula
