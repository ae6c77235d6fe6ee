#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "tabula/grid.hpp"

namespace tabula_test {

using Rng = std::mt19937_64;

/// Formula over the oracle's language: operators, SUM/IF/COUNTIF/AVERAGE, cell and range
/// references into `sheets`. Nesting depth is at most `depth`.
std::string random_formula(Rng& rng, int depth, const std::vector<std::string>& sheets);

/// Two sheets of constants and formulae within A1:F8, cycles allowed.
tabula::Workbook random_formula_grid(Rng& rng);

/// Everything a document can hold: odd sheet names, typed and formatted constants, formulae
/// (including unparseable and cyclic ones), user sections, data sources, a worksheet formula,
/// and sometimes the lock flag. Built only through public edit operations.
tabula::Workbook random_document(Rng& rng, int max_formulae = 40);

std::size_t formula_cell_count(const tabula::Workbook& wb);

/// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    void write(const std::string& name, const std::string& text) const;

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);

}  // namespace tabula_test
