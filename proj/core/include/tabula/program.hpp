#pragma once

// Rendering a workbook as its six-section GridScript program, plus the document file format
// (which is that program, byte for byte).

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tabula/formula.hpp"
#include "tabula/grid.hpp"

namespace tabula {

enum class SectionKind { Imports, PreConstants, Constants, PreFormulae, Formulae, PostFormulae };

inline constexpr std::array<SectionKind, 6> kSectionOrder{SectionKind::Imports,     SectionKind::PreConstants,
                                                          SectionKind::Constants,   SectionKind::PreFormulae,
                                                          SectionKind::Formulae,    SectionKind::PostFormulae};

std::string_view to_string(SectionKind kind);
std::optional<SectionKind> parse_section_kind(std::string_view text);
bool is_editable(SectionKind kind);
/// Maps an editable section kind to the workbook's user section; nullopt for generated kinds.
std::optional<UserSection> user_section_of(SectionKind kind);

/// `#=== SECTION: <KIND> (editable|generated) ===#`
std::string section_marker(SectionKind kind);

using SheetCell = std::pair<std::string, CellAddress>;

struct Section {
    SectionKind kind;
    bool editable = false;
    std::string text;           // empty, or LF-terminated lines
    std::string header_marker;
    std::size_t first_line = 0;  // absolute 1-based line number of the section's first text line

    std::size_t line_count() const;
};

/// Bijection between formula cells and their FORMULAE statement lines (absolute line numbers).
struct LineMap {
    std::map<SheetCell, std::size_t> cell_to_line;
    std::map<std::size_t, SheetCell> line_to_cell;

    std::optional<std::size_t> line_of(const SheetCell& c) const;
    std::optional<SheetCell> cell_at(std::size_t line) const;
};

struct GeneratedProgram {
    std::array<Section, 6> sections;
    LineMap line_map;
    /// Lines (absolute) that open a worksheet-formula loop, keyed by target sheet.
    std::map<std::string, std::size_t> worksheet_formula_lines;
    std::set<SheetCell> cycle_members;

    const Section& section(SectionKind kind) const;
    /// The whole program as a document: markers, sections, trailing newline.
    std::string text() const;
};

/// Result of dependency ordering over formula cells.
struct FormulaOrder {
    struct Item {
        enum class Kind { Cell, WorksheetFormula, Cycle } kind;
        SheetCell cell;                      // Cell: the formula cell
        std::string sheet;                   // WorksheetFormula: target sheet
        std::vector<SheetCell> cycle_cells;  // Cycle: members of one strongly connected group
        std::vector<std::string> cycle_sheets;
    };
    std::vector<Item> items;
    std::set<SheetCell> cycle_members;
    std::set<std::string> cyclic_worksheet_formulae;
};

/// Topological order of formula cells and worksheet-formula blocks. Ranges and columns expand
/// against each sheet's stored bounds. Ties break by (sheet creation order, row, column).
FormulaOrder order_formulae(const Workbook& wb);

GeneratedProgram generate_program(const Workbook& wb);

/// GridScript literal for a stored constant; Number always carries a '.' or exponent.
std::string constant_literal(const Value& v);

std::string save(const Workbook& wb);
/// Parses a canonical document. Throws FormatError naming the first offending line.
Workbook load(std::string_view text, std::string name = "Book1");

/// First line of the epilogue export_standalone appends to POST_FORMULAE; `run` executes
/// what follows it as a separate section so a failing user section cannot suppress it.
inline constexpr std::string_view kStandaloneEpilogue = "# standalone epilogue: print every computed cell";

/// Document plus an epilogue that prints every sheet's bounded values.
std::string export_standalone(const Workbook& wb);
/// Top-level `def` blocks from the three user sections, with a provenance header.
std::string export_library(const Workbook& wb);

/// Splits a document into its sections by marker. Throws FormatError on missing, repeated or
/// out-of-order markers, or any text before the first marker.
std::array<std::string, 6> split_sections(std::string_view text);

}  // namespace tabula
