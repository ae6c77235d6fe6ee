#pragma once

// Recalculation pipeline and the structural edits that sit above the grid model:
// worksheet formulae, user code sections and CSV data sources.

#include <optional>
#include <string>

#include "tabula/grid.hpp"
#include "tabula/program.hpp"
#include "tabula/script.hpp"

namespace tabula {

struct RecalcResult {
    script::ResultsGrid grid;
    std::string output;
    std::vector<script::RuntimeErrorRecord> errors;
    bool incomplete = false;
    /// Exactly the program that was executed.
    GeneratedProgram program;

    BoundsRect bounds(std::string_view sheet) const;
    Value value(std::string_view sheet, std::string_view a1) const;
    const script::ResultCell* cell(std::string_view sheet, std::string_view a1) const;
};

/// generate_program, then execute.
RecalcResult recalculate(const Workbook& wb, const script::ExecOptions& options = {});

/// Worksheet-formula loop block (header comment, loop, body) as it appears in FORMULAE.
/// Throws ParseError, UnknownSheetError or InvalidArgumentError.
std::string fill_worksheet(const Workbook& wb, const std::string& target, const FormulaSource& wf);

/// Sets or (with nullopt) clears a sheet's worksheet formula. Throws LockedError,
/// UnknownSheetError, SheetInUseError (sheet holds cells or a data source), DerivedCycleError,
/// ParseError/LexError, InvalidArgumentError.
Workbook set_worksheet_formula(const Workbook& wb, const std::string& target, std::optional<std::string> source);

/// CRLF to LF, trailing newline added to non-empty text. Throws InvalidArgumentError for
/// lines that would read as section markers.
std::string normalize_section_text(std::string_view text);

struct SectionUpdate {
    Workbook workbook;
    std::optional<script::Diagnostic> diagnostic;
};

/// Stores the text even when it does not parse. Throws LockedError.
SectionUpdate set_user_section(const Workbook& wb, UserSection section, std::string_view text);

/// Creates the target sheet when missing. Throws SheetInUseError, InvalidArgumentError.
Workbook attach_data_source(const Workbook& wb, const DataSource& ds);
/// Throws InvalidArgumentError when the sheet has no data source.
Workbook detach_data_source(const Workbook& wb, const std::string& target_sheet);

}  // namespace tabula
