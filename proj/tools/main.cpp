// tabula: command-line front end for workbook documents (.rsw).
//
// Exit codes: 0 success, 1 recalculation reported errors, 2 usage, file or edit failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tabula/engine.hpp"
#include "tabula/errors.hpp"
#include "tabula/service.hpp"

namespace {

using namespace tabula;

constexpr int kOk = 0;
constexpr int kRecalcErrors = 1;
constexpr int kFailure = 2;

struct BudgetFlags {
    std::string data_root;
    std::uint64_t steps = script::ExecOptions{}.step_budget;
    long long clock_ms = script::ExecOptions{}.clock_budget.count();

    script::ExecOptions options(const std::filesystem::path& file) const {
        script::ExecOptions o;
        o.step_budget = steps;
        o.clock_budget = std::chrono::milliseconds(clock_ms);
        o.data_root = data_root.empty() ? std::filesystem::absolute(file).parent_path() : std::filesystem::path(data_root);
        return o;
    }
};

void add_budget_flags(CLI::App* cmd, BudgetFlags& f) {
    cmd->add_option("--data-root", f.data_root, "Directory load_csv paths resolve under (default: the file's directory)");
    cmd->add_option("--step-budget", f.steps, "Interpreter step budget")->check(CLI::PositiveNumber);
    cmd->add_option("--clock-budget-ms", f.clock_ms, "Interpreter wall-clock budget")->check(CLI::PositiveNumber);
}

std::string read_text(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IOError", "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void print_errors(const std::vector<script::RuntimeErrorRecord>& errors) {
    for (const auto& e : errors) {
        std::cerr << "error: " << e.kind << ": " << e.message;
        if (e.cell) std::cerr << " [cell " << e.cell->first << "!" << e.cell->second.a1() << "]";
        std::cerr << "\n";
        for (const auto& f : e.stack) {
            std::cerr << "  at " << to_string(f.section) << " line " << f.line << " in " << f.function << "\n";
        }
    }
}

void print_table(const script::ResultSheet& sheet) {
    const BoundsRect b = sheet.bounds();
    if (b.empty) {
        std::cout << sheet.name << " (empty)\n";
        return;
    }
    std::cout << sheet.name << " " << b.min.a1() << ":" << b.max.a1() << "\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{""};
    for (int c = b.min.column; c <= b.max.column; ++c) header.push_back(column_letters(c));
    rows.push_back(header);
    for (int r = b.min.row; r <= b.max.row; ++r) {
        std::vector<std::string> row{std::to_string(r)};
        for (int c = b.min.column; c <= b.max.column; ++c) row.push_back(display(sheet.value_at({c, r})));
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            line += row[i];
            if (i + 1 < row.size()) line += std::string(width[i] - row[i].size() + 2, ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        std::cout << line << "\n";
    }
}

/// Runs a document as a plain script: sections split by marker, the standalone epilogue
/// (when present) executed on its own after POST_FORMULAE.
int run_script(const std::string& file, const BudgetFlags& flags) {
    const auto texts = split_sections(read_text(file));
    std::vector<script::SectionSource> sections;
    for (std::size_t i = 0; i < kSectionOrder.size(); ++i) sections.push_back({kSectionOrder[i], texts[i]});
    std::string& post = sections.back().text;
    const std::string marker = std::string(kStandaloneEpilogue) + "\n";
    const std::size_t at = post.rfind(marker);
    if (at != std::string::npos && (at == 0 || post[at - 1] == '\n')) {
        std::string epilogue = post.substr(at);
        post.erase(at);
        sections.push_back({SectionKind::PostFormulae, std::move(epilogue)});
    }
    const auto result = script::execute(sections, flags.options(file));
    std::cout << result.output;
    print_errors(result.errors);
    return result.errors.empty() && !result.incomplete ? kOk : kRecalcErrors;
}

template <typename Edit>
int edit_file(const std::string& file, Edit edit) {
    const Workbook wb = load_file(file);
    save_file(file, edit(wb));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabula: spreadsheet documents that are GridScript programs"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string file;
    BudgetFlags flags;
    int code = kOk;

    auto* recalc = app.add_subcommand("recalc", "Recalculate and print output and values");
    recalc->add_option("file", file)->required();
    add_budget_flags(recalc, flags);

    auto* run = app.add_subcommand("run", "Execute a document or standalone export as a script");
    run->add_option("file", file)->required();
    add_budget_flags(run, flags);

    bool standalone = false, library = false, data_only = false;
    std::string out_path;
    auto* exp = app.add_subcommand("export", "Export the program, its function library, or its data");
    exp->add_option("file", file)->required();
    auto* g = exp->add_option_group("kind");
    g->add_flag("--standalone", standalone);
    g->add_flag("--library", library);
    g->add_flag("--data-only", data_only);
    g->require_option(1);
    exp->add_option("-o,--output", out_path, "Write to a file instead of stdout");

    auto* lock_cmd = app.add_subcommand("lock", "Lock formulae and code");
    lock_cmd->add_option("file", file)->required();
    auto* unlock_cmd = app.add_subcommand("unlock", "Unlock formulae and code");
    unlock_cmd->add_option("file", file)->required();

    std::string sheet, csv;
    bool header = false;
    auto* import = app.add_subcommand("import-csv", "Attach a CSV file as a sheet's data source");
    import->add_option("file", file)->required();
    import->add_option("--sheet", sheet)->required();
    import->add_option("--csv", csv)->required();
    import->add_flag("--header", header);

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve the document over HTTP");
    serve->add_option("file", file)->required();
    serve->add_option("--host", host);
    serve->add_option("--port", port)->check(CLI::Range(0, 65535));
    add_budget_flags(serve, flags);

    auto* fmt = app.add_subcommand("fmt", "Rewrite the document in canonical form");
    fmt->add_option("file", file)->required();

    std::vector<std::string> sheets;
    auto* create = app.add_subcommand("new", "Create an empty document");
    create->add_option("file", file)->required();
    create->add_option("--sheet", sheets, "Sheet names (default Sheet1)");

    std::string addr, raw;
    auto* set = app.add_subcommand("set", "Enter raw input into a cell (\"\" clears it)");
    set->add_option("file", file)->required();
    set->add_option("sheet", sheet)->required();
    set->add_option("addr", addr)->required();
    set->add_option("raw", raw)->required();

    std::string kind, text_path;
    auto* section = app.add_subcommand("set-section", "Replace a user code section from a file ('-' for stdin)");
    section->add_option("file", file)->required();
    section->add_option("kind", kind, "PRE_CONSTANTS, PRE_FORMULAE or POST_FORMULAE")->required();
    section->add_option("source", text_path)->required();

    std::string source;
    auto* wf = app.add_subcommand("set-worksheet-formula", "Fill a sheet from a worksheet formula (\"\" clears it)");
    wf->add_option("file", file)->required();
    wf->add_option("sheet", sheet)->required();
    wf->add_option("source", source)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kFailure;
    }

    try {
        if (recalc->parsed()) {
            const Workbook wb = load_file(file);
            const RecalcResult r = recalculate(wb, flags.options(file));
            std::cout << r.output;
            for (const auto& s : r.grid.sheets) print_table(s);
            print_errors(r.errors);
            code = r.errors.empty() && !r.incomplete ? kOk : kRecalcErrors;
        } else if (run->parsed()) {
            code = run_script(file, flags);
        } else if (exp->parsed()) {
            const Workbook wb = load_file(file);
            const std::string text = standalone ? export_standalone(wb)
                                     : library  ? export_library(wb)
                                                : save(extract_data(wb));
            if (out_path.empty()) {
                std::cout << text;
            } else {
                write_file_atomic(out_path, text);
            }
        } else if (lock_cmd->parsed()) {
            code = edit_file(file, [](const Workbook& wb) { return lock(wb); });
        } else if (unlock_cmd->parsed()) {
            code = edit_file(file, [](const Workbook& wb) { return unlock(wb); });
        } else if (import->parsed()) {
            code = edit_file(file, [&](const Workbook& wb) { return attach_data_source(wb, {csv, sheet, header}); });
        } else if (serve->parsed()) {
            Service service(file, load_file(file), flags.options(file));
            if (port == 0) {
                port = service.bind_any_port(host);
                if (port < 0) throw Error("IOError", "cannot bind " + host);
                std::cout << "listening on http://" << host << ":" << port << std::endl;
                service.listen_after_bind();
            } else {
                std::cout << "listening on http://" << host << ":" << port << std::endl;
                if (!service.listen(host, port)) throw Error("IOError", "cannot bind " + host + ":" + std::to_string(port));
            }
        } else if (fmt->parsed()) {
            code = edit_file(file, [](const Workbook& wb) { return wb; });
        } else if (create->parsed()) {
            if (std::filesystem::exists(file)) throw Error("IOError", file + " already exists");
            if (sheets.empty()) sheets.push_back("Sheet1");
            save_file(file, new_workbook(sheets));
        } else if (set->parsed()) {
            code = edit_file(file, [&](const Workbook& wb) { return set_cell(wb, sheet, CellAddress::from_a1(addr), raw); });
        } else if (section->parsed()) {
            auto k = parse_section_kind(kind);
            if (!k || !user_section_of(*k)) throw NotEditableError("not an editable section: " + kind);
            const std::string text = read_text(text_path);
            code = edit_file(file, [&](const Workbook& wb) {
                auto u = set_user_section(wb, *user_section_of(*k), text);
                if (u.diagnostic) {
                    std::cerr << "warning: line " << u.diagnostic->line << ", column " << u.diagnostic->column << ": "
                              << u.diagnostic->message << "\n";
                }
                return u.workbook;
            });
        } else if (wf->parsed()) {
            code = edit_file(file, [&](const Workbook& wb) {
                return set_worksheet_formula(wb, sheet, source.empty() ? std::nullopt : std::optional(source));
            });
        }
    } catch (const Error& e) {
        std::cerr << "tabula: " << e.kind() << ": " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "tabula: " << e.what() << "\n";
        return kFailure;
    }
    return code;
}
