#include <gtest/gtest.h>

#include <chrono>

#include "support/generators.hpp"
#include "tabula/engine.hpp"
#include "tabula/script.hpp"

using namespace tabula;
using tabula::script::ExecOptions;
using tabula::script::ExecutionResult;
using tabula::script::SectionSource;

namespace {

CellAddress at(const char* a1) { return CellAddress::from_a1(a1); }

/// Runs `code` as POST_FORMULAE after a one-sheet workbook header.
ExecutionResult run(const std::string& code, ExecOptions opts = {}) {
    return script::execute({{SectionKind::Imports, "workbook = Workbook()\nworkbook.add_sheet(\"Sheet1\")\n"},
                            {SectionKind::PostFormulae, code}},
                           opts);
}

std::string out(const std::string& code) {
    auto r = run(code);
    for (const auto& e : r.errors) ADD_FAILURE() << e.kind << ": " << e.message;
    return r.output;
}

std::string first_error(const std::string& code) {
    auto r = run(code);
    return r.errors.empty() ? "" : r.errors[0].kind;
}

Workbook with_section(Workbook wb, UserSection s, const std::string& text) {
    return set_user_section(wb, s, text).workbook;
}

}  // namespace

TEST(Eval, Examples) {
    EXPECT_EQ(out("print(None + 5)\n"), "5\n");
    EXPECT_EQ(out("print(Error(\"DIV0\") + 1)\n"), "Error(\"DIV0\")\n");
    EXPECT_EQ(out("print(7 / 2)\n"), "3.5\n");
}

TEST(Eval, Arithmetic) {
    EXPECT_EQ(out("print(2 + 3, 2 * 3.5, 7 // 2, -7 // 2, 7 % 3, -7 % 3, 2 ** 10, 2 ** -1)\n"),
              "5 7 3 -4 1 2 1024 0.5\n");
    EXPECT_EQ(out("print(1 / 0, 1 // 0, 0 ** -1)\n"), "Error(\"DIV0\") Error(\"DIV0\") Error(\"DIV0\")\n");
    EXPECT_EQ(out("print(\"a\" + 1)\n"), "Error(\"VALUE\")\n");
    EXPECT_EQ(out("print(10 ** 400.0)\n"), "Error(\"VALUE\")\n");
    EXPECT_EQ(out("print(9223372036854775807 + 1)\n"), "9223372036854775808\n");
    EXPECT_EQ(out("print(True + True, 0.1 + 0.2)\n"), "2 0.30000000000000004\n");
    EXPECT_EQ(out("x = 4\nx += 1\nx *= 2\nprint(x)\n"), "10\n");
}

TEST(Eval, ErrorPropagationFirstOperandWins) {
    EXPECT_EQ(out("print(Error(\"REF\") + Error(\"DIV0\"))\n"), "Error(\"REF\")\n");
    EXPECT_EQ(out("print(1 < Error(\"NAME\"))\n"), "Error(\"NAME\")\n");
    EXPECT_EQ(out("print(SUM([1, Error(\"VALUE\"), Error(\"DIV0\")]))\n"), "Error(\"VALUE\")\n");
    EXPECT_EQ(out("print(-Error(\"TYPE\"))\n"), "Error(\"TYPE\")\n");
}

TEST(Eval, Comparisons) {
    EXPECT_EQ(out("print(1 < 2.5, \"a\" < \"b\", \"b\" <= \"a\", 2 == 2.0, None == 0, None == \"\")\n"),
              "TRUE TRUE FALSE TRUE TRUE TRUE\n");
    EXPECT_EQ(out("print(1 == \"1\", True < 1)\n"), "Error(\"TYPE\") Error(\"TYPE\")\n");
    EXPECT_EQ(out("print([1, 2] == [1, 2], Date(\"2020-01-01\") < Date(\"2020-02-01\"))\n"), "TRUE TRUE\n");
    EXPECT_EQ(out("print(1 < 2 and not False, 0 or \"x\")\n"), "TRUE x\n");
}

TEST(Eval, StringsListsDicts) {
    EXPECT_EQ(out("s = 'single \"x\"'\nprint(s)\n"), "single \"x\"\n");
    EXPECT_EQ(out("xs = [1, 2]\nxs.append(3)\nxs[0] = 9\nprint(xs, len(xs), xs[-1])\n"), "[9, 2, 3] 3 3\n");
    EXPECT_EQ(out("d = {\"a\": 1, \"b\": 2}\nd[\"c\"] = 3\nprint(d[\"c\"], d.get(\"z\", 0), len(d.keys()))\n"),
              "3 0 3\n");
    EXPECT_EQ(out("for kv in {\"a\": 1}.items():\n    print(kv[0], kv[1])\n"), "a 1\n");
    EXPECT_EQ(out("print(CONCAT(str(1.5), \"!\"), \"tab\\tnew\\\\\")\n"), "1.5! tab\tnew\\\n");
    EXPECT_EQ(out("print(\"a\" + \"b\")\n"), "Error(\"VALUE\")\n") << "strings join with CONCAT, not +";
    EXPECT_EQ(first_error("xs = [1]\nprint(xs[5])\n"), "IndexError");
    EXPECT_EQ(first_error("d = {}\nprint(d[\"k\"])\n"), "KeyError");
}

TEST(Eval, ControlFlow) {
    EXPECT_EQ(out("total = 0\nfor i in range(5):\n    if i == 3:\n        continue\n    total += i\nprint(total)\n"),
              "7\n");
    EXPECT_EQ(out("i = 0\nwhile True:\n    i += 1\n    if i > 4:\n        break\nprint(i)\n"), "5\n");
    EXPECT_EQ(out("x = 5\nif x < 3:\n    print(\"s\")\nelif x < 10:\n    print(\"m\")\nelse:\n    print(\"l\")\n"),
              "m\n");
    EXPECT_EQ(out("def fact(n):\n    if n <= 1:\n        return 1\n    return n * fact(n - 1)\nprint(fact(20))\n"),
              "2432902008176640000\n");
    EXPECT_EQ(out("n = 0\ndef bump():\n    global n\n    n = n + 1\nbump()\nbump()\nprint(n)\n"), "2\n");
    EXPECT_EQ(out("def f():\n    pass\nprint(f())\n"), "\n");
}

TEST(Builtins, Examples) {
    EXPECT_EQ(out("print(SUM([1, 2, None, 3]))\n"), "6\n");
    EXPECT_EQ(out("print(COUNTIF([1, 5, 7, 5], \"=5\"))\n"), "2\n");
    EXPECT_EQ(out("print(COUNTIF([3, 8, 10], \">5\"))\n"), "2\n");
    EXPECT_EQ(out("print(IF(True, 1, 1 / 0))\n"), "Error(\"DIV0\")\n") << "eager: the unused branch still propagates";
    EXPECT_EQ(out("print(IF(True, 1, Error(\"DIV0\")))\n"), "Error(\"DIV0\")\n") << "eager: argument errors propagate";
    EXPECT_EQ(out("print(ROUND(2.5, 0), ROUND(-2.5), ROUND(1.005, 2), ROUND(1234, -2))\n"), "3 -3 1.01 1200\n");
}

TEST(Builtins, Aggregates) {
    EXPECT_EQ(out("print(SUM(1, [2, [3]], \"x\", True), SUM([]), COUNT([1, \"a\", None, 2.5]))\n"), "6 0 2\n");
    EXPECT_EQ(out("print(AVERAGE([1, 2, None, \"t\", 6]), AVERAGE([]))\n"), "3 Error(\"DIV0\")\n");
    EXPECT_EQ(out("print(MIN([4, 2.5, 9]), MAX([4, 2.5, 9]), MAX([]), MIN(\"a\", 3))\n"), "2.5 9 0 3\n");
    EXPECT_EQ(out("print(ABS(-3), ABS(-2.5), LEN(\"héllo\"), LEN(12.5), CONCAT(\"a\", 1, [True, None]))\n"),
              "3 2.5 5 4 a1TRUE\n");
}

TEST(Builtins, Countif) {
    EXPECT_EQ(out("print(COUNTIF([1, 2, 3, 4], \">=2\"), COUNTIF([1, 2, 3], \"<>2\"), COUNTIF([1, \"a\", 2], \"<>2\"))\n"),
              "3 2 2\n");
    EXPECT_EQ(out("print(COUNTIF([\"a\", \"b\", \"a\"], \"a\"), COUNTIF([True, False], \"TRUE\"), COUNTIF([1, 1], 1))\n"),
              "2 1 2\n");
    EXPECT_EQ(out("print(COUNTIF([None, \"\", \"x\"], \"\"), COUNTIF([\"b\", \"c\"], \"<c\"))\n"), "2 1\n");
    EXPECT_EQ(first_error("print(COUNTIF([1]))\n"), "ArityError");
}

TEST(Builtins, StructuralErrors) {
    EXPECT_EQ(first_error("print(IF(1, 2, 3))\n"), "TypeError");
    EXPECT_EQ(first_error("print(ABS(1, 2))\n"), "ArityError");
    EXPECT_EQ(first_error("print(nope)\n"), "NameError");
    EXPECT_EQ(first_error("nope(1)\n"), "NameError");
    EXPECT_EQ(first_error("print(Error(\"BOGUS\"))\n"), "ValueError");
    EXPECT_EQ(first_error("x = 1\nx.foo\n"), "AttributeError");
    EXPECT_EQ(first_error("def f(a):\n    return a\nf(1, 2)\n"), "ArityError");
    EXPECT_EQ(first_error("if Error(\"DIV0\"):\n    pass\n"), "ValueError");
}

TEST(WorkbookObject, CellAccess) {
    EXPECT_EQ(out("print(workbook[\"Sheet1\"].Z99.value)\n"), "\n");
    EXPECT_EQ(out("workbook[\"Sheet1\"].A1.value = 4\nworkbook[\"Sheet1\"].A2.Value = 5\n"
                  "print(workbook[\"Sheet1\"][\"A1\"].value + workbook[\"Sheet1\"].A2.value)\n"),
              "9\n");
    EXPECT_EQ(out("c = workbook[\"Sheet1\"].B3\nprint(c.address, c.sheet)\n"), "B3 <sheet Sheet1>\n");
    EXPECT_EQ(first_error("print(workbook[\"Nope\"].A1.value)\n"), "NameError");
    EXPECT_EQ(out("workbook.add_sheet(\"New\")\nprint(workbook.sheet_names())\n"), "[\"Sheet1\", \"New\"]\n");
}

TEST(WorkbookObject, RangesColumnsBounds) {
    const std::string setup =
        "s = workbook[\"Sheet1\"]\ns.A1.value = 1\ns.B1.value = 2\ns.A2.value = 3\ns.A4.value = \"x\"\n";
    EXPECT_EQ(out(setup + "print(s.range(\"A1\", \"B2\"))\n"), "[1, 2, 3, ]\n");
    EXPECT_EQ(out(setup + "print(s.range(\"B2\", \"A1\") == s.range(\"A1\", \"B2\"))\n"), "TRUE\n");
    EXPECT_EQ(out(setup + "print(s.column(\"A\"), s.column(\"B\"))\n"), "[1, 3, , \"x\"] [2, , , ]\n");
    EXPECT_EQ(out(setup + "print(s.addresses())\n"), "[\"A1\", \"B1\", \"A2\", \"A4\"]\n");
    EXPECT_EQ(out("print(workbook[\"Sheet1\"].column(\"A\"))\n"), "[]\n");
    EXPECT_EQ(out("print(workbook[\"Sheet1\"].range(\"A1\", \"XFD1048576\"))\n"), "Error(\"REF\")\n");
}

TEST(WorkbookObject, Formats) {
    auto r = run("workbook[\"Sheet1\"].A1.value = 1\nworkbook[\"Sheet1\"].A1.format = \"bold;align=center\"\n");
    ASSERT_TRUE(r.errors.empty());
    const auto& cell = r.grid.find("Sheet1")->cells.at(at("A1"));
    ASSERT_TRUE(cell.format);
    EXPECT_TRUE(cell.format->bold);
    EXPECT_EQ(first_error("workbook[\"Sheet1\"].A1.format = \"sparkly\"\n"), "InvalidArgument");
}

TEST(Execute, VatExample) {
    Workbook wb = new_workbook();
    wb = with_section(wb, UserSection::PreConstants, "def withVAT(amount):\n    return amount*1.175\n");
    wb = set_cell(wb, "Sheet1", at("A1"), "100");
    wb = set_cell(wb, "Sheet1", at("A2"), "=withVAT(A1)");
    RecalcResult r = recalculate(wb);
    EXPECT_TRUE(r.errors.empty());
    EXPECT_NEAR(r.value("Sheet1", "A2").as_double(), 117.5, 1e-9);
    wb = with_section(wb, UserSection::PostFormulae, "vatTotal = withVAT(workbook[\"Sheet1\"].A2.Value)\nprint(vatTotal)\n");
    EXPECT_EQ(recalculate(wb).output, "138.0625\n");
}

TEST(Execute, DivisionByZeroKeepsGoing) {
    Workbook wb = new_workbook();
    wb = set_cell(wb, "Sheet1", at("A1"), "=1/0");
    wb = set_cell(wb, "Sheet1", at("A2"), "=nope(1)");
    wb = set_cell(wb, "Sheet1", at("A3"), "=IF(1, 2, 3)");
    wb = set_cell(wb, "Sheet1", at("B9"), "=2+2");
    RecalcResult r = recalculate(wb);
    EXPECT_EQ(r.value("Sheet1", "A1"), Value::error(ErrorKind::Div0, "division by zero"));
    EXPECT_TRUE(r.value("Sheet1", "A2").is_error());
    EXPECT_EQ(r.value("Sheet1", "A2").as_error().kind, ErrorKind::Name);
    EXPECT_EQ(r.value("Sheet1", "A3").as_error().kind, ErrorKind::Type);
    EXPECT_EQ(r.value("Sheet1", "B9"), Value::integer(4));
    ASSERT_EQ(r.errors.size(), 2u) << "value errors are not runtime errors; faults are";
    EXPECT_EQ(r.errors[0].kind, "NameError");
    ASSERT_TRUE(r.errors[0].cell);
    EXPECT_EQ(r.errors[0].cell->second, at("A2"));
    ASSERT_EQ(r.errors[0].stack.size(), 1u);
    EXPECT_EQ(r.errors[0].stack[0].section, SectionKind::Formulae);
    EXPECT_EQ(r.errors[0].stack[0].function, "<module>");
}

TEST(Execute, StackTraceThroughUserFunction) {
    Workbook wb = new_workbook();
    wb = with_section(wb, UserSection::PreConstants, "x = 1\n\ndef inner(v):\n    return v + missing\n\ndef outer(v):\n    return inner(v)\n");
    wb = set_cell(wb, "Sheet1", at("A1"), "=outer(1)");
    RecalcResult r = recalculate(wb);
    ASSERT_EQ(r.errors.size(), 1u);
    const auto& e = r.errors[0];
    EXPECT_EQ(e.kind, "NameError");
    ASSERT_EQ(e.stack.size(), 3u);
    EXPECT_EQ(e.stack[0].section, SectionKind::Formulae);
    EXPECT_EQ(e.stack[0].line, 1u);
    EXPECT_EQ(e.stack[1].section, SectionKind::PreConstants);
    EXPECT_EQ(e.stack[1].function, "outer");
    EXPECT_EQ(e.stack[1].line, 7u);
    EXPECT_EQ(e.stack[2].function, "inner");
    EXPECT_EQ(e.stack[2].line, 4u);
}

TEST(Execute, UserSectionErrorAbortsOnlyThatSection) {
    Workbook wb = new_workbook();
    wb = with_section(wb, UserSection::PreConstants, "print(\"a\")\nboom()\nprint(\"never\")\n");
    wb = with_section(wb, UserSection::PreFormulae, "print(\"b\")\n");
    wb = with_section(wb, UserSection::PostFormulae, "def f(:\n");
    wb = set_cell(wb, "Sheet1", at("A1"), "=1+1");
    RecalcResult r = recalculate(wb);
    EXPECT_EQ(r.output, "a\nb\n");
    ASSERT_EQ(r.errors.size(), 2u);
    EXPECT_EQ(r.errors[0].kind, "NameError");
    EXPECT_EQ(r.errors[0].stack.at(0).line, 2u);
    EXPECT_EQ(r.errors[1].kind, "SyntaxError");
    EXPECT_EQ(r.errors[1].stack.at(0).section, SectionKind::PostFormulae);
    EXPECT_EQ(r.value("Sheet1", "A1"), Value::integer(2));
    EXPECT_FALSE(r.incomplete);
}

TEST(Execute, PrintOutput) {
    Workbook wb = set_cell(new_workbook(), "Sheet1", at("B4"), "5");
    wb = with_section(wb, UserSection::PostFormulae, "print(workbook[\"Sheet1\"].B4.value)\n");
    EXPECT_EQ(recalculate(wb).output, "5\n");
    EXPECT_EQ(out("print()\nprint(\"a\", 1, True, None, 2.50, [1, \"b\"])\n"), "\na 1 TRUE  2.5 [1, \"b\"]\n");
}

TEST(Execute, StepBudget) {
    Workbook wb = set_cell(new_workbook(), "Sheet1", at("A1"), "1");
    wb = with_section(wb, UserSection::PreConstants, "while True:\n    pass\n");
    ExecOptions opts;
    opts.step_budget = 100000;
    RecalcResult r = recalculate(wb, opts);
    EXPECT_TRUE(r.incomplete);
    ASSERT_FALSE(r.errors.empty());
    EXPECT_EQ(r.errors.back().kind, "BudgetExceeded");
    EXPECT_EQ(r.errors.back().stack.at(0).section, SectionKind::PreConstants);
    EXPECT_EQ(r.value("Sheet1", "A1"), Value::empty()) << "execution stops before CONSTANTS";
}

TEST(Execute, ClockBudget) {
    ExecOptions opts;
    opts.step_budget = std::numeric_limits<std::uint64_t>::max();
    opts.clock_budget = std::chrono::milliseconds(200);
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run("x = 0\nwhile True:\n    x = SUM(range(100))\n", opts);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    EXPECT_TRUE(r.incomplete);
    EXPECT_LT(ms.count(), 400);
}

TEST(Execute, RecursionLimit) {
    EXPECT_EQ(first_error("def f(n):\n    return f(n + 1)\nf(0)\n"), "RecursionError");
}

TEST(Execute, LambdaRejected) {
    EXPECT_EQ(first_error("f = lambda x: x\n"), "SyntaxError");
    EXPECT_FALSE(script::check_syntax("x = 1\n"));
    auto d = script::check_syntax("x = 1\ny = (\n");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->line, 3u) << "reported where input ran out";
}

TEST(Execute, FunctionsCannotBeStoredInCells) {
    Workbook wb = new_workbook();
    wb = with_section(wb, UserSection::PostFormulae, "def f():\n    return 1\nworkbook[\"Sheet1\"].A1.value = f\n");
    RecalcResult r = recalculate(wb);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].kind, "TypeError");
}

TEST(Execute, Deterministic) {
    tabula_test::Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        Workbook wb = tabula_test::random_formula_grid(rng);
        const RecalcResult a = recalculate(wb);
        const RecalcResult b = recalculate(wb);
        EXPECT_EQ(a.grid, b.grid);
        EXPECT_EQ(a.output, b.output);
        EXPECT_EQ(a.errors, b.errors);
    }
}

TEST(Execute, SectionVisibility) {
    Workbook wb = new_workbook();
    wb = set_cell(wb, "Sheet1", at("A1"), "10");
    wb = set_cell(wb, "Sheet1", at("A2"), "=A1*2");
    wb = with_section(wb, UserSection::PreConstants,
                      "pc = [workbook[\"Sheet1\"].A1.value, workbook[\"Sheet1\"].A2.value]\n");
    wb = with_section(wb, UserSection::PreFormulae,
                      "pf = [workbook[\"Sheet1\"].A1.value, workbook[\"Sheet1\"].A2.value]\n");
    wb = with_section(wb, UserSection::PostFormulae,
                      "print(pc, pf, workbook[\"Sheet1\"].A2.value)\n");
    EXPECT_EQ(recalculate(wb).output, "[, ] [10, ] 20\n");
}

TEST(Execute, Overrides) {
    Workbook wb = set_cell(new_workbook(), "Sheet1", at("A1"), "100");
    wb = set_cell(wb, "Sheet1", at("A2"), "=A1+1");
    wb = with_section(wb, UserSection::PostFormulae, "workbook[\"Sheet1\"].A1.value = 42\n");
    RecalcResult r = recalculate(wb);
    const auto* a1 = r.cell("Sheet1", "A1");
    ASSERT_TRUE(a1);
    EXPECT_EQ(a1->value, Value::integer(42));
    EXPECT_TRUE(a1->overridden);
    EXPECT_EQ(a1->original, Value::number(100));
    EXPECT_EQ(r.value("Sheet1", "A2"), Value::number(101)) << "formulae already ran";
    EXPECT_FALSE(r.cell("Sheet1", "A2")->overridden) << "only constants are overridden";

    Workbook tweak = with_section(wb, UserSection::PostFormulae, "");
    tweak = with_section(tweak, UserSection::PreFormulae, "workbook[\"Sheet1\"].A1.value = 5\n");
    r = recalculate(tweak);
    EXPECT_EQ(r.value("Sheet1", "A2"), Value::integer(6));
    EXPECT_FALSE(r.cell("Sheet1", "A1")->overridden);
}

TEST(Execute, EnforcedTypeAppliesToComputedValues) {
    Workbook wb = set_enforced_type(new_workbook(), "Sheet1", at("A1"), EnforcedType::Text);
    wb = set_cell(wb, "Sheet1", at("A1"), "=1+2");
    wb = set_enforced_type(wb, "Sheet1", at("A2"), EnforcedType::Number);
    wb = set_cell(wb, "Sheet1", at("A2"), "=\"abc\"");
    RecalcResult r = recalculate(wb);
    EXPECT_EQ(r.value("Sheet1", "A1"), Value::text("3"));
    EXPECT_EQ(r.value("Sheet1", "A2").as_error().kind, ErrorKind::Type);

    auto s = run("c = workbook[\"Sheet1\"].A1\nc.enforced_type = \"INTEGER\"\nc.value = \"12\"\nprint(c.value + 1)\n");
    EXPECT_EQ(s.output, "13\n");
}

TEST(Sandbox, CsvOutsideDataRoot) {
    tabula_test::TempDir dir;
    dir.write("in/ok.csv", "a,b\n1,2\n");
    dir.write("secret.csv", "x\n");
    ExecOptions opts;
    opts.data_root = dir / "in";
    auto r = run("workbook[\"Sheet1\"].load_csv(\"ok.csv\", header=True)\nprint(workbook[\"Sheet1\"].B2.value)\n", opts);
    EXPECT_TRUE(r.errors.empty());
    EXPECT_EQ(r.output, "2\n");
    for (const char* p : {"../secret.csv", "/etc/passwd", "sub/../../secret.csv"}) {
        auto bad = run(std::string("workbook[\"Sheet1\"].load_csv(\"") + p + "\")\n", opts);
        ASSERT_EQ(bad.errors.size(), 1u) << p;
        EXPECT_EQ(bad.errors[0].kind, "IOError") << p;
        EXPECT_NE(bad.errors[0].message.find("escapes the data root"), std::string::npos) << bad.errors[0].message;
    }
    auto missing = run("workbook[\"Sheet1\"].load_csv(\"missing.csv\")\n", opts);
    ASSERT_EQ(missing.errors.size(), 1u);
    EXPECT_EQ(missing.errors[0].kind, "IOError");
}

TEST(Sandbox, NoOtherFileOrNetworkBuiltins) {
    for (const char* name : {"open", "eval", "exec", "import", "__import__", "socket", "system"}) {
        EXPECT_EQ(first_error(std::string(name) + "(\"x\")\n"), name == std::string("import") ? "SyntaxError" : "NameError")
            << name;
    }
}
