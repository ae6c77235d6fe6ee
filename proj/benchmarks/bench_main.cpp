#include <benchmark/benchmark.h>

#include "tabula/engine.hpp"
#include "tabula/formula.hpp"

using namespace tabula;

namespace {

// Column A holds constants; column B chains running totals down `rows` rows.
Workbook ledger(int rows) {
    Workbook wb = new_workbook();
    wb = set_user_section(wb, UserSection::PreConstants, "def withVAT(amount):\n    return amount*1.175\n").workbook;
    for (int r = 1; r <= rows; ++r) {
        wb = set_cell(wb, "Sheet1", CellAddress{1, r}, std::to_string(r));
        const std::string prev = r == 1 ? "0" : "B" + std::to_string(r - 1);
        wb = set_cell(wb, "Sheet1", CellAddress{2, r}, "=" + prev + "+withVAT(A" + std::to_string(r) + ")");
        wb = set_cell(wb, "Sheet1", CellAddress{3, r}, "=IF(B" + std::to_string(r) + ">100, SUM(A1:A" +
                                                         std::to_string(r) + "), 0)");
    }
    return wb;
}

void BM_ParseFormula(benchmark::State& state) {
    const std::string src = "=IF(SUM(A1:C9)>=10%, 'Other Sheet'!$B$2 * (3 + -A4) ^ 2, COUNTIF(D1:D20, \">3\") & \"x\")";
    for (auto _ : state) benchmark::DoNotOptimize(formula::parse_formula(src));
}
BENCHMARK(BM_ParseFormula);

void BM_GenerateProgram(benchmark::State& state) {
    const Workbook wb = ledger(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(generate_program(wb));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GenerateProgram)->Range(8, 512)->Complexity();

void BM_Recalculate(benchmark::State& state) {
    const Workbook wb = ledger(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(recalculate(wb));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Recalculate)->Range(8, 512)->Complexity();

void BM_SaveLoad(benchmark::State& state) {
    const Workbook wb = ledger(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(load(save(wb)));
}
BENCHMARK(BM_SaveLoad)->Range(8, 512);

}  // namespace
BENCHMARK_MAIN();
