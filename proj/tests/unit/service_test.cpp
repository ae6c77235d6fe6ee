#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "support/generators.hpp"
#include "tabula/service.hpp"

using namespace tabula;
using nlohmann::json;

namespace {

struct Fixture : ::testing::Test {
    tabula_test::TempDir dir;
    std::filesystem::path file = dir / "book.rsw";
    std::unique_ptr<Service> svc;

    void SetUp() override {
        script::ExecOptions opts;
        opts.data_root = dir.path();
        save_file(file, new_workbook());
        svc = std::make_unique<Service>(file, load_file(file), opts);
    }

    HttpResponse call(const std::string& method, const std::string& path, const json& body = json()) {
        return svc->handle(method, path, body.is_null() ? "" : body.dump());
    }

    json ok(const std::string& method, const std::string& path, const json& body = json()) {
        HttpResponse r = call(method, path, body);
        EXPECT_EQ(r.status, 200) << method << " " << path << ": " << r.body;
        return json::parse(r.body);
    }

    static const json* cell(const json& state, const std::string& sheet, const std::string& addr) {
        for (const auto& s : state["sheets"]) {
            if (s["name"] != sheet) continue;
            for (const auto& c : s["cells"]) {
                if (c["addr"] == addr) return &c;
            }
        }
        return nullptr;
    }
};

using ServiceTest = Fixture;

}  // namespace

TEST_F(ServiceTest, GetWorkbookShape) {
    json s = ok("GET", "/workbook");
    EXPECT_EQ(s["workbook"], "book");
    EXPECT_EQ(s["locked"], false);
    ASSERT_EQ(s["sheets"].size(), 1u);
    EXPECT_EQ(s["sheets"][0]["name"], "Sheet1");
    EXPECT_EQ(s["sheets"][0]["bounds"]["empty"], true);
    ASSERT_EQ(s["sections"].size(), 6u);
    EXPECT_EQ(s["sections"][4]["kind"], "FORMULAE");
    EXPECT_EQ(s["sections"][4]["editable"], false);
    EXPECT_EQ(s["sections"][5]["editable"], true);
    EXPECT_EQ(s["output"], "");
    EXPECT_TRUE(s["errors"].empty());
    EXPECT_EQ(s["incomplete"], false);
}

TEST_F(ServiceTest, VatThroughEndpoints) {
    ok("PUT", "/section", {{"kind", "PRE_CONSTANTS"}, {"text", "def withVAT(amount):\n    return amount*1.175\n"}});
    ok("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A1"}, {"raw", "100"}});
    json s = ok("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A2"}, {"raw", "=withVAT(A1)"}});
    const json* a2 = cell(s, "Sheet1", "A2");
    ASSERT_TRUE(a2);
    EXPECT_NEAR((*a2)["value"].get<double>(), 117.5, 1e-9);
    EXPECT_EQ((*a2)["stored"], "=withVAT(A1)");
    EXPECT_EQ((*a2)["formula"], true);
    EXPECT_EQ((*a2)["display"], "117.5");
    ASSERT_EQ(s["line_map"].size(), 1u);
    EXPECT_EQ(s["line_map"][0]["addr"], "A2");
    EXPECT_EQ(s["line_map"][0]["line"], 11);
    EXPECT_EQ(load_file(file), svc->snapshot()) << "every mutation is persisted";
}

TEST_F(ServiceTest, MutationResponseEqualsFreshGet) {
    HttpResponse put = call("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "B2"}, {"raw", "=1/0"}});
    ASSERT_EQ(put.status, 200);
    EXPECT_EQ(put.body, call("GET", "/workbook").body);
    HttpResponse lock = call("POST", "/lock");
    EXPECT_EQ(lock.body, call("GET", "/workbook").body);
}

TEST_F(ServiceTest, ErrorStatuses) {
    HttpResponse r = call("PUT", "/section", {{"kind", "FORMULAE"}, {"text", "x = 1\n"}});
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(json::parse(r.body)["error_kind"], "NotEditable");

    ok("POST", "/lock");
    r = call("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A3"}, {"raw", "=1+2"}});
    EXPECT_EQ(r.status, 409);
    EXPECT_EQ(json::parse(r.body)["error_kind"], "LockedError");
    EXPECT_EQ(call("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A3"}, {"raw", "3"}}).status, 200);
    ok("POST", "/unlock");

    r = call("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "ZZZZ1"}, {"raw", "1"}});
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(json::parse(r.body)["error_kind"], "InvalidArgument");
    r = call("PUT", "/enforced-type", {{"sheet", "Sheet1"}, {"addr", "A1"}, {"type", "COLOUR"}});
    EXPECT_EQ(r.status, 400);
    r = call("PUT", "/cell", {{"sheet", "Nope"}, {"addr", "A1"}, {"raw", "1"}});
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(json::parse(r.body)["error_kind"], "UnknownSheet");
    EXPECT_EQ(svc->handle("PUT", "/cell", "{not json").status, 400);
    EXPECT_EQ(call("PUT", "/cell", {{"sheet", "Sheet1"}}).status, 400);
    EXPECT_EQ(call("GET", "/nowhere").status, 404);
    EXPECT_EQ(call("DELETE", "/workbook").status, 404);
}

TEST_F(ServiceTest, WorksheetFormulaErrorsCarryPosition) {
    ok("POST", "/sheet", {{"name", "T"}});
    HttpResponse r = call("PUT", "/worksheet-formula", {{"sheet", "T"}, {"source", "=Sheet1 *"}});
    EXPECT_EQ(r.status, 400);
    json e = json::parse(r.body);
    EXPECT_EQ(e["error_kind"], "ParseError");
    EXPECT_EQ(e["position"], 10);
    r = call("PUT", "/worksheet-formula", {{"sheet", "T"}, {"source", "=T + 1"}});
    EXPECT_EQ(r.status, 409);
    json s = ok("PUT", "/worksheet-formula", {{"sheet", "T"}, {"source", "=Sheet1 * 2"}});
    EXPECT_EQ(s["sheets"][1]["derived"], true);
    EXPECT_EQ(s["sheets"][1]["worksheet_formula"], "=Sheet1 * 2");
    r = call("PUT", "/cell", {{"sheet", "T"}, {"addr", "A1"}, {"raw", "1"}});
    EXPECT_EQ(r.status, 409);
    s = ok("PUT", "/worksheet-formula", {{"sheet", "T"}, {"source", nullptr}});
    EXPECT_EQ(s["sheets"][1]["derived"], false);
}

TEST_F(ServiceTest, TypesFormatsAndOverrides) {
    ok("PUT", "/enforced-type", {{"sheet", "Sheet1"}, {"addr", "B1"}, {"type", "TEXT"}});
    json s = ok("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "B1"}, {"raw", "007"}});
    EXPECT_EQ((*cell(s, "Sheet1", "B1"))["value"], "007");
    EXPECT_EQ((*cell(s, "Sheet1", "B1"))["enforced_type"], "TEXT");
    s = ok("PUT", "/format", {{"sheet", "Sheet1"}, {"addr", "B1"}, {"format", "bold"}});
    EXPECT_EQ((*cell(s, "Sheet1", "B1"))["format"], "bold");
    HttpResponse r = call("PUT", "/enforced-type", {{"sheet", "Sheet1"}, {"addr", "B1"}, {"type", "DATE"}});
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(json::parse(r.body)["error_kind"], "TypeConformanceError");

    ok("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A1"}, {"raw", "100"}});
    s = ok("PUT", "/section", {{"kind", "POST_FORMULAE"}, {"text", "workbook[\"Sheet1\"].A1.value = 42\n"}});
    const json* a1 = cell(s, "Sheet1", "A1");
    EXPECT_EQ((*a1)["value"], 42);
    EXPECT_EQ((*a1)["overridden"], true);
    EXPECT_EQ((*a1)["original"], 100.0);
    EXPECT_EQ((*a1)["stored"], "100");
}

TEST_F(ServiceTest, SectionDiagnosticsAndErrors) {
    json s = ok("PUT", "/section", {{"kind", "PRE_FORMULAE"}, {"text", "def f(:\n"}});
    EXPECT_FALSE(s["sections"][3]["diagnostic"].is_null());
    ASSERT_EQ(s["errors"].size(), 1u);
    EXPECT_EQ(s["errors"][0]["kind"], "SyntaxError");
    s = ok("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "C3"}, {"raw", "=nope()"}});
    bool found = false;
    for (const auto& e : s["errors"]) {
        if (e["kind"] == "NameError") {
            found = true;
            EXPECT_EQ(e["cell"]["addr"], "C3");
            EXPECT_EQ(e["stack"][0]["section"], "FORMULAE");
        }
    }
    EXPECT_TRUE(found);
    EXPECT_EQ((*cell(s, "Sheet1", "C3"))["value"]["error"], "NAME");
}

TEST_F(ServiceTest, DataSourcesAndExports) {
    dir.write("sales.csv", "a,b\n1,2\n");
    json s = ok("POST", "/data-source", {{"sheet", "sales"}, {"path", "sales.csv"}, {"header", true}});
    EXPECT_EQ(s["sheets"][1]["data_source"]["path"], "sales.csv");
    EXPECT_EQ((*cell(s, "sales", "B2"))["value"], 2.0);
    EXPECT_EQ(call("POST", "/data-source", {{"sheet", "sales"}, {"path", "x.csv"}, {"header", false}}).status, 409);
    ok("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A1"}, {"raw", "=sales!B2*2"}});

    HttpResponse standalone = call("GET", "/export/standalone");
    EXPECT_EQ(standalone.status, 200);
    EXPECT_NE(standalone.body.find("standalone epilogue"), std::string::npos);
    EXPECT_NE(standalone.content_type.find("text/plain"), std::string::npos);
    HttpResponse data = call("GET", "/export/data-only");
    EXPECT_EQ(data.body.find("=sales!B2*2"), std::string::npos);
    EXPECT_EQ(data.body.find("load_csv"), std::string::npos);
    EXPECT_EQ(call("GET", "/export/library").status, 200);

    s = ok("DELETE", "/data-source", {{"sheet", "sales"}});
    EXPECT_TRUE(s["sheets"][1]["data_source"].is_null());
    EXPECT_EQ(call("DELETE", "/data-source", {{"sheet", "sales"}}).status, 400);
}

TEST_F(ServiceTest, ConcurrentReadersDuringWrites) {
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::thread reader([&] {
        while (!stop) {
            HttpResponse r = svc->handle("GET", "/workbook", "");
            if (r.status != 200 || json::parse(r.body)["sheets"].empty()) ++bad;
        }
    });
    for (int i = 1; i <= 30; ++i) {
        call("PUT", "/cell", {{"sheet", "Sheet1"}, {"addr", "A" + std::to_string(i)}, {"raw", std::to_string(i)}});
    }
    stop = true;
    reader.join();
    EXPECT_EQ(bad, 0);
    EXPECT_EQ(load_file(file).sheet("Sheet1").cells.size(), 30u);
}

TEST(ServiceSocket, ServesOverHttp) {
    tabula_test::TempDir dir;
    const auto file = dir / "net.rsw";
    save_file(file, new_workbook());
    Service svc(file, load_file(file));
    const int port = svc.bind_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { svc.listen_after_bind(); });
    httplib::Client client("127.0.0.1", port);
    auto get = client.Get("/workbook");
    ASSERT_TRUE(get);
    EXPECT_EQ(get->status, 200);
    auto put = client.Put("/cell", json{{"sheet", "Sheet1"}, {"addr", "A1"}, {"raw", "=2*21"}}.dump(), "application/json");
    ASSERT_TRUE(put);
    EXPECT_EQ(put->status, 200);
    EXPECT_EQ(json::parse(put->body)["sheets"][0]["cells"][0]["value"], 42);
    auto missing = client.Get("/nope");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    svc.stop();
    t.join();
}
