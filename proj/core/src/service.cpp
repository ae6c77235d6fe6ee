#include "tabula/service.hpp"

#include <fstream>
#include <future>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "tabula/errors.hpp"

namespace tabula {

using nlohmann::json;

Workbook load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IOError", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load(buf.str(), path.stem().string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    namespace fs = std::filesystem;
    std::random_device rd;
    const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("IOError", "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) throw Error("IOError", "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("IOError", "cannot replace " + path.string());
    }
}

void save_file(const std::filesystem::path& path, const Workbook& wb) { write_file_atomic(path, save(wb)); }

namespace {

json value_json(const Value& v) {
    struct Visitor {
        json operator()(Empty) const { return nullptr; }
        json operator()(double d) const { return d; }
        json operator()(std::int64_t i) const { return i; }
        json operator()(const std::string& s) const { return s; }
        json operator()(bool b) const { return b; }
        json operator()(const Date& d) const { return d.iso(); }
        json operator()(const ListValue& l) const {
            json out = json::array();
            for (const auto& item : l.items) out.push_back(value_json(item));
            return out;
        }
        json operator()(const ErrorValue& e) const { return {{"error", std::string(to_string(e.kind))}}; }
    };
    return std::visit(Visitor{}, v.storage());
}

json bounds_json(const BoundsRect& b) {
    if (b.empty) return {{"empty", true}};
    return {{"empty", false}, {"min", b.min.a1()}, {"max", b.max.a1()}};
}

json state_json(const Workbook& wb, const RecalcResult& r) {
    json sheets = json::array();
    for (const auto& ws : wb.sheets) {
        const script::ResultSheet* rs = r.grid.find(ws.name);
        std::set<CellAddress> addrs;
        for (const auto& [a, c] : ws.cells) addrs.insert(a);
        if (rs) {
            for (const auto& [a, c] : rs->cells) addrs.insert(a);
        }
        json cells = json::array();
        for (const auto& a : addrs) {
            const Cell* stored = ws.find(a);
            const script::ResultCell* rc = nullptr;
            if (rs) {
                if (auto it = rs->cells.find(a); it != rs->cells.end()) rc = &it->second;
            }
            const Value v = rc ? rc->value : Value::empty();
            json cell{{"addr", a.a1()},
                      {"stored", stored ? json(stored_text(*stored)) : json(nullptr)},
                      {"formula", stored && stored->is_formula()},
                      {"value", value_json(v)},
                      {"display", display(v)},
                      {"type", std::string(v.type_name())},
                      {"overridden", rc && rc->overridden}};
            if (rc && rc->original) cell["original"] = value_json(*rc->original);
            const auto type = stored && stored->enforced_type ? stored->enforced_type
                                                              : (rc ? rc->enforced_type : std::nullopt);
            cell["enforced_type"] = type ? json(std::string(to_string(*type))) : json(nullptr);
            const auto fmt = rs ? rs->format_at(a) : effective_format(ws, a, stored ? stored->format : std::nullopt);
            cell["format"] = fmt ? json(fmt->canonical()) : json(nullptr);
            cells.push_back(std::move(cell));
        }
        json sheet{{"name", ws.name},
                   {"bounds", bounds_json(rs ? rs->bounds() : BoundsRect{})},
                   {"cells", std::move(cells)},
                   {"derived", ws.derived()},
                   {"worksheet_formula", ws.worksheet_formula ? json(ws.worksheet_formula->text) : json(nullptr)}};
        if (const DataSource* ds = wb.data_source_for(ws.name)) {
            sheet["data_source"] = {{"path", ds->path}, {"header", ds->has_header}};
        } else {
            sheet["data_source"] = nullptr;
        }
        sheets.push_back(std::move(sheet));
    }
    json sections = json::array();
    for (const auto& s : r.program.sections) {
        json section{{"kind", std::string(to_string(s.kind))},
                     {"editable", s.editable},
                     {"text", s.text},
                     {"first_line", s.first_line},
                     {"diagnostic", nullptr}};
        if (s.editable) {
            if (auto d = script::check_syntax(s.text)) {
                section["diagnostic"] = {{"line", d->line}, {"column", d->column}, {"message", d->message}};
            }
        }
        sections.push_back(std::move(section));
    }
    json line_map = json::array();
    for (const auto& [cell, line] : r.program.line_map.cell_to_line) {
        line_map.push_back({{"sheet", cell.first}, {"addr", cell.second.a1()}, {"line", line}});
    }
    json errors = json::array();
    for (const auto& e : r.errors) {
        json stack = json::array();
        for (const auto& f : e.stack) {
            stack.push_back({{"section", std::string(to_string(f.section))}, {"line", f.line}, {"function", f.function}});
        }
        json err{{"kind", e.kind}, {"message", e.message}, {"stack", std::move(stack)}};
        if (e.cell) {
            err["cell"] = {{"sheet", e.cell->first}, {"addr", e.cell->second.a1()}};
        } else {
            err["cell"] = nullptr;
        }
        errors.push_back(std::move(err));
    }
    return {{"workbook", wb.name},     {"locked", wb.locked},   {"sheets", std::move(sheets)},
            {"sections", std::move(sections)}, {"line_map", std::move(line_map)}, {"output", r.output},
            {"errors", std::move(errors)},     {"incomplete", r.incomplete}};
}

HttpResponse error_response(int status, const std::string& kind, const std::string& message,
                            std::optional<std::size_t> position = std::nullopt) {
    json body{{"error_kind", kind}, {"message", message}};
    if (position) body["position"] = *position;
    return {status, body.dump(), "application/json"};
}

int status_for(const std::string& kind) {
    if (kind == "LockedError" || kind == "SheetInUse" || kind == "DerivedSheetError" || kind == "DerivedCycle") {
        return 409;
    }
    return 400;
}

struct BadRequest : Error {
    explicit BadRequest(const std::string& message) : Error("BadRequest", message) {}
};

const json& field(const json& body, const char* name) {
    if (!body.is_object() || !body.contains(name)) throw BadRequest(std::string("missing field \"") + name + "\"");
    return body.at(name);
}

std::string text_field(const json& body, const char* name) {
    const json& f = field(body, name);
    if (!f.is_string()) throw BadRequest(std::string("field \"") + name + "\" must be a string");
    return f.get<std::string>();
}

std::optional<std::string> optional_text(const json& body, const char* name) {
    if (!body.is_object() || !body.contains(name) || body.at(name).is_null()) return std::nullopt;
    return text_field(body, name);
}

}  // namespace

struct Service::Impl {
    std::filesystem::path file;
    script::ExecOptions options;

    std::mutex writer;                // one mutation at a time
    mutable std::shared_mutex state;  // guards the published snapshot below
    Workbook wb;
    std::string state_body;

    httplib::Server server;

    void publish(Workbook next) {
        const Workbook copy = next;
        const script::ExecOptions opts = options;
        RecalcResult r = std::async(std::launch::async, [copy, opts] { return recalculate(copy, opts); }).get();
        std::string body = state_json(next, r).dump();
        std::unique_lock lock(state);
        wb = std::move(next);
        state_body = std::move(body);
    }

    Workbook current() const {
        std::shared_lock lock(state);
        return wb;
    }

    HttpResponse current_state() const {
        std::shared_lock lock(state);
        return {200, state_body, "application/json"};
    }

    HttpResponse mutate(const std::function<Workbook(const Workbook&)>& edit) {
        std::lock_guard guard(writer);
        Workbook next = edit(current());
        save_file(file, next);
        publish(std::move(next));
        return current_state();
    }

    HttpResponse dispatch(std::string_view method, std::string_view path, std::string_view raw_body) {
        auto parse_body = [&]() -> json {
            if (raw_body.empty()) return json::object();
            try {
                return json::parse(raw_body);
            } catch (const json::exception& e) {
                throw BadRequest(std::string("malformed JSON: ") + e.what());
            }
        };
        const std::string route = std::string(method) + " " + std::string(path);
        if (route == "GET /workbook") return current_state();
        if (route == "GET /export/standalone") return {200, export_standalone(current()), "text/plain"};
        if (route == "GET /export/library") return {200, export_library(current()), "text/plain"};
        if (route == "GET /export/data-only") return {200, save(extract_data(current())), "text/plain"};
        if (route == "POST /lock") return mutate([](const Workbook& w) { return lock(w); });
        if (route == "POST /unlock") return mutate([](const Workbook& w) { return unlock(w); });
        if (route == "PUT /cell") {
            const json body = parse_body();
            const std::string sheet = text_field(body, "sheet");
            const CellAddress addr = CellAddress::from_a1(text_field(body, "addr"));
            const std::string raw = text_field(body, "raw");
            return mutate([&](const Workbook& w) { return set_cell(w, sheet, addr, raw); });
        }
        if (route == "PUT /section") {
            const json body = parse_body();
            const std::string kind_text = text_field(body, "kind");
            const std::string text = text_field(body, "text");
            auto kind = parse_section_kind(kind_text);
            if (!kind) throw InvalidArgumentError("unknown section kind \"" + kind_text + "\"");
            auto user = user_section_of(*kind);
            if (!user) throw NotEditableError("section " + kind_text + " is generated and cannot be edited");
            return mutate([&](const Workbook& w) { return set_user_section(w, *user, text).workbook; });
        }
        if (route == "PUT /worksheet-formula") {
            const json body = parse_body();
            const std::string sheet = text_field(body, "sheet");
            const auto source = optional_text(body, "source");
            return mutate([&](const Workbook& w) { return set_worksheet_formula(w, sheet, source); });
        }
        if (route == "PUT /enforced-type") {
            const json body = parse_body();
            const std::string sheet = text_field(body, "sheet");
            const CellAddress addr = CellAddress::from_a1(text_field(body, "addr"));
            std::optional<EnforcedType> type;
            if (auto t = optional_text(body, "type")) {
                type = parse_enforced_type(*t);
                if (!type) throw InvalidArgumentError("unknown type \"" + *t + "\"");
            }
            return mutate([&](const Workbook& w) { return set_enforced_type(w, sheet, addr, type); });
        }
        if (route == "PUT /format") {
            const json body = parse_body();
            const std::string sheet = text_field(body, "sheet");
            const CellAddress addr = CellAddress::from_a1(text_field(body, "addr"));
            std::optional<FormatSpec> spec;
            if (auto f = optional_text(body, "format")) spec = FormatSpec::parse(*f);
            return mutate([&](const Workbook& w) { return set_format(w, sheet, addr, spec); });
        }
        if (route == "POST /sheet") {
            const json body = parse_body();
            const std::string name = text_field(body, "name");
            return mutate([&](const Workbook& w) { return add_sheet(w, name); });
        }
        if (route == "POST /data-source") {
            const json body = parse_body();
            DataSource ds;
            ds.target_sheet = text_field(body, "sheet");
            ds.path = text_field(body, "path");
            if (body.contains("header")) {
                if (!body.at("header").is_boolean()) throw BadRequest("field \"header\" must be a boolean");
                ds.has_header = body.at("header").get<bool>();
            }
            return mutate([&](const Workbook& w) { return attach_data_source(w, ds); });
        }
        if (route == "DELETE /data-source") {
            const json body = parse_body();
            const std::string sheet = text_field(body, "sheet");
            return mutate([&](const Workbook& w) { return detach_data_source(w, sheet); });
        }
        return error_response(404, "NotFound", "no route for " + route);
    }
};

Service::Service(std::filesystem::path file, Workbook wb, script::ExecOptions options)
    : impl_(std::make_unique<Impl>()) {
    impl_->file = std::move(file);
    impl_->options = std::move(options);
    impl_->publish(std::move(wb));

    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type.c_str());
    };
    for (const char* route : {"/workbook", "/export/standalone", "/export/library", "/export/data-only"}) {
        impl_->server.Get(route, adapt);
    }
    for (const char* route : {"/lock", "/unlock", "/sheet", "/data-source"}) impl_->server.Post(route, adapt);
    for (const char* route : {"/cell", "/section", "/worksheet-formula", "/enforced-type", "/format"}) {
        impl_->server.Put(route, adapt);
    }
    impl_->server.Delete("/data-source", adapt);
}

Service::~Service() { stop(); }

HttpResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
    try {
        return impl_->dispatch(method, path, body);
    } catch (const SyntaxError& e) {
        return error_response(400, e.kind(), e.what(), e.column());
    } catch (const Error& e) {
        return error_response(e.kind() == "IOError" ? 500 : status_for(e.kind()), e.kind(), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "InternalError", e.what());
    }
}

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_) impl_->server.stop();
}

Workbook Service::snapshot() const { return impl_->current(); }

}  // namespace tabula
