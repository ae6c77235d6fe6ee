#pragma once

// JSON-over-HTTP front end for one workbook file. handle() is the whole protocol; listen()
// only adapts it to a socket.

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "tabula/engine.hpp"

namespace tabula {

/// Reads a document; the workbook name is the file stem. Throws FormatError, and Error
/// ("IOError") for unreadable files.
Workbook load_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
void save_file(const std::filesystem::path& path, const Workbook& wb);

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class Service {
public:
    /// Serves `wb`, persisting every accepted mutation to `file`.
    Service(std::filesystem::path file, Workbook wb, script::ExecOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    HttpResponse handle(std::string_view method, std::string_view path, std::string_view body);

    /// Binds and serves until stop(). Returns false if the address cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();

    Workbook snapshot() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tabula
