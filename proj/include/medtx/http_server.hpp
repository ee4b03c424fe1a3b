#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "medtx/errors.hpp"
#include "medtx/service.hpp"

namespace httplib {
class Server;
}

namespace medtx {

/// JSON-over-HTTP front end for ClassificationService. Errors are returned as
/// {"error_code", "message"} with 401 / 404 / 422 (500 for anything else).
/// When `static_dir` is set, files under it are served from "/".
class HttpServer {
 public:
  explicit HttpServer(ClassificationService& service, std::optional<std::filesystem::path> static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds an ephemeral port and returns it; -1 on failure.
  int bind_to_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  void install_routes();

  ClassificationService& service_;
  std::unique_ptr<httplib::Server> server_;
};

int http_status(ErrorKind kind);

}  // namespace medtx
