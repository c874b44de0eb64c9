#pragma once

#include <memory>
#include <optional>
#include <string>

namespace lqm::server {

struct ServerOptions {
  std::string data_dir;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Required for project creation and accepted everywhere when set.
  std::optional<std::string> admin_token;
};

class HttpServer {
 public:
  explicit HttpServer(ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Loads the store and binds the socket; returns the bound port.
  int bind();
  /// Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lqm::server
