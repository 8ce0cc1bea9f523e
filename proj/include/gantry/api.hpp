#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>

#include "gantry/error.hpp"
#include "gantry/jobs.hpp"
#include "json.hpp"

namespace gantry {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;

  bool ok() const { return status == 200; }
};

using Query = std::map<std::string, std::string>;

/// {"error": text, "code": name} with the error's HTTP status.
ApiResponse error_response(const Error& e);

/// Route table of the /2 API, independent of any transport.
class ApiRouter {
 public:
  explicit ApiRouter(Service& service) : service_(service) {}

  ApiResponse handle(const std::string& method, const std::string& path, const Query& query,
                     const std::string& body) const;

  /// Upper bound on one long-poll, wall clock.
  static constexpr int kMaxWaitMs = 30000;

 private:
  ApiResponse dispatch(const std::string& method, const std::vector<std::string>& seg,
                       const Query& query, const nlohmann::json& body) const;
  ApiResponse submit(const std::string& op, const nlohmann::json& params) const;

  Service& service_;
};

/// What the CLI talks to: one request, one response.
class ApiClient {
 public:
  virtual ~ApiClient() = default;
  virtual ApiResponse call(const std::string& method, const std::string& path, const Query& query = {},
                           const nlohmann::json& body = nullptr) = 0;

  ApiResponse get(const std::string& path, const Query& query = {}) { return call("GET", path, query); }
  ApiResponse post(const std::string& path, const nlohmann::json& body) { return call("POST", path, {}, body); }
};

/// Calls the router directly (tests, scenario runner).
class InProcessClient : public ApiClient {
 public:
  explicit InProcessClient(const ApiRouter& router) : router_(router) {}
  ApiResponse call(const std::string& method, const std::string& path, const Query& query,
                   const nlohmann::json& body) override;

 private:
  const ApiRouter& router_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 5080;
};

/// "host:port"; throws kUsageError.
Endpoint parse_endpoint(const std::string& text);
/// GANTRY_ADDR, else 127.0.0.1:5080.
Endpoint default_endpoint();

/// Talks to gantryd over HTTP. Connection failures throw kDaemonUnreachable.
class HttpApiClient : public ApiClient {
 public:
  explicit HttpApiClient(Endpoint endpoint);
  ~HttpApiClient() override;
  ApiResponse call(const std::string& method, const std::string& path, const Query& query,
                   const nlohmann::json& body) override;

 private:
  struct Impl;
  Endpoint endpoint_;
  std::unique_ptr<Impl> impl_;
};

/// HTTP front end for a router.
class HttpServer {
 public:
  explicit HttpServer(const ApiRouter& router);
  ~HttpServer();

  /// Binds; port 0 picks a free one. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gantry
