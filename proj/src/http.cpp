#include "gantry/api.hpp"

#include <atomic>
#include <thread>

#include "gantry/error.hpp"
#include "httplib.h"

namespace gantry {

using nlohmann::json;

struct HttpApiClient::Impl {
  explicit Impl(const Endpoint& ep) : client(ep.host, ep.port) {
    client.set_connection_timeout(2, 0);
    // Long-polls are bounded server-side; leave headroom.
    client.set_read_timeout(ApiRouter::kMaxWaitMs / 1000 + 10, 0);
  }
  httplib::Client client;
};

HttpApiClient::HttpApiClient(Endpoint endpoint)
    : endpoint_(std::move(endpoint)), impl_(std::make_unique<Impl>(endpoint_)) {}

HttpApiClient::~HttpApiClient() = default;

ApiResponse HttpApiClient::call(const std::string& method, const std::string& path, const Query& query,
                                const json& body) {
  httplib::Params params(query.begin(), query.end());
  const std::string target = query.empty() ? path : httplib::append_query_params(path, params);
  httplib::Result res = method == "POST"
                            ? impl_->client.Post(target, body.is_null() ? std::string("{}") : body.dump(),
                                                 "application/json")
                            : impl_->client.Get(target);
  if (!res) {
    throw Error(ErrorCode::kDaemonUnreachable, "Cannot reach the cluster daemon at " + endpoint_.host + ":" +
                                                   std::to_string(endpoint_.port) + ": " +
                                                   httplib::to_string(res.error()));
  }
  ApiResponse out;
  out.status = res->status;
  try {
    out.body = res->body.empty() ? json() : json::parse(res->body);
  } catch (const json::exception&) {
    out.body = {{"error", res->body}, {"code", "bad-response"}};
  }
  return out;
}

struct HttpServer::Impl {
  httplib::Server server;
  bool bound = false;
  std::atomic<bool> served{false};
};

HttpServer::HttpServer(const ApiRouter& router) : impl_(std::make_unique<Impl>()) {
  auto handler = [&router](const httplib::Request& req, httplib::Response& res) {
    Query query(req.params.begin(), req.params.end());
    ApiResponse r = router.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() {
  // httplib only closes a listening socket it is serving on, so a bound but
  // never served socket is served briefly to release it.
  if (impl_->bound && !impl_->served) {
    std::thread t([this] { serve(); });
    impl_->server.wait_until_ready();
    stop();
    t.join();
  }
  stop();
}

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  impl_->bound = bound > 0;
  return bound;
}

void HttpServer::serve() {
  impl_->served = true;
  impl_->server.listen_after_bind();
}

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace gantry
