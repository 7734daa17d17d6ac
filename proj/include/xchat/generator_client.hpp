#pragma once

// HTTP client for the external generator, and a stub server that speaks the
// same contract (echo or replay) for tests and demos.

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xchat/error.hpp"
#include "xchat/responder.hpp"

namespace xchat::generator {

using responder::GenerateRequest;
using responder::GeneratorConfig;

/// Plain SO_REUSEADDR; httplib's default also sets SO_REUSEPORT, which lets a
/// second server bind an occupied port.
inline void exclusive_socket_options(socket_t sock) {
  int yes = 1;
  setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
}

/// Splits "http://host:port/base" into the client origin and path prefix.
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "generator endpoint needs a scheme: " + endpoint);
  auto path = endpoint.find('/', scheme + 3);
  if (path == std::string::npos) return {endpoint, ""};
  auto base = endpoint.substr(path);
  while (!base.empty() && base.back() == '/') base.pop_back();
  return {endpoint.substr(0, path), base};
}

inline responder::GeneratorFn http_generator(GeneratorConfig cfg) {
  cfg.validate();
  auto [origin, base] = split_endpoint(cfg.endpoint);
  return [origin, base, cfg](const GenerateRequest& req) -> std::string {
    httplib::Client cli(origin);
    auto secs = static_cast<time_t>(cfg.timeout_s);
    auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post(base + "/generate", responder::request_to_json(req).dump(), "application/json");
    if (!res) throw Error(ErrorCode::GeneratorUnavailable, "request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::GeneratorUnavailable, "status " + std::to_string(res->status));
    return responder::parse_generate_reply(res->body);
  };
}

/// Validates a /generate request body against the wire contract.
inline bool valid_generate_request(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("session_id") || !j["session_id"].is_string() || !j.contains("message") ||
      !j["message"].is_string() || !j.contains("history") || !j["history"].is_array()) {
    return false;
  }
  for (const auto& t : j["history"]) {
    if (!t.is_object() || !t.contains("speaker") || !t.contains("text") || !t["text"].is_string()) return false;
    if (t["speaker"] != "user" && t["speaker"] != "bot") return false;
  }
  return true;
}

/// Echoes "ok: <message>", or replays a fixed list of replies in order
/// (then repeats the last one).
class StubGenerator {
 public:
  StubGenerator() = default;
  explicit StubGenerator(std::vector<std::string> replay) : replay_(std::move(replay)) {}
  ~StubGenerator() { stop(); }
  StubGenerator(const StubGenerator&) = delete;
  StubGenerator& operator=(const StubGenerator&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    server_.set_socket_options(exclusive_socket_options);
    server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !valid_generate_request(j)) {
        res.status = 400;
        res.set_content(R"({"error":"malformed request"})", "application/json");
        return;
      }
      std::string text;
      {
        std::lock_guard lock(mu_);
        requests_.push_back(j);
        if (replay_.empty()) {
          text = "ok: " + j["message"].get<std::string>();
        } else {
          text = replay_[std::min(next_, replay_.size() - 1)];
          ++next_;
        }
      }
      res.set_content(nlohmann::json{{"text", text}}.dump(), "application/json");
    });
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::PortInUse, host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::vector<nlohmann::json> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

  /// Asks the server to stop without waiting; safe from another thread.
  void shutdown() { server_.stop(); }

  /// Blocks until the server stops.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::vector<std::string> replay_;
  size_t next_ = 0;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> requests_;
};

}  // namespace xchat::generator
