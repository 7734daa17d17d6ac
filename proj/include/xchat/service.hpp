#pragma once

// HTTP+JSON API over a loaded engine snapshot.
//
//   POST /api/sessions                       {level, topic?, generator}
//   POST /api/sessions/{id}/messages         {text}
//   GET  /api/responses/{id}/explanation
//   GET  /api/graph/neighborhood?entity=&depth=
//   GET  /api/graph/export?format=import-script|structured
//   GET  /api/documents/{doc_id}
//   GET  /api/healthz
//
// Errors are {"code", "message"} with 400 / 404 / 503 / 500.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xchat/error.hpp"
#include "xchat/explainer.hpp"
#include "xchat/generator_client.hpp"
#include "xchat/ontology_graph.hpp"
#include "xchat/responder.hpp"
#include "xchat/util.hpp"
#include "xchat/workspace.hpp"

namespace xchat::service {

using nlohmann::json;

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "data";
  std::filesystem::path lexicon_dir;
  std::optional<responder::GeneratorConfig> generator;  // none: retrieval only
  std::vector<std::string> cors_allowed_origins;
  std::string log_level = "info";
  size_t provenance_k = 3;

  void validate() const {
    if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port must be in [1, 65535] (0 picks a free port)");
    if (!std::filesystem::is_directory(data_dir)) throw Error(ErrorCode::SnapshotMissing, "data_dir " + data_dir.string() + " does not exist");
    if (generator) generator->validate();
    if (log_level != "debug" && log_level != "info" && log_level != "warn" && log_level != "error") {
      throw Error(ErrorCode::InvalidArgument, "log_level must be debug, info, warn or error");
    }
  }
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : util::split(s, ',')) {
    auto t = util::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

/// JSON config file (any subset of fields), then XCHAT_* environment overrides.
inline ServerConfig load_config(const std::optional<std::filesystem::path>& file, ServerConfig cfg = {}) {
  if (file) {
    json j;
    try {
      j = json::parse(util::read_file(*file));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, file->string() + ": " + e.what());
    }
    auto base = file->parent_path();
    auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p; };
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    if (j.contains("data_dir")) cfg.data_dir = resolve(j["data_dir"].get<std::string>());
    if (j.contains("lexicon_dir")) cfg.lexicon_dir = resolve(j["lexicon_dir"].get<std::string>());
    if (j.contains("generator") && !j["generator"].is_null()) {
      responder::GeneratorConfig g;
      g.endpoint = j["generator"].at("endpoint").get<std::string>();
      g.timeout_s = j["generator"].value("timeout_s", g.timeout_s);
      g.max_history_turns = j["generator"].value("max_history_turns", g.max_history_turns);
      cfg.generator = g;
    }
    if (j.contains("cors_allowed_origins")) cfg.cors_allowed_origins = j["cors_allowed_origins"].get<std::vector<std::string>>();
    cfg.log_level = j.value("log_level", cfg.log_level);
    cfg.provenance_k = j.value("provenance_k", cfg.provenance_k);
  }
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    return v && *v ? std::optional<std::string>(v) : std::nullopt;
  };
  if (auto v = env("XCHAT_HOST")) cfg.host = *v;
  if (auto v = env("XCHAT_PORT")) {
    try {
      cfg.port = std::stoi(*v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "XCHAT_PORT is not a number");
    }
  }
  if (auto v = env("XCHAT_DATA_DIR")) cfg.data_dir = *v;
  if (auto v = env("XCHAT_LEXICON_DIR")) cfg.lexicon_dir = *v;
  if (auto v = env("XCHAT_GENERATOR_ENDPOINT")) {
    if (!cfg.generator) cfg.generator = responder::GeneratorConfig{};
    cfg.generator->endpoint = *v;
  }
  if (auto v = env("XCHAT_GENERATOR_TIMEOUT"); v && cfg.generator) cfg.generator->timeout_s = std::stod(*v);
  if (auto v = env("XCHAT_CORS_ORIGINS")) cfg.cors_allowed_origins = split_list(*v);
  if (auto v = env("XCHAT_LOG_LEVEL")) cfg.log_level = *v;
  return cfg;
}

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::MalformedRecord:
    case ErrorCode::MalformedLine:
    case ErrorCode::Unimplemented:
      return 400;
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownResponse:
    case ErrorCode::UnknownDocId:
    case ErrorCode::UnknownEntity:
      return 404;
    case ErrorCode::GeneratorUnavailable:
    case ErrorCode::IndexUnavailable:
    case ErrorCode::LookupUnavailable:
      return 503;
    default:
      return 500;
  }
}

class Service {
 public:
  explicit Service(ServerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    reload();
    sessions_ = std::make_unique<responder::SessionStore>(workspace::Paths{cfg_.data_dir}.sessions());
    reports_ = std::make_unique<responder::ReportStore>(workspace::Paths{cfg_.data_dir}.reports());
    if (cfg_.generator) external_ = generator::http_generator(*cfg_.generator);
    routes();
  }

  ~Service() { stop(); }
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Re-reads the snapshot from data_dir and swaps it in atomically.
  void reload() {
    explain::ExplainConfig ec;
    ec.k = cfg_.provenance_k;
    auto fresh = workspace::Engine::open(cfg_.data_dir, text::Lexicon::load(cfg_.lexicon_dir), ec);
    std::unique_lock lock(engine_mu_);
    engine_ = std::shared_ptr<workspace::Engine>(std::move(fresh));
  }

  /// Binds and serves on a background thread; returns the bound port.
  int start() {
    if (cfg_.port == 0) {
      port_ = server_.bind_to_any_port(cfg_.host);
    } else {
      port_ = server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
    }
    if (port_ < 0) throw Error(ErrorCode::PortInUse, cfg_.host + ":" + std::to_string(cfg_.port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    log("info", "listening on " + cfg_.host + ":" + std::to_string(port_));
    return port_;
  }

  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  /// Asks the server to stop without waiting; safe from another thread.
  void shutdown() { server_.stop(); }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }
  const ServerConfig& config() const { return cfg_; }

 private:
  struct SessionSlot {
    std::mutex mu;
    responder::ChatSession session;
  };

  std::shared_ptr<workspace::Engine> engine() const {
    std::shared_lock lock(engine_mu_);
    return engine_;
  }

  void log(const std::string& level, const std::string& msg) const {
    static const std::map<std::string, int> rank = {{"debug", 0}, {"info", 1}, {"warn", 2}, {"error", 3}};
    if (rank.at(level) < rank.at(cfg_.log_level)) return;
    std::cerr << util::utc_timestamp() << " " << level << " " << msg << "\n";
  }

  static void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  }

  static void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, {{"code", std::string(to_string(code))}, {"message", message}}, http_status(code));
  }

  static json parse_body(const httplib::Request& req) {
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
  }

  template <typename F>
  httplib::Server::Handler guarded(F&& f) {
    return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        log(http_status(e.code()) >= 500 ? "error" : "debug", std::string(e.what()));
        send_error(res, e.code(), e.what());
      } catch (const json::exception& e) {
        send_error(res, ErrorCode::InvalidArgument, e.what());
      } catch (const std::exception& e) {
        log("error", e.what());
        send_json(res, {{"code", "Internal"}, {"message", e.what()}}, 500);
      }
    };
  }

  std::shared_ptr<SessionSlot> slot(const std::string& id) {
    std::lock_guard lock(sessions_mu_);
    auto it = live_.find(id);
    if (it != live_.end()) return it->second;
    auto s = std::make_shared<SessionSlot>();
    s->session = sessions_->load(id);  // UnknownSession when absent
    live_.emplace(id, s);
    return s;
  }

  void routes() {
    server_.set_socket_options(generator::exclusive_socket_options);
    server_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      auto origin = req.get_header_value("Origin");
      if (!origin.empty()) {
        for (const auto& allowed : cfg_.cors_allowed_origins) {
          if (allowed == "*" || allowed == origin) {
            res.set_header("Access-Control-Allow-Origin", allowed == "*" ? "*" : origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            break;
          }
        }
      }
      if (req.method == "OPTIONS") {
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      log("debug", req.method + " " + req.path + " " + std::to_string(res.status));
    });

    server_.Get("/api/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}, {"snapshot", workspace::snapshot_to_json(engine()->snapshot)}});
    }));

    server_.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("level") || !body["level"].is_string()) throw Error(ErrorCode::InvalidArgument, "level is required");
      auto level = responder::parse_level(body["level"].get<std::string>());
      std::optional<std::string> topic;
      if (body.contains("topic") && !body["topic"].is_null()) topic = body["topic"].get<std::string>();
      auto gen = responder::parse_generator(body.value("generator", std::string("retrieval")));
      auto session = sessions_->create(level, topic, gen);
      {
        std::lock_guard lock(sessions_mu_);
        auto s = std::make_shared<SessionSlot>();
        s->session = session;
        live_[session.session_id] = s;
      }
      send_json(res, {{"session_id", session.session_id}}, 201);
    }));

    server_.Post(R"(/api/sessions/([A-Za-z0-9_-]+)/messages)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("text") || !body["text"].is_string()) throw Error(ErrorCode::InvalidArgument, "text is required");
      auto s = slot(req.matches[1]);
      auto eng = engine();
      std::lock_guard lock(s->mu);
      responder::Responder r(eng->lex, eng->utterances, *eng->explainer, *sessions_, *reports_);
      if (external_ && cfg_.generator) r.set_external(external_, *cfg_.generator);
      auto out = r.converse(s->session, body["text"].get<std::string>());
      send_json(res, {{"response", out.response}, {"response_id", out.response_id}, {"generator", out.report.generator}});
    }));

    server_.Get(R"(/api/responses/([A-Za-z0-9_-]+)/explanation)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, explain::report_to_json(reports_->load(req.matches[1])));
    }));

    server_.Get("/api/graph/neighborhood", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("entity")) throw Error(ErrorCode::InvalidArgument, "entity is required");
      int depth = 1;
      if (req.has_param("depth")) {
        try {
          depth = std::stoi(req.get_param_value("depth"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "depth must be an integer");
        }
      }
      auto eng = engine();
      auto entity = graph::canonical_label(req.get_param_value("entity"), eng->lex);
      send_json(res, graph::subgraph_to_json(graph::neighborhood(eng->graph, entity, depth)));
    }));

    server_.Get("/api/graph/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto format = req.has_param("format") ? req.get_param_value("format") : "structured";
      auto eng = engine();
      if (format == "structured") {
        send_json(res, graph::export_structured(eng->graph));
      } else if (format == "import-script") {
        send_json(res, {{"format", "import-script"}, {"graph_id", eng->graph.graph_id()}, {"script", graph::export_import_script(eng->graph)}});
      } else {
        throw Error(ErrorCode::InvalidArgument, "format must be import-script or structured");
      }
    }));

    server_.Get(R"(/api/documents/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, corpus::document_to_json(engine()->corpus.get_document(req.matches[1])));
    }));

    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        auto code = res.status == 404 ? "NotFound" : "HttpError";
        res.set_content(json{{"code", code}, {"message", "status " + std::to_string(res.status)}}.dump(), "application/json; charset=utf-8");
      }
    });
  }

  ServerConfig cfg_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  mutable std::shared_mutex engine_mu_;
  std::shared_ptr<workspace::Engine> engine_;
  std::unique_ptr<responder::SessionStore> sessions_;
  std::unique_ptr<responder::ReportStore> reports_;
  responder::GeneratorFn external_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<SessionSlot>> live_;
};

}  // namespace xchat::service
