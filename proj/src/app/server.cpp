#include "peakrep/server.hpp"

#include <mutex>

#include <httplib.h>
#include <json.hpp>

#include "peakrep/app.hpp"

namespace peakrep {
namespace {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownRecord: return 404;
    case ErrorCode::kInternal: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, const Error& e) {
  res.status = http_status_for(e.code());
  res.set_content(nlohmann::json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                  "application/json");
}

}  // namespace

struct ReviewServer::Impl {
  AuditBundle bundle;
  ServerOptions opts;
  LabelLog log;
  std::mutex mu;
  httplib::Server http;

  Impl(AuditBundle b, ServerOptions o) : bundle(std::move(b)), opts(std::move(o)), log(opts.label_log) {
    const auto entries = log.read();
    replay(bundle, entries);
    routes();
  }

  void routes() {
    http.Get("/bundle", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu);
      res.set_content(bundle_to_json(bundle), "application/json");
    });
    http.Get("/segment/:id", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      try {
        res.set_content(segment_payload_json(bundle, req.path_params.at("id")), "application/json");
      } catch (const Error& e) {
        send_error(res, e);
      }
    });
    http.Post("/label", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kFormatError, e.what());
        }
        if (!body.is_object() || !body.contains("record_id") || !body.contains("label") ||
            !body.contains("reviewer_id") || !body["record_id"].is_string() || !body["label"].is_string() ||
            !body["reviewer_id"].is_string())
          throw Error(ErrorCode::kFormatError, "expected {record_id, label, reviewer_id}");
        const auto label = human_label_from_string(body["label"].get<std::string>());
        std::lock_guard lock(mu);
        const auto entry = record_label(bundle, body["record_id"].get<std::string>(), label,
                                        body["reviewer_id"].get<std::string>(), utc_now_iso8601());
        if (entry) log.append(*entry);
        nlohmann::ordered_json out;
        out["appended"] = entry.has_value();
        out["entry"] = entry ? nlohmann::ordered_json::parse(to_json_line(*entry)) : nlohmann::ordered_json(nullptr);
        out["summary"] = nlohmann::ordered_json::parse(bundle_to_json(bundle))["summary"];
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, e);
      }
    });
    http.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        nlohmann::ordered_json record;
        try {
          record = nlohmann::ordered_json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kFormatError, e.what());
        }
        res.set_content(score_reward_record(record, opts.weights, opts.reward_tol_ms, opts.ts_scale).dump(),
                        "application/json");
      } catch (const Error& e) {
        send_error(res, e);
      }
    });
    if (!opts.static_dir.empty() && !http.set_mount_point("/", opts.static_dir))
      throw Error(ErrorCode::kConfigError, "static directory not found: " + opts.static_dir);
  }
};

ReviewServer::ReviewServer(AuditBundle bundle, ServerOptions opts)
    : impl_(std::make_unique<Impl>(std::move(bundle), std::move(opts))) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kConfigError, "cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port))
    throw Error(ErrorCode::kConfigError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ReviewServer::listen() { impl_->http.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace peakrep
