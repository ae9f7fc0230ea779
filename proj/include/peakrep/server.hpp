#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "peakrep/audit.hpp"
#include "peakrep/reward.hpp"

namespace peakrep {

struct ServerOptions {
  std::filesystem::path label_log;
  RewardWeights weights;
  double reward_tol_ms = 30.0;
  TimeScale ts_scale;
  std::string static_dir;  // optional review UI assets, mounted at /
};

/// HTTP front of an audit bundle: GET /bundle, GET /segment/{id},
/// POST /label and POST /score. The process is the only writer of the label
/// log; existing log entries are replayed on construction.
class ReviewServer {
 public:
  ReviewServer(AuditBundle bundle, ServerOptions opts);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace peakrep
