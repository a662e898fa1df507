#pragma once

#include "evmtaint/report.hpp"
#include "evmtaint/rpc.hpp"

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace evmtaint {

struct Deployment {
  uint64_t block = 0;
  uint32_t tx_index = 0;
  std::string tx_hash;
  std::string address;
  bool via_factory = false;  // creating tx had a recipient; a receipt
                             // contract address means an internal CREATE
};

struct Alert {
  uint64_t chain = 0;
  uint64_t block = 0;
  std::string tx_hash;
  std::string address;
  std::string code_hash;
  std::vector<Finding> findings;

  std::string key() const;  // chain:address:code_hash
  nlohmann::ordered_json to_json() const;
  static Alert from_json(const nlohmann::json& j);
};

class AlertSink {
 public:
  virtual ~AlertSink() = default;
  virtual bool deliver(const Alert& a) = 0;  // false: hold for retry
};

class StdoutSink : public AlertSink {
 public:
  bool deliver(const Alert& a) override;
};

class FileSink : public AlertSink {
 public:
  explicit FileSink(std::string path) : path_(std::move(path)) {}
  bool deliver(const Alert& a) override;

 private:
  std::string path_;
};

class WebhookSink : public AlertSink {
 public:
  explicit WebhookSink(std::string url) : url_(std::move(url)) {}
  bool deliver(const Alert& a) override;

 private:
  std::string url_;
};

// Durable watcher state in one directory: a block cursor, the log of
// alert keys already raised, and a spool of alerts that failed to send.
class StateStore {
 public:
  explicit StateStore(const std::string& dir);

  std::optional<uint64_t> cursor() const;
  void set_cursor(uint64_t block);  // write-then-rename

  bool alert_seen(const std::string& key) const { return seen_.count(key) > 0; }
  void record_alert(const Alert& a);  // appends to alerts.log, once per key
  std::vector<std::string> alert_keys() const;

  void spool(const Alert& a);
  std::vector<Alert> take_spooled();

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::set<std::string> seen_;
};

struct WatchOptions {
  uint64_t from_block = 0;
  std::optional<uint64_t> until_block;  // stop after this block (replays)
  unsigned workers = 1;
  std::chrono::milliseconds poll_interval{3'000};
  AnalysisOptions analysis;  // input_is_runtime is forced on
  std::function<void(const std::string&)> log;  // default: stderr
};

struct WatchStats {
  uint64_t blocks = 0;
  size_t deployments = 0;
  size_t analyzed = 0;  // distinct codes that reached the analyzer
  size_t cache_hits = 0;
  size_t empty_code = 0;
  size_t alerts = 0;
  size_t duplicates_suppressed = 0;
  size_t errors = 0;
};

// Follows the chain head, finds contract creations through their
// receipts, analyzes each distinct runtime once, and raises an alert
// for every vulnerable deployment. Progress is committed per block, so
// a restart resumes at the next unprocessed block and already-raised
// alert keys stay silent.
WatchStats run_watch(EthRpc& rpc, StateStore& store, AlertSink& sink,
                     const WatchOptions& opts);

}  // namespace evmtaint
