#include "evmtaint/watcher.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace fs = std::filesystem;

namespace evmtaint {

std::string Alert::key() const {
  std::string addr = address;
  std::transform(addr.begin(), addr.end(), addr.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return std::to_string(chain) + ":" + addr + ":" + code_hash;
}

nlohmann::ordered_json Alert::to_json() const {
  nlohmann::ordered_json j;
  j["key"] = key();
  j["chain"] = chain;
  j["block"] = block;
  j["tx"] = tx_hash;
  j["address"] = address;
  j["code_hash"] = code_hash;
  auto arr = nlohmann::ordered_json::array();
  for (const Finding& f : findings) arr.push_back(finding_to_json(f));
  j["findings"] = std::move(arr);
  return j;
}

Alert Alert::from_json(const nlohmann::json& j) {
  Alert a;
  a.chain = j.at("chain").get<uint64_t>();
  a.block = j.at("block").get<uint64_t>();
  a.tx_hash = j.at("tx").get<std::string>();
  a.address = j.at("address").get<std::string>();
  a.code_hash = j.at("code_hash").get<std::string>();
  for (const auto& fj : j.at("findings"))
    a.findings.push_back(finding_from_json(fj));
  return a;
}

bool StdoutSink::deliver(const Alert& a) {
  std::printf("%s\n", a.to_json().dump().c_str());
  std::fflush(stdout);
  return true;
}

bool FileSink::deliver(const Alert& a) {
  std::ofstream out(path_, std::ios::app);
  if (!out) return false;
  out << a.to_json().dump() << "\n";
  return bool(out);
}

bool WebhookSink::deliver(const Alert& a) {
  auto scheme_end = url_.find("://");
  size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url_.find('/', host_start);
  std::string base =
      path_start == std::string::npos ? url_ : url_.substr(0, path_start);
  std::string path =
      path_start == std::string::npos ? "/" : url_.substr(path_start);
  httplib::Client client(base);
  client.set_connection_timeout(10, 0);
  auto res = client.Post(path, a.to_json().dump(), "application/json");
  return res && res->status >= 200 && res->status < 300;
}

namespace {

const char* kCursorFile = "cursor";
const char* kAlertLog = "alerts.log";
const char* kSpoolFile = "spool.jsonl";

}  // namespace

StateStore::StateStore(const std::string& dir) : dir_(dir) {
  fs::create_directories(dir_);
  std::ifstream log(fs::path(dir_) / kAlertLog);
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("key"))
      seen_.insert(j["key"].get<std::string>());
  }
}

std::optional<uint64_t> StateStore::cursor() const {
  std::ifstream in(fs::path(dir_) / kCursorFile);
  uint64_t v;
  if (in >> v) return v;
  return std::nullopt;
}

void StateStore::set_cursor(uint64_t block) {
  fs::path tmp = fs::path(dir_) / (std::string(kCursorFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << block << "\n";
  }
  fs::rename(tmp, fs::path(dir_) / kCursorFile);
}

void StateStore::record_alert(const Alert& a) {
  if (!seen_.insert(a.key()).second) return;
  std::ofstream out(fs::path(dir_) / kAlertLog, std::ios::app);
  out << a.to_json().dump() << "\n";
}

std::vector<std::string> StateStore::alert_keys() const {
  return {seen_.begin(), seen_.end()};
}

void StateStore::spool(const Alert& a) {
  std::ofstream out(fs::path(dir_) / kSpoolFile, std::ios::app);
  out << a.to_json().dump() << "\n";
}

std::vector<Alert> StateStore::take_spooled() {
  std::vector<Alert> out;
  fs::path p = fs::path(dir_) / kSpoolFile;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded()) out.push_back(Alert::from_json(j));
  }
  in.close();
  std::error_code ec;
  fs::remove(p, ec);
  return out;
}

namespace {

struct CodeJob {
  Deployment dep;
  std::vector<uint8_t> code;
  std::string hash;
  bool empty = false;
  std::string error;
};

}  // namespace

WatchStats run_watch(EthRpc& rpc, StateStore& store, AlertSink& sink,
                     const WatchOptions& opts) {
  WatchStats stats;
  auto log = opts.log ? opts.log : [](const std::string& m) {
    std::fprintf(stderr, "%s\n", m.c_str());
  };

  AnalysisOptions aopts = opts.analysis;
  aopts.input_is_runtime = true;  // eth_getCode returns deployed code

  uint64_t chain = rpc.chain_id();
  uint64_t next = opts.from_block;
  if (auto c = store.cursor()) next = *c + 1;  // stored progress wins

  std::map<std::string, Report> cache;  // by runtime code hash

  auto flush_spooled = [&] {
    std::vector<Alert> pending = store.take_spooled();
    for (size_t i = 0; i < pending.size(); ++i) {
      if (sink.deliver(pending[i])) {
        store.record_alert(pending[i]);
      } else {
        for (size_t k = i; k < pending.size(); ++k) store.spool(pending[k]);
        log("alert sink still failing; " +
            std::to_string(pending.size() - i) + " alert(s) respooled");
        return;
      }
    }
  };

  auto process_block = [&](uint64_t number) {
    nlohmann::json block = rpc.block_by_number(number, true);
    if (block.is_null()) {
      log("block " + std::to_string(number) + " not available yet");
      return;
    }

    std::vector<CodeJob> jobs;
    uint32_t tx_index = 0;
    for (const auto& tx : block.value("transactions", nlohmann::json::array())) {
      uint32_t idx = tx_index++;
      std::string tx_hash = tx.value("hash", std::string());
      nlohmann::json receipt = rpc.transaction_receipt(tx_hash);
      if (receipt.is_null()) continue;
      auto ca = receipt.value("contractAddress", nlohmann::json());
      if (ca.is_null() || !ca.is_string()) continue;

      CodeJob job;
      job.dep.block = number;
      job.dep.tx_index = idx;
      job.dep.tx_hash = tx_hash;
      job.dep.address = ca.get<std::string>();
      job.dep.via_factory = !tx.value("to", nlohmann::json()).is_null();
      ++stats.deployments;

      std::string hex = rpc.get_code(job.dep.address, number);
      try {
        RawCode code = decode_hex(hex, CodeOrigin::RpcFetch);
        if (code.bytes.empty()) {
          job.empty = true;
          ++stats.empty_code;
          log("deployment " + job.dep.address + " in block " +
              std::to_string(number) + " has empty code; skipped");
        } else {
          job.code = std::move(code.bytes);
          job.hash = code_hash(job.code);
        }
      } catch (const std::exception& e) {
        job.error = e.what();
        ++stats.errors;
        log("deployment " + job.dep.address + ": " + e.what());
      }
      jobs.push_back(std::move(job));
    }

    // analyze each distinct new runtime once, spread over the workers
    std::vector<size_t> fresh;
    std::set<std::string> dispatched;
    for (size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].empty || !jobs[i].error.empty()) continue;
      if (cache.count(jobs[i].hash)) {
        ++stats.cache_hits;
        continue;
      }
      if (dispatched.insert(jobs[i].hash).second) fresh.push_back(i);
      else ++stats.cache_hits;
    }
    std::vector<Report> results(fresh.size());
    unsigned n = std::max(1u, opts.workers);
    n = static_cast<unsigned>(
        std::min<size_t>(n, std::max<size_t>(fresh.size(), 1)));
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      for (size_t i = cursor.fetch_add(1); i < fresh.size();
           i = cursor.fetch_add(1))
        results[i] = analyze_code(jobs[fresh[i]].code, aopts);
    };
    if (n <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
    for (size_t i = 0; i < fresh.size(); ++i) {
      cache.emplace(jobs[fresh[i]].hash, std::move(results[i]));
      ++stats.analyzed;
    }

    // alerts in transaction order
    for (const CodeJob& job : jobs) {
      if (job.empty || !job.error.empty()) continue;
      const Report& r = cache.at(job.hash);
      if (r.verdict == Verdict::Error) {
        ++stats.errors;
        log("analysis error for " + job.dep.address + ": " + r.error);
        continue;
      }
      if (r.verdict != Verdict::Vulnerable) continue;
      Alert a;
      a.chain = chain;
      a.block = job.dep.block;
      a.tx_hash = job.dep.tx_hash;
      a.address = job.dep.address;
      a.code_hash = job.hash;
      a.findings = r.findings;
      if (store.alert_seen(a.key())) {
        ++stats.duplicates_suppressed;
        continue;
      }
      ++stats.alerts;
      if (sink.deliver(a)) {
        store.record_alert(a);
      } else {
        store.spool(a);
        log("alert delivery failed for " + a.key() + "; spooled");
      }
    }
  };

  for (;;) {
    flush_spooled();
    uint64_t head = rpc.block_number();
    uint64_t stop = head;
    if (opts.until_block) stop = std::min(stop, *opts.until_block);
    while (next <= stop) {
      process_block(next);
      store.set_cursor(next);
      ++stats.blocks;
      ++next;
    }
    if (opts.until_block && next > *opts.until_block) return stats;
    std::this_thread::sleep_for(opts.poll_interval);
  }
}

}  // namespace evmtaint
