#pragma once

#include <json.hpp>

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace evmtaint {

class RpcError : public std::runtime_error {
 public:
  explicit RpcError(const std::string& what) : std::runtime_error(what) {}
};

// One JSON-RPC request/response exchange. Implementations: live HTTP
// endpoint, or a recorded trace for offline runs and tests.
class RpcTransport {
 public:
  virtual ~RpcTransport() = default;
  virtual nlohmann::json call(const std::string& method,
                              const nlohmann::json& params) = 0;
};

class HttpTransport : public RpcTransport {
 public:
  explicit HttpTransport(const std::string& url);
  ~HttpTransport() override;
  nlohmann::json call(const std::string& method,
                      const nlohmann::json& params) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves responses recorded as a JSON array of {method, params, result}
// objects. Responses for one (method, params) pair are consumed in file
// order; the last one sticks, so single-entry requests can repeat.
class ReplayTransport : public RpcTransport {
 public:
  explicit ReplayTransport(const std::string& path);
  explicit ReplayTransport(const nlohmann::json& trace);
  nlohmann::json call(const std::string& method,
                      const nlohmann::json& params) override;

  size_t requests_served() const { return served_; }

 private:
  void load(const nlohmann::json& trace);
  std::map<std::string, std::deque<nlohmann::json>> responses_;
  std::mutex mu_;
  size_t served_ = 0;
};

std::string to_quantity(uint64_t v);            // 0x-prefixed, no leading zeros
uint64_t from_quantity(const std::string& hex);  // inverse, throws RpcError

// The handful of eth_* methods the deployment watcher needs.
class EthRpc {
 public:
  explicit EthRpc(RpcTransport& transport) : transport_(transport) {}

  uint64_t chain_id();
  uint64_t block_number();
  nlohmann::json block_by_number(uint64_t number, bool full_transactions);
  nlohmann::json transaction_receipt(const std::string& tx_hash);
  std::string get_code(const std::string& address, uint64_t block);

 private:
  RpcTransport& transport_;
};

}  // namespace evmtaint
