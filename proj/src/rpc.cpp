#include "evmtaint/rpc.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fstream>

namespace evmtaint {

namespace {

std::string request_key(const std::string& method,
                        const nlohmann::json& params) {
  return method + "|" + params.dump();
}

}  // namespace

struct HttpTransport::Impl {
  std::unique_ptr<httplib::Client> client;
  std::string path;
  int next_id = 1;
};

HttpTransport::HttpTransport(const std::string& url)
    : impl_(std::make_unique<Impl>()) {
  // split "scheme://host[:port]/path" into the client base and the path
  auto scheme_end = url.find("://");
  size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  std::string base =
      path_start == std::string::npos ? url : url.substr(0, path_start);
  impl_->path = path_start == std::string::npos ? "/" : url.substr(path_start);
  impl_->client = std::make_unique<httplib::Client>(base);
  impl_->client->set_connection_timeout(10, 0);
  impl_->client->set_read_timeout(30, 0);
}

HttpTransport::~HttpTransport() = default;

nlohmann::json HttpTransport::call(const std::string& method,
                                   const nlohmann::json& params) {
  nlohmann::json req = {{"jsonrpc", "2.0"},
                        {"id", impl_->next_id++},
                        {"method", method},
                        {"params", params}};
  auto res = impl_->client->Post(impl_->path, req.dump(), "application/json");
  if (!res)
    throw RpcError(method + ": transport failure (" +
                   httplib::to_string(res.error()) + ")");
  if (res->status != 200)
    throw RpcError(method + ": http status " + std::to_string(res->status));
  nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw RpcError(method + ": unparseable response");
  if (body.contains("error") && !body["error"].is_null())
    throw RpcError(method + ": " + body["error"].dump());
  if (!body.contains("result")) throw RpcError(method + ": no result");
  return body["result"];
}

ReplayTransport::ReplayTransport(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RpcError("cannot open trace file: " + path);
  nlohmann::json trace = nlohmann::json::parse(in, nullptr, false);
  if (trace.is_discarded()) throw RpcError("unparseable trace file: " + path);
  load(trace);
}

ReplayTransport::ReplayTransport(const nlohmann::json& trace) { load(trace); }

void ReplayTransport::load(const nlohmann::json& trace) {
  if (!trace.is_array()) throw RpcError("trace must be a JSON array");
  for (const auto& entry : trace) {
    std::string key =
        request_key(entry.at("method").get<std::string>(), entry.at("params"));
    responses_[key].push_back(entry.at("result"));
  }
}

nlohmann::json ReplayTransport::call(const std::string& method,
                                     const nlohmann::json& params) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = responses_.find(request_key(method, params));
  if (it == responses_.end() || it->second.empty())
    throw RpcError("no recorded response for " + method + " " + params.dump());
  ++served_;
  if (it->second.size() == 1) return it->second.front();  // sticky last
  nlohmann::json out = std::move(it->second.front());
  it->second.pop_front();
  return out;
}

std::string to_quantity(uint64_t v) {
  char buf[2 + 16 + 1];
  int n = snprintf(buf, sizeof buf, "0x%llx", (unsigned long long)v);
  return std::string(buf, buf + n);
}

uint64_t from_quantity(const std::string& hex) {
  size_t pos = 0;
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X'))
    pos = 2;
  if (pos >= hex.size()) throw RpcError("empty quantity: " + hex);
  uint64_t v = 0;
  for (; pos < hex.size(); ++pos) {
    char c = hex[pos];
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') digit = c - 'A' + 10;
    else throw RpcError("bad quantity: " + hex);
    if (v > (UINT64_MAX >> 4)) throw RpcError("quantity overflow: " + hex);
    v = (v << 4) | static_cast<uint64_t>(digit);
  }
  return v;
}

uint64_t EthRpc::chain_id() {
  return from_quantity(
      transport_.call("eth_chainId", nlohmann::json::array()).get<std::string>());
}

uint64_t EthRpc::block_number() {
  return from_quantity(transport_.call("eth_blockNumber", nlohmann::json::array())
                           .get<std::string>());
}

nlohmann::json EthRpc::block_by_number(uint64_t number,
                                       bool full_transactions) {
  return transport_.call(
      "eth_getBlockByNumber",
      nlohmann::json::array({to_quantity(number), full_transactions}));
}

nlohmann::json EthRpc::transaction_receipt(const std::string& tx_hash) {
  return transport_.call("eth_getTransactionReceipt",
                         nlohmann::json::array({tx_hash}));
}

std::string EthRpc::get_code(const std::string& address, uint64_t block) {
  return transport_
      .call("eth_getCode",
            nlohmann::json::array({address, to_quantity(block)}))
      .get<std::string>();
}

}  // namespace evmtaint
