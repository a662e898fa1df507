#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace evmtaint {

// Keccak-256 with the original 0x01 domain padding (the variant Ethereum
// uses; NIST SHA3-256 pads with 0x06 and gives different digests).
std::array<uint8_t, 32> keccak256(const uint8_t* data, size_t len);
std::array<uint8_t, 32> keccak256(const std::vector<uint8_t>& data);
std::array<uint8_t, 32> keccak256(const std::string& data);

std::string hash_hex(const std::array<uint8_t, 32>& digest);  // no 0x prefix

// First four bytes of keccak256(signature), as 8 lowercase hex digits.
// abi_selector("transfer(address,uint256)") == "a9059cbb".
std::string abi_selector(const std::string& signature);
uint32_t abi_selector_value(const std::string& signature);

}  // namespace evmtaint
