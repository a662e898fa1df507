#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace evmtaint {

// 256-bit EVM machine word. The unchecked fixed-width backend wraps
// modulo 2^256, which matches EVM arithmetic.
using Word = boost::multiprecision::uint256_t;
using Word512 = boost::multiprecision::uint512_t;

// 2^160 - 1, the mask Solidity applies when decoding address arguments.
inline const Word& address_mask() {
  static const Word mask = (Word(1) << 160) - 1;
  return mask;
}

inline bool is_address_mask(const Word& w) { return w == address_mask(); }

std::string to_hex(const Word& w);          // minimal digits, 0x prefix
std::string to_hex_padded(const Word& w);   // 64 digits, 0x prefix
Word word_from_bytes(const uint8_t* data, size_t len);
std::vector<uint8_t> word_to_bytes(const Word& w);  // big-endian, 32 bytes

// Signed helpers for SDIV/SMOD/SLT/SGT/SAR/SIGNEXTEND.
bool word_is_neg(const Word& w);
Word word_neg(const Word& w);

}  // namespace evmtaint
