#include "evmtaint/keccak.hpp"

#include <cstring>

namespace evmtaint {

namespace {

constexpr uint64_t kRoundConstants[24] = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
    0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
    0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
    0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
    0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
    0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
    0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL,
};

constexpr int kRotations[24] = {1,  3,  6,  10, 15, 21, 28, 36,
                                45, 55, 2,  14, 27, 41, 56, 8,
                                25, 43, 62, 18, 39, 61, 20, 44};

constexpr int kPiLanes[24] = {10, 7,  11, 17, 18, 3,  5,  16,
                              8,  21, 24, 4,  15, 23, 19, 13,
                              12, 2,  20, 14, 22, 9,  6,  1};

inline uint64_t rotl64(uint64_t x, int n) {
  return (x << n) | (x >> (64 - n));
}

void keccak_f1600(uint64_t state[25]) {
  for (int round = 0; round < 24; ++round) {
    uint64_t c[5], d;
    for (int x = 0; x < 5; ++x)
      c[x] = state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^
             state[x + 20];
    for (int x = 0; x < 5; ++x) {
      d = c[(x + 4) % 5] ^ rotl64(c[(x + 1) % 5], 1);
      for (int y = 0; y < 25; y += 5) state[y + x] ^= d;
    }

    uint64_t last = state[1];
    for (int i = 0; i < 24; ++i) {
      int lane = kPiLanes[i];
      uint64_t tmp = state[lane];
      state[lane] = rotl64(last, kRotations[i]);
      last = tmp;
    }

    for (int y = 0; y < 25; y += 5) {
      uint64_t row[5];
      std::memcpy(row, &state[y], sizeof(row));
      for (int x = 0; x < 5; ++x)
        state[y + x] = row[x] ^ (~row[(x + 1) % 5] & row[(x + 2) % 5]);
    }

    state[0] ^= kRoundConstants[round];
  }
}

}  // namespace

std::array<uint8_t, 32> keccak256(const uint8_t* data, size_t len) {
  constexpr size_t kRate = 136;  // 1600/8 - 2*32
  uint64_t state[25] = {0};
  uint8_t block[kRate];

  while (len >= kRate) {
    for (size_t i = 0; i < kRate / 8; ++i) {
      uint64_t lane;
      std::memcpy(&lane, data + i * 8, 8);
      state[i] ^= lane;  // little-endian host assumed (x86/arm64)
    }
    keccak_f1600(state);
    data += kRate;
    len -= kRate;
  }

  std::memset(block, 0, kRate);
  std::memcpy(block, data, len);
  block[len] = 0x01;
  block[kRate - 1] |= 0x80;
  for (size_t i = 0; i < kRate / 8; ++i) {
    uint64_t lane;
    std::memcpy(&lane, block + i * 8, 8);
    state[i] ^= lane;
  }
  keccak_f1600(state);

  std::array<uint8_t, 32> digest;
  std::memcpy(digest.data(), state, 32);
  return digest;
}

std::array<uint8_t, 32> keccak256(const std::vector<uint8_t>& data) {
  return keccak256(data.data(), data.size());
}

std::array<uint8_t, 32> keccak256(const std::string& data) {
  return keccak256(reinterpret_cast<const uint8_t*>(data.data()), data.size());
}

std::string hash_hex(const std::array<uint8_t, 32>& digest) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (uint8_t b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

std::string abi_selector(const std::string& signature) {
  return hash_hex(keccak256(signature)).substr(0, 8);
}

uint32_t abi_selector_value(const std::string& signature) {
  auto digest = keccak256(signature);
  return (uint32_t(digest[0]) << 24) | (uint32_t(digest[1]) << 16) |
         (uint32_t(digest[2]) << 8) | uint32_t(digest[3]);
}

}  // namespace evmtaint
