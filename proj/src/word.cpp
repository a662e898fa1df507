#include "evmtaint/word.hpp"

#include <sstream>

namespace evmtaint {

std::string to_hex(const Word& w) {
  std::ostringstream os;
  os << std::hex << w;
  return "0x" + os.str();
}

std::string to_hex_padded(const Word& w) {
  std::ostringstream os;
  os << std::hex << w;
  std::string digits = os.str();
  return "0x" + std::string(64 - digits.size(), '0') + digits;
}

Word word_from_bytes(const uint8_t* data, size_t len) {
  Word w = 0;
  for (size_t i = 0; i < len && i < 32; ++i) {
    w <<= 8;
    w |= data[i];
  }
  return w;
}

std::vector<uint8_t> word_to_bytes(const Word& w) {
  std::vector<uint8_t> out(32, 0);
  Word v = w;
  for (int i = 31; i >= 0; --i) {
    out[static_cast<size_t>(i)] = static_cast<uint8_t>(v & 0xff);
    v >>= 8;
  }
  return out;
}

bool word_is_neg(const Word& w) { return bit_test(w, 255); }

Word word_neg(const Word& w) { return ~w + 1; }

}  // namespace evmtaint
