#pragma once

#include "evmtaint/bytecode.hpp"

#include <map>
#include <string>
#include <vector>

namespace evmtaint::testutil {

// Tiny assembler for building fixture bytecode. Label references emit a
// PUSH2 placeholder patched at assemble() time.
class Asm {
 public:
  Asm& op(uint8_t opcode) {
    bytes_.push_back(opcode);
    return *this;
  }
  Asm& raw(std::initializer_list<uint8_t> bs) {
    bytes_.insert(bytes_.end(), bs);
    return *this;
  }
  Asm& raw_bytes(const std::vector<uint8_t>& bs) {
    bytes_.insert(bytes_.end(), bs.begin(), bs.end());
    return *this;
  }

  // minimal-width PUSH unless a wider one is asked for
  Asm& push(const Word& value, int width = 0);
  Asm& push_label(const std::string& name);

  Asm& label(const std::string& name);     // bind only
  Asm& jumpdest(const std::string& name);  // bind + JUMPDEST

  Asm& jump(const std::string& name) { return push_label(name).op(op::JUMP); }
  Asm& jumpi(const std::string& name) { return push_label(name).op(op::JUMPI); }

  // consumes the condition on top of the stack; continues on nonzero,
  // reverts otherwise
  Asm& require();

  std::vector<uint8_t> assemble() const;
  uint32_t offset_of(const std::string& name) const;
  size_t size() const { return bytes_.size(); }

 private:
  std::vector<uint8_t> bytes_;
  std::map<std::string, uint32_t> labels_;
  std::vector<std::pair<size_t, std::string>> fixups_;  // byte pos, label
  int gensym_ = 0;
};

// "PUSH2 len PUSH2 rt PUSH1 0 CODECOPY PUSH2 len PUSH1 0 RETURN" + runtime:
// the standard creation-code wrapper
std::vector<uint8_t> wrap_deploy(const std::vector<uint8_t>& runtime);

}  // namespace evmtaint::testutil
