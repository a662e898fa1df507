#pragma once

#include "evmtaint/bytecode.hpp"
#include "evmtaint/word.hpp"

#include <optional>
#include <vector>

namespace evmtaint {

// Concrete evaluation of pure stack opcodes, shared by the block-local
// constant pre-pass, the constructor splitter, and the simulator.
Word fold_unary(uint8_t opcode, const Word& a);
std::optional<Word> fold_binary(uint8_t opcode, const Word& top, const Word& second);
Word fold_ternary(uint8_t opcode, const Word& a, const Word& b, const Word& n);

inline bool foldable_unary(uint8_t o) {
  return o == op::ISZERO || o == op::NOT;
}

inline bool foldable_binary(uint8_t o) {
  return (o >= op::ADD && o <= op::SIGNEXTEND && o != op::ADDMOD && o != op::MULMOD) ||
         (o >= op::LT && o <= op::SAR && o != op::ISZERO && o != op::NOT);
}

inline bool foldable_ternary(uint8_t o) {
  return o == op::ADDMOD || o == op::MULMOD;
}

// Stack of maybe-known words for one basic block. Values that would come
// from outside the block read as unknown; pops below the modeled depth
// are counted rather than failing.
class LocalStack {
 public:
  std::optional<Word> pop();
  std::optional<Word> peek(size_t depth_from_top) const;  // 0 = top
  void push(std::optional<Word> v) { slots_.push_back(std::move(v)); }

  // Applies one instruction's stack effect, folding what it can.
  // Control-flow and call opcodes just consume/produce unknowns.
  void apply(const Instruction& ins);

  size_t depth() const { return slots_.size(); }

 private:
  std::vector<std::optional<Word>> slots_;
};

}  // namespace evmtaint
