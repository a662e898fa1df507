#include "evmtaint/constfold.hpp"

namespace evmtaint {

Word fold_unary(uint8_t opcode, const Word& a) {
  switch (opcode) {
    case op::ISZERO: return a == 0 ? 1 : 0;
    case op::NOT: return ~a;
    default: return 0;
  }
}

namespace {

Word sdiv(const Word& a, const Word& b) {
  if (b == 0) return 0;
  bool neg_a = word_is_neg(a), neg_b = word_is_neg(b);
  Word ua = neg_a ? word_neg(a) : a;
  Word ub = neg_b ? word_neg(b) : b;
  Word q = ua / ub;
  return (neg_a != neg_b) ? word_neg(q) : q;
}

Word smod(const Word& a, const Word& b) {
  if (b == 0) return 0;
  bool neg_a = word_is_neg(a);
  Word ua = neg_a ? word_neg(a) : a;
  Word ub = word_is_neg(b) ? word_neg(b) : b;
  Word r = ua % ub;
  return neg_a ? word_neg(r) : r;  // result takes the dividend's sign
}

Word exp_mod256(Word base, Word e) {
  Word result = 1;
  while (e != 0) {
    if (bit_test(e, 0)) result *= base;
    base *= base;
    e >>= 1;
  }
  return result;
}

Word signextend(const Word& b, const Word& x) {
  if (b >= 31) return x;
  unsigned bit = static_cast<unsigned>(b) * 8 + 7;
  Word mask = (Word(1) << (bit + 1)) - 1;
  if (bit_test(x, bit)) return x | ~mask;
  return x & mask;
}

Word sar(const Word& shift, const Word& value) {
  bool neg = word_is_neg(value);
  if (shift >= 256) return neg ? ~Word(0) : Word(0);
  unsigned s = static_cast<unsigned>(shift);
  Word r = value >> s;
  if (neg && s > 0) r |= ~((Word(1) << (256 - s)) - 1);
  return r;
}

}  // namespace

std::optional<Word> fold_binary(uint8_t opcode, const Word& top, const Word& second) {
  switch (opcode) {
    case op::ADD: return top + second;
    case op::MUL: return top * second;
    case op::SUB: return top - second;
    case op::DIV: return second == 0 ? Word(0) : top / second;
    case op::SDIV: return sdiv(top, second);
    case op::MOD: return second == 0 ? Word(0) : top % second;
    case op::SMOD: return smod(top, second);
    case op::EXP: return exp_mod256(top, second);
    case op::SIGNEXTEND: return signextend(top, second);
    case op::LT: return top < second ? 1 : 0;
    case op::GT: return top > second ? 1 : 0;
    case op::SLT: {
      bool na = word_is_neg(top), nb = word_is_neg(second);
      if (na != nb) return na ? 1 : 0;
      return top < second ? 1 : 0;
    }
    case op::SGT: {
      bool na = word_is_neg(top), nb = word_is_neg(second);
      if (na != nb) return nb ? 1 : 0;
      return top > second ? 1 : 0;
    }
    case op::EQ: return top == second ? 1 : 0;
    case op::AND: return top & second;
    case op::OR: return top | second;
    case op::XOR: return top ^ second;
    case op::BYTE:
      if (top >= 32) return Word(0);
      return (second >> (8 * (31 - static_cast<unsigned>(top)))) & 0xff;
    case op::SHL:
      if (top >= 256) return Word(0);
      return second << static_cast<unsigned>(top);
    case op::SHR:
      if (top >= 256) return Word(0);
      return second >> static_cast<unsigned>(top);
    case op::SAR: return sar(top, second);
    default: return std::nullopt;
  }
}

Word fold_ternary(uint8_t opcode, const Word& a, const Word& b, const Word& n) {
  if (n == 0) return 0;
  Word512 wide_a = a, wide_b = b;
  Word512 r = (opcode == op::ADDMOD) ? (wide_a + wide_b) % Word512(n)
                                     : (wide_a * wide_b) % Word512(n);
  return Word(r);
}

std::optional<Word> LocalStack::pop() {
  if (slots_.empty()) return std::nullopt;  // entry-stack value, unknown here
  auto v = std::move(slots_.back());
  slots_.pop_back();
  return v;
}

std::optional<Word> LocalStack::peek(size_t depth_from_top) const {
  if (depth_from_top >= slots_.size()) return std::nullopt;
  return slots_[slots_.size() - 1 - depth_from_top];
}

void LocalStack::apply(const Instruction& ins) {
  uint8_t o = ins.opcode;
  if (op::is_push(o) || o == op::PUSH0) {
    push(ins.immediate);
    return;
  }
  if (op::is_dup(o)) {
    size_t n = o - op::DUP1;  // DUP1 copies the top
    push(peek(n));
    return;
  }
  if (op::is_swap(o)) {
    size_t n = o - op::SWAP1 + 1;
    if (n < slots_.size()) {
      std::swap(slots_[slots_.size() - 1], slots_[slots_.size() - 1 - n]);
    } else {
      // one side lives below the modeled window; both become unknown
      while (slots_.size() <= n) slots_.insert(slots_.begin(), std::nullopt);
      std::swap(slots_[slots_.size() - 1], slots_[slots_.size() - 1 - n]);
    }
    return;
  }
  if (foldable_unary(o)) {
    auto a = pop();
    push(a ? std::optional<Word>(fold_unary(o, *a)) : std::nullopt);
    return;
  }
  if (foldable_binary(o)) {
    auto a = pop();
    auto b = pop();
    push((a && b) ? fold_binary(o, *a, *b) : std::nullopt);
    return;
  }
  if (foldable_ternary(o)) {
    auto a = pop(), b = pop(), n = pop();
    push((a && b && n) ? std::optional<Word>(fold_ternary(o, *a, *b, *n))
                       : std::nullopt);
    return;
  }
  const OpcodeInfo& info = opcode_info(o);
  for (unsigned i = 0; i < info.pops; ++i) pop();
  for (unsigned i = 0; i < info.pushes; ++i) push(std::nullopt);
}

}  // namespace evmtaint
