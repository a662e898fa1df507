#include "evmtaint/cfg.hpp"

#include "evmtaint/constfold.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace evmtaint {

const char* to_string(Terminator t) {
  switch (t) {
    case Terminator::Jump: return "jump";
    case Terminator::JumpI: return "jumpi";
    case Terminator::Halt: return "halt";
    case Terminator::Fallthrough: return "fallthrough";
    case Terminator::Invalid: return "invalid";
  }
  return "?";
}

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Fallthrough: return "fallthrough";
    case EdgeKind::JumpdestTaken: return "jumpdest-taken";
    case EdgeKind::Sequential: return "sequential";
  }
  return "?";
}

const Instruction* Cfg::instruction_at(uint32_t offset) const {
  auto it = std::lower_bound(
      instructions.begin(), instructions.end(), offset,
      [](const Instruction& ins, uint32_t off) { return ins.offset < off; });
  if (it == instructions.end() || it->offset != offset) return nullptr;
  return &*it;
}

std::optional<uint32_t> Cfg::jump_target_block(const Word& target) const {
  if (target > UINT32_MAX) return std::nullopt;
  auto it = block_by_offset.find(static_cast<uint32_t>(target));
  if (it == block_by_offset.end()) return std::nullopt;
  const BasicBlock& b = blocks[it->second];
  if (b.instruction_count == 0 || block_begin(b)->opcode != op::JUMPDEST)
    return std::nullopt;
  return it->second;
}

Cfg build_blocks(std::vector<Instruction> instructions) {
  Cfg cfg;
  cfg.instructions = std::move(instructions);

  std::vector<size_t> leaders;
  for (size_t i = 0; i < cfg.instructions.size(); ++i) {
    const Instruction& ins = cfg.instructions[i];
    bool leader = i == 0 || ins.opcode == op::JUMPDEST;
    if (!leader && i > 0) {
      const Instruction& prev = cfg.instructions[i - 1];
      OpcodeClass k = prev.info().klass;
      leader = prev.opcode == op::JUMP || prev.opcode == op::JUMPI ||
               k == OpcodeClass::Halt || k == OpcodeClass::Invalid;
    }
    if (leader) leaders.push_back(i);
  }

  for (size_t li = 0; li < leaders.size(); ++li) {
    size_t first = leaders[li];
    size_t end = li + 1 < leaders.size() ? leaders[li + 1] : cfg.instructions.size();
    BasicBlock b;
    b.id = static_cast<uint32_t>(cfg.blocks.size());
    b.start_offset = cfg.instructions[first].offset;
    b.first_instruction = static_cast<uint32_t>(first);
    b.instruction_count = static_cast<uint32_t>(end - first);
    const Instruction& last = cfg.instructions[end - 1];
    switch (last.opcode) {
      case op::JUMP: b.terminator = Terminator::Jump; break;
      case op::JUMPI: b.terminator = Terminator::JumpI; break;
      default:
        if (last.info().klass == OpcodeClass::Halt)
          b.terminator = Terminator::Halt;
        else if (last.info().klass == OpcodeClass::Invalid)
          b.terminator = Terminator::Invalid;
        else
          b.terminator = Terminator::Fallthrough;
    }
    cfg.block_by_offset.emplace(b.start_offset, b.id);
    cfg.blocks.push_back(std::move(b));
  }
  return cfg;
}

namespace {

// Runs the block-local constant stack and returns the value on top right
// before the final instruction executes (the jump destination for blocks
// ending in JUMP/JUMPI).
std::optional<Word> block_exit_jump_target(const Cfg& cfg, const BasicBlock& b) {
  LocalStack stack;
  for (const Instruction* ins = cfg.block_begin(b); ins != cfg.block_end(b);
       ++ins) {
    if (ins + 1 == cfg.block_end(b) &&
        (ins->opcode == op::JUMP || ins->opcode == op::JUMPI)) {
      return stack.peek(0);
    }
    stack.apply(*ins);
  }
  return std::nullopt;
}

}  // namespace

void build_cfg(Cfg& cfg) {
  for (BasicBlock& b : cfg.blocks) {
    bool has_next = b.id + 1 < cfg.blocks.size();
    switch (b.terminator) {
      case Terminator::Fallthrough:
        if (has_next) b.edges.push_back({b.id + 1, EdgeKind::Sequential});
        break;
      case Terminator::Halt:
      case Terminator::Invalid:
        break;
      case Terminator::Jump:
      case Terminator::JumpI: {
        if (b.terminator == Terminator::JumpI && has_next)
          b.edges.push_back({b.id + 1, EdgeKind::Fallthrough});
        auto dest = block_exit_jump_target(cfg, b);
        if (!dest) {
          b.dynamic_exit = true;
          break;
        }
        auto target = cfg.jump_target_block(*dest);
        if (target) {
          b.edges.push_back({*target, EdgeKind::JumpdestTaken});
        } else {
          const Instruction& last = *(cfg.block_end(b) - 1);
          cfg.bad_jumps.push_back({b.id, last.offset, *dest});
        }
        break;
      }
    }
  }
}

Cfg cfg_from_code(const std::vector<uint8_t>& runtime) {
  Cfg cfg = build_blocks(disassemble(runtime));
  build_cfg(cfg);
  return cfg;
}

std::string FunctionCandidate::selector_hex() const {
  if (!selector) return "none";
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", *selector);
  return buf;
}

namespace {

struct SelectorMatch {
  uint32_t selector;
  uint32_t entry_block;
};

// One dispatcher comparison per block: a PUSH of a value that fits in four
// bytes feeding an EQ (or GT/LT for binary-search splits), with the block
// ending in a JUMPI whose destination is a block-local constant.
struct DispatchShape {
  bool has_eq = false;
  bool has_split = false;  // GT/LT on a small constant
  uint32_t compared = 0;
  bool reads_selector_word = false;  // CALLDATALOAD(0) or selector shaping
};

DispatchShape classify_dispatch_block(const Cfg& cfg, const BasicBlock& b) {
  DispatchShape shape;
  LocalStack stack;
  std::optional<uint32_t> last_small_push;
  int since_push = 99;
  for (const Instruction* ins = cfg.block_begin(b); ins != cfg.block_end(b);
       ++ins) {
    if (op::is_push(ins->opcode) && ins->immediate <= 0xffffffffULL) {
      last_small_push = static_cast<uint32_t>(ins->immediate);
      since_push = 0;
    } else if (op::is_dup(ins->opcode) || ins->opcode == op::SWAP1) {
      ++since_push;  // tolerated between the push and the compare
    } else if (ins->opcode == op::EQ) {
      if (last_small_push && since_push <= 2) {
        shape.has_eq = true;
        shape.compared = *last_small_push;
      }
      since_push = 99;
    } else if (ins->opcode == op::GT || ins->opcode == op::LT) {
      if (last_small_push && since_push <= 2) {
        shape.has_split = true;
        shape.compared = *last_small_push;
      }
      since_push = 99;
    } else if (ins->opcode == op::CALLDATALOAD) {
      auto off = stack.peek(0);
      if (off && *off == 0) shape.reads_selector_word = true;
      since_push = 99;
    } else if (ins->opcode == op::SHR || ins->opcode == op::DIV ||
               ins->opcode == op::CALLDATASIZE || op::is_swap(ins->opcode)) {
      ++since_push;
    } else {
      since_push = 99;
    }
    stack.apply(*ins);
  }
  return shape;
}

}  // namespace

std::vector<FunctionCandidate> extract_functions(const Cfg& cfg) {
  std::vector<FunctionCandidate> out;
  if (cfg.blocks.empty()) return out;

  constexpr size_t kDispatcherBlockLimit = 128;
  std::deque<uint32_t> worklist{0};
  std::set<uint32_t> visited;
  std::set<uint32_t> function_entries;
  std::vector<SelectorMatch> matches;
  bool selector_word_seen = false;

  while (!worklist.empty() && visited.size() < kDispatcherBlockLimit) {
    uint32_t id = worklist.front();
    worklist.pop_front();
    if (!visited.insert(id).second) continue;
    if (function_entries.count(id)) continue;  // body reached another way
    const BasicBlock& b = cfg.blocks[id];
    DispatchShape shape = classify_dispatch_block(cfg, b);
    selector_word_seen |= shape.reads_selector_word;

    std::optional<uint32_t> taken;
    for (const Edge& e : b.edges)
      if (e.kind == EdgeKind::JumpdestTaken) taken = e.to;

    if (shape.has_eq && taken && b.terminator == Terminator::JumpI) {
      matches.push_back({shape.compared, *taken});
      function_entries.insert(*taken);
      // keep walking the miss chain only
      for (const Edge& e : b.edges)
        if (e.kind != EdgeKind::JumpdestTaken) worklist.push_back(e.to);
      continue;
    }
    bool keep_walking = shape.has_split || id == 0 ||
                        b.terminator == Terminator::Fallthrough ||
                        b.terminator == Terminator::JumpI ||
                        b.terminator == Terminator::Jump;
    if (keep_walking)
      for (const Edge& e : b.edges) worklist.push_back(e.to);
  }

  if (matches.empty() || !selector_word_seen) {
    FunctionCandidate fallback;
    fallback.selector = std::nullopt;
    fallback.entry_block = 0;
    out.push_back(fallback);
    return out;
  }

  std::set<uint32_t> seen_selectors;
  for (const SelectorMatch& m : matches) {
    if (!seen_selectors.insert(m.selector).second) continue;
    FunctionCandidate c;
    c.selector = m.selector;
    c.entry_block = m.entry_block;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const FunctionCandidate& a, const FunctionCandidate& b) {
              return *a.selector < *b.selector;
            });
  return out;
}

namespace {

// Stack slot for the address-parameter scout: tracks constants (to follow
// jumps) and whether the value derives from a constant-offset CALLDATALOAD.
struct ScoutVal {
  std::optional<Word> konst;
  bool calldata = false;
  uint32_t calldata_offset = 0;
};

struct ScoutFrame {
  uint32_t block;
  std::vector<ScoutVal> stack;
  std::map<uint32_t, int> visits;
};

constexpr size_t kScoutVisitBudget = 512;
constexpr int kScoutRevisitLimit = 3;

void scout_function(const Cfg& cfg, uint32_t entry,
                    std::map<uint32_t, bool>& params_seen) {
  std::vector<ScoutFrame> pending;
  pending.push_back({entry, {}, {}});
  size_t budget = kScoutVisitBudget;

  while (!pending.empty() && budget > 0) {
    ScoutFrame frame = std::move(pending.back());
    pending.pop_back();

    while (budget > 0) {
      --budget;
      if (frame.block >= cfg.blocks.size()) break;
      if (++frame.visits[frame.block] > kScoutRevisitLimit) break;
      const BasicBlock& b = cfg.blocks[frame.block];
      auto& stack = frame.stack;
      auto pop = [&]() -> ScoutVal {
        if (stack.empty()) return {};
        ScoutVal v = std::move(stack.back());
        stack.pop_back();
        return v;
      };

      std::optional<uint32_t> next_block;
      bool fork_fallthrough = false;

      for (const Instruction* ins = cfg.block_begin(b);
           ins != cfg.block_end(b); ++ins) {
        uint8_t o = ins->opcode;
        if (op::is_push(o) || o == op::PUSH0) {
          stack.push_back({ins->immediate, false, 0});
        } else if (op::is_dup(o)) {
          size_t n = o - op::DUP1;
          stack.push_back(n < stack.size() ? stack[stack.size() - 1 - n]
                                           : ScoutVal{});
        } else if (op::is_swap(o)) {
          size_t n = o - op::SWAP1 + 1;
          while (stack.size() <= n) stack.insert(stack.begin(), ScoutVal{});
          std::swap(stack[stack.size() - 1], stack[stack.size() - 1 - n]);
        } else if (o == op::CALLDATALOAD) {
          ScoutVal off = pop();
          ScoutVal v;
          if (off.konst && *off.konst <= UINT32_MAX) {
            v.calldata = true;
            v.calldata_offset = static_cast<uint32_t>(*off.konst);
            if (v.calldata_offset >= 4)
              params_seen.emplace(v.calldata_offset, false);
          }
          stack.push_back(v);
        } else if (o == op::AND) {
          ScoutVal a = pop(), b2 = pop();
          const ScoutVal* mask = nullptr;
          const ScoutVal* other = nullptr;
          if (a.konst && is_address_mask(*a.konst)) mask = &a, other = &b2;
          if (b2.konst && is_address_mask(*b2.konst)) mask = &b2, other = &a;
          if (mask && other->calldata && other->calldata_offset >= 4)
            params_seen[other->calldata_offset] = true;
          ScoutVal r;
          if (a.konst && b2.konst) r.konst = *a.konst & *b2.konst;
          const ScoutVal& cd = a.calldata ? a : b2;
          if (cd.calldata && !r.konst) {
            r.calldata = true;
            r.calldata_offset = cd.calldata_offset;
          }
          stack.push_back(r);
        } else if (foldable_unary(o)) {
          ScoutVal a = pop();
          ScoutVal r;
          if (a.konst) r.konst = fold_unary(o, *a.konst);
          stack.push_back(r);
        } else if (foldable_binary(o)) {
          ScoutVal a = pop(), b2 = pop();
          ScoutVal r;
          if (a.konst && b2.konst) r.konst = fold_binary(o, *a.konst, *b2.konst);
          // masking aside, arithmetic on a calldata word stays calldata
          const ScoutVal& cd = a.calldata ? a : b2;
          if (cd.calldata && !r.konst) {
            r.calldata = true;
            r.calldata_offset = cd.calldata_offset;
          }
          stack.push_back(r);
        } else if (o == op::JUMP) {
          ScoutVal dest = pop();
          if (dest.konst) {
            if (auto t = cfg.jump_target_block(*dest.konst)) next_block = *t;
          }
          break;
        } else if (o == op::JUMPI) {
          ScoutVal dest = pop();
          pop();  // cond
          if (dest.konst) {
            if (auto t = cfg.jump_target_block(*dest.konst)) {
              next_block = *t;
              fork_fallthrough = true;
            }
          }
          if (!next_block) {
            // taken side unknown; continue on the fallthrough
            if (b.id + 1 < cfg.blocks.size()) next_block = b.id + 1;
          }
          break;
        } else {
          const OpcodeInfo& info = opcode_info(o);
          if (info.klass == OpcodeClass::Halt ||
              info.klass == OpcodeClass::Invalid)
            break;
          for (unsigned i = 0; i < info.pops; ++i) pop();
          for (unsigned i = 0; i < info.pushes; ++i) stack.push_back({});
        }
      }

      if (b.terminator == Terminator::Fallthrough &&
          b.id + 1 < cfg.blocks.size() && !next_block)
        next_block = b.id + 1;

      if (fork_fallthrough && b.id + 1 < cfg.blocks.size()) {
        ScoutFrame fork = frame;
        fork.block = b.id + 1;
        pending.push_back(std::move(fork));
      }
      if (!next_block) break;
      frame.block = *next_block;
    }
  }
}

}  // namespace

std::vector<FunctionCandidate> filter_candidates(
    const Cfg& cfg, const std::vector<FunctionCandidate>& candidates) {
  std::vector<FunctionCandidate> out;
  for (const FunctionCandidate& c : candidates) {
    std::map<uint32_t, bool> params_seen;  // calldata offset -> masked
    scout_function(cfg, c.entry_block, params_seen);

    FunctionCandidate kept = c;
    kept.param_layout.clear();
    kept.address_params.clear();
    for (const auto& [offset, masked] : params_seen) {
      if ((offset - 4) % 32 != 0) continue;  // not a head-word argument slot
      ParamSlot slot{offset, masked};
      if (masked)
        kept.address_params.push_back(
            static_cast<uint32_t>(kept.param_layout.size()));
      kept.param_layout.push_back(slot);
    }
    if (!kept.address_params.empty()) out.push_back(std::move(kept));
  }
  return out;
}

std::string dump_cfg(const Cfg& cfg) {
  std::ostringstream os;
  for (const BasicBlock& b : cfg.blocks) {
    const Instruction& last = *(cfg.block_end(b) - 1);
    os << "block " << b.id << " [" << b.start_offset << ".."
       << last.next_offset() - 1 << "] term=" << to_string(b.terminator);
    if (b.dynamic_exit) os << " dynamic-exit";
    if (!b.edges.empty()) {
      os << " edges:";
      for (const Edge& e : b.edges)
        os << " ->" << e.to << " " << to_string(e.kind);
    }
    os << "\n";
    for (const Instruction* ins = cfg.block_begin(b); ins != cfg.block_end(b);
         ++ins) {
      os << "  " << ins->offset << ": " << ins->name();
      if (ins->immediate_size > 0) os << " " << to_hex(ins->immediate);
      if (ins->truncated) os << " (truncated)";
      os << "\n";
    }
  }
  if (!cfg.bad_jumps.empty()) {
    for (const BadJump& bj : cfg.bad_jumps)
      os << "bad jump target " << to_hex(bj.target) << " at offset "
         << bj.offset << " (block " << bj.block << ")\n";
  }
  return os.str();
}

}  // namespace evmtaint
