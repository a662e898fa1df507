#pragma once

#include "evmtaint/bytecode.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace evmtaint {

enum class Terminator { Jump, JumpI, Halt, Fallthrough, Invalid };
enum class EdgeKind { Fallthrough, JumpdestTaken, Sequential };

const char* to_string(Terminator t);
const char* to_string(EdgeKind k);

struct Edge {
  uint32_t to = 0;  // block id
  EdgeKind kind = EdgeKind::Sequential;
};

struct BasicBlock {
  uint32_t id = 0;
  uint32_t start_offset = 0;
  uint32_t first_instruction = 0;  // index into Cfg::instructions
  uint32_t instruction_count = 0;
  Terminator terminator = Terminator::Fallthrough;
  std::vector<Edge> edges;
  // true when the block ends in a JUMP/JUMPI whose target is not a
  // block-local constant; the simulator resolves those at run time
  bool dynamic_exit = false;
};

struct BadJump {
  uint32_t block = 0;
  uint32_t offset = 0;  // of the JUMP/JUMPI
  Word target;
};

struct Cfg {
  std::vector<Instruction> instructions;
  std::vector<BasicBlock> blocks;
  std::unordered_map<uint32_t, uint32_t> block_by_offset;  // start offset -> id
  std::vector<BadJump> bad_jumps;

  const Instruction* instruction_at(uint32_t offset) const;
  // id of the block starting at `offset` with a JUMPDEST, if any
  std::optional<uint32_t> jump_target_block(const Word& target) const;
  const Instruction* block_begin(const BasicBlock& b) const {
    return instructions.data() + b.first_instruction;
  }
  const Instruction* block_end(const BasicBlock& b) const {
    return block_begin(b) + b.instruction_count;
  }
};

// Partition into basic blocks. Leaders: offset 0, every JUMPDEST, and the
// instruction after a JUMP/JUMPI/halting/invalid instruction. No edges yet.
Cfg build_blocks(std::vector<Instruction> instructions);

// Adds the statically resolvable edges: fallthrough successors of JUMPI,
// sequential successors of fallthrough blocks, and jump edges whose target
// is a constant produced inside the jumping block itself.
void build_cfg(Cfg& cfg);

Cfg cfg_from_code(const std::vector<uint8_t>& runtime);

struct ParamSlot {
  uint32_t calldata_offset = 0;
  bool is_address = false;
};

struct FunctionCandidate {
  std::optional<uint32_t> selector;  // none in degraded single-root mode
  uint32_t entry_block = 0;
  std::vector<ParamSlot> param_layout;     // filled by filter_candidates
  std::vector<uint32_t> address_params;    // indices into param_layout

  std::string selector_hex() const;  // "a9059cbb" or "none"
};

// Recovers the public-function table from the selector dispatcher at block
// 0 (linear EQ chains and GT/LT binary-search layouts). Bytecode without a
// recognizable dispatcher degrades to one candidate rooted at block 0.
std::vector<FunctionCandidate> extract_functions(const Cfg& cfg);

// Keeps candidates that take at least one address-typed parameter,
// detected by a calldata word flowing into AND with the 160-bit all-ones
// mask. Fills param_layout / address_params on the survivors.
std::vector<FunctionCandidate> filter_candidates(
    const Cfg& cfg, const std::vector<FunctionCandidate>& candidates);

std::string dump_cfg(const Cfg& cfg);

}  // namespace evmtaint
