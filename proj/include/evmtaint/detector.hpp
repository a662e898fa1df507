#pragma once

#include "evmtaint/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evmtaint {

struct DetectOptions {
  // restrict the verification pattern to equality checks; the default
  // accepts any tainted branch over the parameter
  bool strict_phase1 = false;
};

// How far a (function, address parameter) pair made it through the cascade.
// Aggregated over all explored paths: one unguarded path is enough.
enum class TupleOutcome : uint8_t {
  DroppedAtV,   // the parameter is examined before it is called
  DroppedAtEC,  // the parameter never becomes an external call target
  DroppedAtSM,  // the call outcome never feeds persistent state
  Vulnerable,
};

const char* to_string(TupleOutcome o);

struct CallWitness {
  uint32_t index = 0;   // event index of the call
  uint32_t offset = 0;  // instruction offset
  uint8_t opcode = 0;
  Uid suc = 0;  // the call's success flag
};

struct SinkHit {
  uint32_t offset = 0;
  std::string kind;      // sstore | value-call | selfdestruct | balance-read
  bool extended = false;  // anything beyond the plain storage write
};

// Phase 1: was the parameter value checked by some branch before the
// witness call? `before_index` bounds the event scan (UINT32_MAX = all).
bool phase_verified(const SimState& s, uint32_t calldata_offset,
                    uint32_t before_index, bool strict);

// Phase 2: first call whose target value derives from the parameter.
std::optional<CallWitness> phase_entry_call(const SimState& s,
                                            uint32_t calldata_offset);

// Phase 3: a state modification after the witness that depends on the
// call outcome, by data flow or by a branch over it.
std::optional<SinkHit> phase_state_mod(const SimState& s,
                                       const CallWitness& w);

struct TupleResult {
  uint32_t param_index = 0;      // position in the candidate's layout
  uint32_t calldata_offset = 0;
  TupleOutcome outcome = TupleOutcome::DroppedAtV;
};

struct Finding {
  std::string selector_hex;  // "a9059cbb" or "none"
  uint32_t param_index = 0;
  uint32_t calldata_offset = 0;
  uint32_t witness_path = 0;  // path id of the exhibiting state
  std::vector<uint32_t> witness_trace;  // its block ids, in visit order
  uint32_t call_offset = 0;
  uint8_t call_opcode = 0;
  uint32_t sink_offset = 0;
  std::string sink_kind;
  bool extended = false;
};

struct FunctionAnalysis {
  FunctionCandidate candidate;
  std::vector<TupleResult> tuples;
  std::vector<Finding> findings;  // one per vulnerable tuple
  size_t paths = 0;
  bool budget_exhausted = false;
  bool deadline_hit = false;
};

// Simulates the candidate once and runs the cascade for every address
// parameter. Stops the path search early once every tuple is resolved
// as vulnerable.
FunctionAnalysis detect_function(
    const Cfg& cfg, const FunctionCandidate& f, const Budget& budget,
    std::chrono::steady_clock::time_point deadline,
    const DetectOptions& opts = {});

}  // namespace evmtaint
