#pragma once

#include "evmtaint/cfg.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace evmtaint {

using Uid = uint64_t;
constexpr uint32_t kNoOffset = UINT32_MAX;
constexpr uint32_t kNoIndex = UINT32_MAX;

enum class SourceKind : uint8_t {
  None = 0,
  Calldataload,
  Calldatacopy,
  Origin,
  Caller,
  Callvalue,
  Balance,
  CallResult,
};

const char* to_string(SourceKind k);

// Per-value node in the taint provenance graph: where the value was made,
// whether it is a source root, and which values its taint came from.
struct NodeInfo {
  uint8_t origin = 0;  // minting opcode
  SourceKind source = SourceKind::None;
  uint32_t calldata_offset = kNoOffset;  // Calldataload/Calldatacopy roots
  uint32_t call_index = kNoIndex;        // CallResult roots: CallSite event
  std::vector<Uid> preds;
};

struct AbstractValue {
  Uid uid = 0;
  std::optional<Word> concrete;  // engaged = Concrete, empty = Symbol

  bool is_concrete() const { return concrete.has_value(); }
};

struct CallSite {
  uint32_t index = 0;   // position in the event list
  uint32_t offset = 0;  // instruction offset
  uint8_t opcode = 0;   // CALL/CALLCODE/DELEGATECALL/STATICCALL/SELFDESTRUCT
  Uid target = 0;
  bool target_from_calldata = false;
  std::vector<uint32_t> target_offsets;  // calldata roots of the target value
  std::optional<Uid> result;             // success flag; none for SELFDESTRUCT
  std::optional<Uid> value;              // CALL/CALLCODE transfer amount
  bool value_maybe_nonzero = false;
};

struct StoreSite {
  uint32_t index = 0;
  uint32_t offset = 0;
  Uid dest = 0;
  Uid val = 0;
};

struct JumpiSite {
  uint32_t index = 0;
  uint32_t offset = 0;
  Uid cond = 0;
  bool cond_from_calldata = false;        // ancestry crosses to a calldata root
  std::vector<uint32_t> verified_offsets;  // calldata roots reached without
                                           // passing through a call result
  std::vector<uint32_t> eq_offsets;        // subset reached through an EQ
};

struct BalanceRead {
  uint32_t index = 0;
  uint32_t offset = 0;
  Uid result = 0;
};

using Event = std::variant<CallSite, StoreSite, JumpiSite, BalanceRead>;

uint32_t event_index(const Event& e);
uint32_t event_offset(const Event& e);

enum class PathEnd : uint8_t {
  Running,
  Stop,
  Return,
  Revert,
  Invalid,
  SelfDestruct,
  StackUnderflow,
  SymbolicJumpTarget,
  BadJumpTarget,
  RevisitLimit,
  PathBudget,
  Deadline,
};

const char* to_string(PathEnd e);

struct Budget {
  int max_block_revisits = 3;
  size_t max_paths = 512;
  std::chrono::milliseconds wall_clock{600'000};
};

struct SimState {
  // machine state
  std::vector<AbstractValue> stack;
  std::map<Word, AbstractValue> memory;
  std::unordered_map<Uid, AbstractValue> memory_shadow;  // symbol-addressed
  std::map<Word, AbstractValue> storage;
  std::unordered_map<Uid, AbstractValue> storage_shadow;
  std::map<Word, AbstractValue> transient;
  std::unordered_map<Uid, AbstractValue> transient_shadow;

  // taint state
  std::unordered_set<Uid> tainted;
  std::unordered_map<Uid, NodeInfo> nodes;

  // recorded evidence, in execution order
  std::vector<Event> events;

  // path bookkeeping
  uint32_t current_block = 0;
  std::map<uint32_t, int> visits;
  std::vector<uint32_t> trace;  // block ids in visit order
  Uid next_uid = 1;
  uint32_t path_id = 0;
  uint32_t last_call_index = kNoIndex;
  PathEnd end = PathEnd::Running;

  bool is_tainted(const AbstractValue& v) const { return tainted.count(v.uid) > 0; }
  bool is_tainted(Uid uid) const { return tainted.count(uid) > 0; }

  AbstractValue mint(uint8_t origin_opcode, std::optional<Word> concrete);
  AbstractValue mint_source(uint8_t origin_opcode, SourceKind kind,
                            uint32_t calldata_offset = kNoOffset,
                            uint32_t call_index = kNoIndex);
  void add_pred(Uid child, Uid pred);
  void set_tainted(Uid uid) { tainted.insert(uid); }

  void push(AbstractValue v) { stack.push_back(std::move(v)); }
  AbstractValue push_concrete(const Word& w);
  AbstractValue push_symbol();
  AbstractValue push_source(SourceKind kind, uint32_t calldata_offset = kNoOffset);
};

// Ancestry queries over the provenance graph. Walks from `from` toward
// roots along C_T edges. With cross_call_results = false the walk stops at
// external-call-result roots: a value observed through someone else's
// return data is not the parameter value itself.
bool uid_reaches(const SimState& s, Uid from, Uid to, bool cross_call_results);
bool reaches_calldata_root(const SimState& s, Uid from, bool cross_call_results);
// calldata offsets of the roots reachable without crossing call results;
// eq_offsets lists those reached through at least one EQ node
void collect_calldata_offsets(const SimState& s, Uid from,
                              std::vector<uint32_t>& offsets,
                              std::vector<uint32_t>& eq_offsets);

// Recomputes T as the forward closure of source roots over the provenance
// edges and compares. Exercised by the property tests.
bool taint_closure_holds(const SimState& s);

enum class StepStatus { Ok, Halted, Underflow };

using TerminalHook = std::function<bool(const SimState&)>;
using StepObserver = std::function<void(const Instruction&, size_t depth_before,
                                        size_t depth_after, size_t taint_before,
                                        size_t taint_after)>;

// Executes one non-jump instruction: the full taint-rule dispatch.
// JUMP/JUMPI are handled by step_block since they need the CFG.
StepStatus step_instruction(SimState& s, const Instruction& ins);

struct BlockOutcome {
  enum Kind { Continue, Branch, Terminal } kind = Terminal;
  uint32_t next_block = 0;  // Continue
  // Branch: symbolic JUMPI condition, both sides feasible
  uint32_t taken_block = 0;
  uint32_t fall_block = 0;
  bool has_fall = false;
  bool prioritize_taken = false;  // condition ancestry reaches calldata
};

// Runs the state's current block to its end. Enforces the per-path
// revisit bound on entry; applies the JUMPI path-selection rules.
BlockOutcome step_block(const Cfg& cfg, SimState& s, const Budget& budget,
                        const StepObserver& observer = {});

SimState init_state(const FunctionCandidate& f);

struct SimResult {
  std::vector<SimState> states;  // terminal states, in completion order
  size_t paths = 0;
  bool budget_exhausted = false;
  bool deadline_hit = false;
  bool early_exit = false;
};

// Priority worklist search over the candidate's paths. The hook runs on
// every terminal state; returning true stops the search early.
SimResult simulate_function(
    const Cfg& cfg, const FunctionCandidate& f, const Budget& budget,
    std::chrono::steady_clock::time_point deadline,
    const TerminalHook& on_terminal = {}, const StepObserver& observer = {});

}  // namespace evmtaint
