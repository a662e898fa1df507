#include "evmtaint/detector.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace evmtaint {

const char* to_string(TupleOutcome o) {
  switch (o) {
    case TupleOutcome::DroppedAtV: return "dropped-verified";
    case TupleOutcome::DroppedAtEC: return "dropped-no-entry-call";
    case TupleOutcome::DroppedAtSM: return "dropped-no-state-mod";
    case TupleOutcome::Vulnerable: return "vulnerable";
  }
  return "?";
}

bool phase_verified(const SimState& s, uint32_t calldata_offset,
                    uint32_t before_index, bool strict) {
  for (const Event& e : s.events) {
    const auto* j = std::get_if<JumpiSite>(&e);
    if (!j || j->index >= before_index) continue;
    const auto& offs = strict ? j->eq_offsets : j->verified_offsets;
    if (std::binary_search(offs.begin(), offs.end(), calldata_offset))
      return true;
  }
  return false;
}

std::optional<CallWitness> phase_entry_call(const SimState& s,
                                            uint32_t calldata_offset) {
  for (const Event& e : s.events) {
    const auto* c = std::get_if<CallSite>(&e);
    if (!c || !c->result) continue;
    if (std::binary_search(c->target_offsets.begin(), c->target_offsets.end(),
                           calldata_offset)) {
      CallWitness w;
      w.index = c->index;
      w.offset = c->offset;
      w.opcode = c->opcode;
      w.suc = *c->result;
      return w;
    }
  }
  return std::nullopt;
}

namespace {

// uids referenced anywhere else: node provenance or recorded events.
// Used to tell a balance probe that feeds something from a dead read.
std::set<Uid> referenced_uids(const SimState& s) {
  std::set<Uid> used;
  for (const auto& [uid, info] : s.nodes)
    used.insert(info.preds.begin(), info.preds.end());
  for (const Event& e : s.events) {
    if (const auto* st = std::get_if<StoreSite>(&e)) {
      used.insert(st->dest);
      used.insert(st->val);
    } else if (const auto* c = std::get_if<CallSite>(&e)) {
      used.insert(c->target);
      if (c->value) used.insert(*c->value);
    } else if (const auto* j = std::get_if<JumpiSite>(&e)) {
      used.insert(j->cond);
    }
  }
  return used;
}

}  // namespace

std::optional<SinkHit> phase_state_mod(const SimState& s,
                                       const CallWitness& w) {
  // earliest branch after the witness that pivots on the call outcome:
  // everything beyond it is control-dependent on the result
  std::optional<uint32_t> guard_index;
  for (const Event& e : s.events) {
    const auto* j = std::get_if<JumpiSite>(&e);
    if (!j || j->index <= w.index) continue;
    if (uid_reaches(s, j->cond, w.suc, true)) {
      guard_index = j->index;
      break;
    }
  }

  std::set<Uid> used;
  bool used_built = false;

  for (const Event& e : s.events) {
    uint32_t idx = event_index(e);
    if (idx <= w.index) continue;
    bool guarded = guard_index && idx > *guard_index;

    if (const auto* st = std::get_if<StoreSite>(&e)) {
      if (guarded || uid_reaches(s, st->val, w.suc, true) ||
          uid_reaches(s, st->dest, w.suc, true))
        return SinkHit{st->offset, "sstore", false};
    } else if (const auto* c = std::get_if<CallSite>(&e)) {
      if (c->opcode == op::SELFDESTRUCT) {
        if (guarded || uid_reaches(s, c->target, w.suc, true))
          return SinkHit{c->offset, "selfdestruct", true};
      } else if (c->value && c->value_maybe_nonzero) {
        if (guarded || uid_reaches(s, *c->value, w.suc, true) ||
            uid_reaches(s, c->target, w.suc, true))
          return SinkHit{c->offset, "value-call", true};
      }
    } else if (const auto* b = std::get_if<BalanceRead>(&e)) {
      if (guarded || uid_reaches(s, b->result, w.suc, true)) {
        if (!used_built) {
          used = referenced_uids(s);
          used_built = true;
        }
        if (used.count(b->result))
          return SinkHit{b->offset, "balance-read", true};
      }
    }
  }
  return std::nullopt;
}

namespace {

struct TupleTracker {
  uint32_t param_index = 0;
  uint32_t calldata_offset = 0;
  TupleOutcome outcome = TupleOutcome::DroppedAtV;
  bool have_finding = false;
  Finding finding;
};

}  // namespace

FunctionAnalysis detect_function(const Cfg& cfg, const FunctionCandidate& f,
                                 const Budget& budget,
                                 std::chrono::steady_clock::time_point deadline,
                                 const DetectOptions& opts) {
  FunctionAnalysis out;
  out.candidate = f;
  if (f.address_params.empty()) return out;

  std::vector<TupleTracker> tuples;
  for (uint32_t pi : f.address_params) {
    TupleTracker t;
    t.param_index = pi;
    t.calldata_offset = f.param_layout[pi].calldata_offset;
    tuples.push_back(t);
  }

  size_t vulnerable = 0;
  auto on_terminal = [&](const SimState& st) {
    for (TupleTracker& t : tuples) {
      if (t.outcome == TupleOutcome::Vulnerable) continue;
      auto witness = phase_entry_call(st, t.calldata_offset);
      uint32_t bound = witness ? witness->index : UINT32_MAX;
      if (phase_verified(st, t.calldata_offset, bound, opts.strict_phase1)) {
        // examined before use: this path is not evidence either way
        continue;
      }
      if (!witness) {
        t.outcome = std::max(t.outcome, TupleOutcome::DroppedAtEC);
        continue;
      }
      auto sink = phase_state_mod(st, *witness);
      if (!sink) {
        t.outcome = std::max(t.outcome, TupleOutcome::DroppedAtSM);
        continue;
      }
      t.outcome = TupleOutcome::Vulnerable;
      ++vulnerable;
      if (!t.have_finding) {
        t.have_finding = true;
        Finding& fd = t.finding;
        fd.selector_hex = f.selector_hex();
        fd.param_index = t.param_index;
        fd.calldata_offset = t.calldata_offset;
        fd.witness_path = st.path_id;
        fd.witness_trace = st.trace;
        fd.call_offset = witness->offset;
        fd.call_opcode = witness->opcode;
        fd.sink_offset = sink->offset;
        fd.sink_kind = sink->kind;
        fd.extended = sink->extended;
      }
    }
    return vulnerable == tuples.size();
  };

  SimResult sim = simulate_function(cfg, f, budget, deadline, on_terminal);
  out.paths = sim.paths;
  out.budget_exhausted = sim.budget_exhausted;
  out.deadline_hit = sim.deadline_hit;

  for (TupleTracker& t : tuples) {
    TupleResult r;
    r.param_index = t.param_index;
    r.calldata_offset = t.calldata_offset;
    r.outcome = t.outcome;
    out.tuples.push_back(r);
    if (t.have_finding) out.findings.push_back(std::move(t.finding));
  }
  std::sort(out.findings.begin(), out.findings.end(),
            [](const Finding& a, const Finding& b) {
              if (a.selector_hex != b.selector_hex)
                return a.selector_hex < b.selector_hex;
              return a.param_index < b.param_index;
            });
  return out;
}

}  // namespace evmtaint
