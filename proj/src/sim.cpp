#include "evmtaint/sim.hpp"

#include "evmtaint/constfold.hpp"

#include <algorithm>
#include <cassert>
#include <queue>
#include <set>

namespace evmtaint {

const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::None: return "none";
    case SourceKind::Calldataload: return "calldataload";
    case SourceKind::Calldatacopy: return "calldatacopy";
    case SourceKind::Origin: return "origin";
    case SourceKind::Caller: return "caller";
    case SourceKind::Callvalue: return "callvalue";
    case SourceKind::Balance: return "balance";
    case SourceKind::CallResult: return "call-result";
  }
  return "?";
}

const char* to_string(PathEnd e) {
  switch (e) {
    case PathEnd::Running: return "running";
    case PathEnd::Stop: return "stop";
    case PathEnd::Return: return "return";
    case PathEnd::Revert: return "revert";
    case PathEnd::Invalid: return "invalid";
    case PathEnd::SelfDestruct: return "selfdestruct";
    case PathEnd::StackUnderflow: return "stack-underflow";
    case PathEnd::SymbolicJumpTarget: return "symbolic-jump-target";
    case PathEnd::BadJumpTarget: return "bad-jump-target";
    case PathEnd::RevisitLimit: return "revisit-limit";
    case PathEnd::PathBudget: return "path-budget";
    case PathEnd::Deadline: return "deadline";
  }
  return "?";
}

uint32_t event_index(const Event& e) {
  return std::visit([](const auto& v) { return v.index; }, e);
}

uint32_t event_offset(const Event& e) {
  return std::visit([](const auto& v) { return v.offset; }, e);
}

AbstractValue SimState::mint(uint8_t origin_opcode, std::optional<Word> concrete) {
  AbstractValue v;
  v.uid = next_uid++;
  v.concrete = std::move(concrete);
  NodeInfo info;
  info.origin = origin_opcode;
  nodes.emplace(v.uid, std::move(info));
  return v;
}

AbstractValue SimState::mint_source(uint8_t origin_opcode, SourceKind kind,
                                    uint32_t calldata_offset,
                                    uint32_t call_index) {
  AbstractValue v = mint(origin_opcode, std::nullopt);
  NodeInfo& info = nodes[v.uid];
  info.source = kind;
  info.calldata_offset = calldata_offset;
  info.call_index = call_index;
  tainted.insert(v.uid);
  return v;
}

void SimState::add_pred(Uid child, Uid pred) {
  if (child == pred) return;
  auto& preds = nodes[child].preds;
  if (std::find(preds.begin(), preds.end(), pred) == preds.end())
    preds.push_back(pred);
}

AbstractValue SimState::push_concrete(const Word& w) {
  AbstractValue v = mint(op::PUSH32, w);
  push(v);
  return v;
}

AbstractValue SimState::push_symbol() {
  AbstractValue v = mint(0, std::nullopt);
  push(v);
  return v;
}

AbstractValue SimState::push_source(SourceKind kind, uint32_t calldata_offset) {
  uint8_t origin = op::CALLDATALOAD;
  switch (kind) {
    case SourceKind::Origin: origin = op::ORIGIN; break;
    case SourceKind::Caller: origin = op::CALLER; break;
    case SourceKind::Callvalue: origin = op::CALLVALUE; break;
    case SourceKind::Balance: origin = op::BALANCE; break;
    case SourceKind::Calldatacopy: origin = op::CALLDATACOPY; break;
    case SourceKind::CallResult: origin = op::CALL; break;
    default: break;
  }
  AbstractValue v = mint_source(origin, kind, calldata_offset);
  push(v);
  return v;
}

namespace {

bool is_call_result_root(const NodeInfo& n) {
  return n.source == SourceKind::CallResult;
}

}  // namespace

bool uid_reaches(const SimState& s, Uid from, Uid to, bool cross_call_results) {
  if (from == to) return true;
  std::vector<Uid> work{from};
  std::set<Uid> seen{from};
  while (!work.empty()) {
    Uid u = work.back();
    work.pop_back();
    auto it = s.nodes.find(u);
    if (it == s.nodes.end()) continue;
    if (!cross_call_results && u != from && is_call_result_root(it->second))
      continue;
    for (Uid p : it->second.preds) {
      if (p == to) return true;
      if (seen.insert(p).second) work.push_back(p);
    }
  }
  return false;
}

bool reaches_calldata_root(const SimState& s, Uid from, bool cross_call_results) {
  std::vector<Uid> work{from};
  std::set<Uid> seen{from};
  while (!work.empty()) {
    Uid u = work.back();
    work.pop_back();
    auto it = s.nodes.find(u);
    if (it == s.nodes.end()) continue;
    const NodeInfo& n = it->second;
    if (n.source == SourceKind::Calldataload ||
        n.source == SourceKind::Calldatacopy)
      return true;
    if (!cross_call_results && is_call_result_root(n)) continue;
    for (Uid p : n.preds)
      if (seen.insert(p).second) work.push_back(p);
  }
  return false;
}

void collect_calldata_offsets(const SimState& s, Uid from,
                              std::vector<uint32_t>& offsets,
                              std::vector<uint32_t>& eq_offsets) {
  std::set<uint32_t> all, through_eq;
  // second element: an EQ node sits on the walk so far
  std::vector<std::pair<Uid, bool>> work;
  std::set<std::pair<Uid, bool>> seen;

  auto start_eq = [&](Uid u) {
    auto it = s.nodes.find(u);
    return it != s.nodes.end() && it->second.origin == op::EQ;
  };
  work.push_back({from, start_eq(from)});
  seen.insert(work.back());

  while (!work.empty()) {
    auto [u, eq] = work.back();
    work.pop_back();
    auto it = s.nodes.find(u);
    if (it == s.nodes.end()) continue;
    const NodeInfo& n = it->second;
    if ((n.source == SourceKind::Calldataload ||
         n.source == SourceKind::Calldatacopy) &&
        n.calldata_offset != kNoOffset) {
      all.insert(n.calldata_offset);
      if (eq) through_eq.insert(n.calldata_offset);
    }
    if (is_call_result_root(n)) continue;  // not the value itself
    for (Uid p : n.preds) {
      bool next_eq = eq || start_eq(p);
      if (seen.insert({p, next_eq}).second) work.push_back({p, next_eq});
    }
  }
  offsets.assign(all.begin(), all.end());
  eq_offsets.assign(through_eq.begin(), through_eq.end());
}

bool taint_closure_holds(const SimState& s) {
  std::set<Uid> expected;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [uid, info] : s.nodes) {
      if (expected.count(uid)) continue;
      bool t = info.source != SourceKind::None;
      if (!t)
        for (Uid p : info.preds)
          if (expected.count(p)) { t = true; break; }
      if (t) {
        expected.insert(uid);
        changed = true;
      }
    }
  }
  if (expected.size() != s.tainted.size()) return false;
  for (Uid u : s.tainted)
    if (!expected.count(u)) return false;
  return true;
}

namespace {

struct Popped {
  std::vector<AbstractValue> vals;  // top first
  bool ok = true;
};

Popped pop_n(SimState& s, unsigned n) {
  Popped out;
  if (s.stack.size() < n) {
    out.ok = false;
    return out;
  }
  out.vals.reserve(n);
  for (unsigned i = 0; i < n; ++i) {
    out.vals.push_back(std::move(s.stack.back()));
    s.stack.pop_back();
  }
  return out;
}

// the three-case stack rule: result carries taint from whichever
// operands are tainted, with those operands as provenance
void apply_stack_taint(SimState& s, AbstractValue& result,
                       const std::vector<AbstractValue>& operands) {
  bool any = false;
  for (const AbstractValue& v : operands) {
    if (s.is_tainted(v)) {
      any = true;
      s.add_pred(result.uid, v.uid);
    }
  }
  if (any) s.set_tainted(result.uid);
}

using CellMap = std::map<Word, AbstractValue>;
using ShadowMap = std::unordered_map<Uid, AbstractValue>;

const AbstractValue* find_cell(const CellMap& cells, const ShadowMap& shadow,
                               const AbstractValue& tar) {
  if (tar.is_concrete()) {
    auto it = cells.find(*tar.concrete);
    return it == cells.end() ? nullptr : &it->second;
  }
  auto it = shadow.find(tar.uid);
  return it == shadow.end() ? nullptr : &it->second;
}

// load rule: fresh value; taint flows in from a tainted address and from a
// tainted stored value, each with its own provenance edge
AbstractValue do_load(SimState& s, const CellMap& cells, const ShadowMap& shadow,
                      uint8_t opcode, const AbstractValue& tar) {
  const AbstractValue* hit = find_cell(cells, shadow, tar);
  AbstractValue ret = s.mint(opcode, hit ? hit->concrete : std::nullopt);
  if (hit && s.is_tainted(*hit)) {
    s.set_tainted(ret.uid);
    s.add_pred(ret.uid, hit->uid);
  }
  if (s.is_tainted(tar)) {
    s.set_tainted(ret.uid);
    s.add_pred(ret.uid, tar.uid);
  }
  return ret;
}

// store rule: a tainted destination taints the stored value itself
void do_store(SimState& s, CellMap& cells, ShadowMap& shadow,
              const AbstractValue& tar, AbstractValue val, bool byte_store) {
  if (byte_store && val.is_concrete()) val.concrete = *val.concrete & 0xff;
  if (s.is_tainted(tar)) {
    s.set_tainted(val.uid);
    s.add_pred(val.uid, tar.uid);  // add_pred drops self-edges
  }
  if (tar.is_concrete())
    cells[*tar.concrete] = val;
  else
    shadow[tar.uid] = val;
}

constexpr Word kMaxRangeBytes = 4096;

// word-granular writes over [dest, dest+len): the sparse key-value model
void write_range(SimState& s, const AbstractValue& dest,
                 const AbstractValue& len,
                 const std::function<AbstractValue(const Word& rel)>& make_cell) {
  if (len.is_concrete() && *len.concrete == 0) return;
  if (dest.is_concrete() && len.is_concrete() && *len.concrete <= kMaxRangeBytes) {
    for (Word rel = 0; rel < *len.concrete; rel += 32)
      s.memory[*dest.concrete + rel] = make_cell(rel);
    return;
  }
  // unknown extent: model the first word only
  if (dest.is_concrete())
    s.memory[*dest.concrete] = make_cell(0);
  else
    s.memory_shadow[dest.uid] = make_cell(0);
}

}  // namespace

StepStatus step_instruction(SimState& s, const Instruction& ins) {
  uint8_t o = ins.opcode;
  const OpcodeInfo& info = ins.info();

  assert(o != op::JUMP && o != op::JUMPI);

  if (op::is_push(o) || o == op::PUSH0) {
    s.push(s.mint(o, ins.immediate));
    return StepStatus::Ok;
  }
  if (o == op::POP) {
    return pop_n(s, 1).ok ? StepStatus::Ok : StepStatus::Underflow;
  }
  if (op::is_dup(o)) {
    size_t n = static_cast<size_t>(o - op::DUP1) + 1;
    if (s.stack.size() < n) return StepStatus::Underflow;
    s.push(s.stack[s.stack.size() - n]);  // same uid, same taint
    return StepStatus::Ok;
  }
  if (op::is_swap(o)) {
    size_t n = static_cast<size_t>(o - op::SWAP1) + 1;
    if (s.stack.size() < n + 1) return StepStatus::Underflow;
    std::swap(s.stack[s.stack.size() - 1], s.stack[s.stack.size() - 1 - n]);
    return StepStatus::Ok;
  }
  if (o == op::JUMPDEST) return StepStatus::Ok;

  switch (o) {
    case op::KECCAK256: {
      auto p = pop_n(s, 2);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& off = p.vals[0];
      const AbstractValue& len = p.vals[1];
      AbstractValue ret = s.mint(o, std::nullopt);
      if (off.is_concrete() && len.is_concrete() &&
          *len.concrete <= kMaxRangeBytes) {
        for (auto it = s.memory.lower_bound(*off.concrete);
             it != s.memory.end() && it->first < *off.concrete + *len.concrete;
             ++it) {
          if (s.is_tainted(it->second)) {
            s.set_tainted(ret.uid);
            s.add_pred(ret.uid, it->second.uid);
          }
        }
      } else {
        apply_stack_taint(s, ret, p.vals);
      }
      s.push(ret);
      return StepStatus::Ok;
    }

    case op::CALLDATALOAD: {
      auto p = pop_n(s, 1);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& off = p.vals[0];
      uint32_t offset = kNoOffset;
      if (off.is_concrete() && *off.concrete <= UINT32_MAX)
        offset = static_cast<uint32_t>(*off.concrete);
      AbstractValue ret = s.mint_source(o, SourceKind::Calldataload, offset);
      if (s.is_tainted(off)) s.add_pred(ret.uid, off.uid);
      s.push(ret);
      return StepStatus::Ok;
    }

    case op::CALLDATACOPY: {
      auto p = pop_n(s, 3);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& dest = p.vals[0];
      const AbstractValue& src = p.vals[1];
      const AbstractValue& len = p.vals[2];
      write_range(s, dest, len, [&](const Word& rel) {
        uint32_t offset = kNoOffset;
        if (src.is_concrete() && *src.concrete + rel <= UINT32_MAX)
          offset = static_cast<uint32_t>(*src.concrete + rel);
        return s.mint_source(o, SourceKind::Calldatacopy, offset);
      });
      return StepStatus::Ok;
    }

    case op::CODECOPY:
    case op::EXTCODECOPY: {
      auto p = pop_n(s, info.pops);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& dest = p.vals[o == op::EXTCODECOPY ? 1 : 0];
      const AbstractValue& len = p.vals[o == op::EXTCODECOPY ? 3 : 2];
      write_range(s, dest, len,
                  [&](const Word&) { return s.mint(o, std::nullopt); });
      return StepStatus::Ok;
    }

    case op::MCOPY: {
      auto p = pop_n(s, 3);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& dest = p.vals[0];
      const AbstractValue& src = p.vals[1];
      const AbstractValue& len = p.vals[2];
      if (dest.is_concrete() && src.is_concrete() && len.is_concrete() &&
          *len.concrete <= kMaxRangeBytes) {
        for (Word rel = 0; rel < *len.concrete; rel += 32) {
          auto it = s.memory.find(*src.concrete + rel);
          if (it != s.memory.end())
            s.memory[*dest.concrete + rel] = it->second;
          else
            s.memory.erase(*dest.concrete + rel);
        }
      }
      // symbolic extents are dropped; nothing observable depends on them
      return StepStatus::Ok;
    }

    case op::MLOAD:
    case op::SLOAD:
    case op::TLOAD: {
      auto p = pop_n(s, 1);
      if (!p.ok) return StepStatus::Underflow;
      const CellMap& cells = o == op::MLOAD    ? s.memory
                             : o == op::SLOAD ? s.storage
                                              : s.transient;
      const ShadowMap& shadow = o == op::MLOAD    ? s.memory_shadow
                                : o == op::SLOAD ? s.storage_shadow
                                                 : s.transient_shadow;
      s.push(do_load(s, cells, shadow, o, p.vals[0]));
      return StepStatus::Ok;
    }

    case op::MSTORE:
    case op::MSTORE8: {
      auto p = pop_n(s, 2);
      if (!p.ok) return StepStatus::Underflow;
      do_store(s, s.memory, s.memory_shadow, p.vals[0], p.vals[1],
               o == op::MSTORE8);
      return StepStatus::Ok;
    }

    case op::TSTORE: {
      auto p = pop_n(s, 2);
      if (!p.ok) return StepStatus::Underflow;
      do_store(s, s.transient, s.transient_shadow, p.vals[0], p.vals[1], false);
      return StepStatus::Ok;
    }

    case op::SSTORE: {
      auto p = pop_n(s, 2);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& dest = p.vals[0];
      const AbstractValue& val = p.vals[1];
      StoreSite site;
      site.index = static_cast<uint32_t>(s.events.size());
      site.offset = ins.offset;
      site.dest = dest.uid;
      site.val = val.uid;
      s.events.push_back(site);
      do_store(s, s.storage, s.storage_shadow, dest, val, false);
      return StepStatus::Ok;
    }

    case op::ORIGIN:
      s.push(s.mint_source(o, SourceKind::Origin));
      return StepStatus::Ok;
    case op::CALLER:
      s.push(s.mint_source(o, SourceKind::Caller));
      return StepStatus::Ok;
    case op::CALLVALUE:
      s.push(s.mint_source(o, SourceKind::Callvalue));
      return StepStatus::Ok;

    case op::BALANCE: {
      auto p = pop_n(s, 1);
      if (!p.ok) return StepStatus::Underflow;
      AbstractValue ret = s.mint_source(o, SourceKind::Balance);
      if (s.is_tainted(p.vals[0])) s.add_pred(ret.uid, p.vals[0].uid);
      BalanceRead ev;
      ev.index = static_cast<uint32_t>(s.events.size());
      ev.offset = ins.offset;
      ev.result = ret.uid;
      s.events.push_back(ev);
      s.push(ret);
      return StepStatus::Ok;
    }

    case op::EXTCODESIZE:
    case op::EXTCODEHASH:
    case op::BLOCKHASH:
    case op::BLOBHASH: {
      // reading chain state addressed by a tainted value yields a tainted
      // observation (a step past the formal rules, kept for recall)
      auto p = pop_n(s, 1);
      if (!p.ok) return StepStatus::Underflow;
      AbstractValue ret = s.mint(o, std::nullopt);
      if (s.is_tainted(p.vals[0])) {
        s.set_tainted(ret.uid);
        s.add_pred(ret.uid, p.vals[0].uid);
      }
      s.push(ret);
      return StepStatus::Ok;
    }

    case op::RETURNDATASIZE: {
      if (s.last_call_index == kNoIndex) {
        s.push(s.mint(o, Word(0)));  // no call yet: definitionally zero
        return StepStatus::Ok;
      }
      AbstractValue ret =
          s.mint_source(o, SourceKind::CallResult, kNoOffset, s.last_call_index);
      const auto& cs = std::get<CallSite>(s.events[s.last_call_index]);
      if (cs.result) s.add_pred(ret.uid, *cs.result);
      s.push(ret);
      return StepStatus::Ok;
    }

    case op::RETURNDATACOPY: {
      auto p = pop_n(s, 3);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& dest = p.vals[0];
      const AbstractValue& len = p.vals[2];
      std::optional<Uid> suc;
      if (s.last_call_index != kNoIndex)
        suc = std::get<CallSite>(s.events[s.last_call_index]).result;
      write_range(s, dest, len, [&](const Word&) {
        if (s.last_call_index == kNoIndex) return s.mint(o, std::nullopt);
        AbstractValue cell =
            s.mint_source(o, SourceKind::CallResult, kNoOffset, s.last_call_index);
        if (suc) s.add_pred(cell.uid, *suc);
        return cell;
      });
      return StepStatus::Ok;
    }

    case op::CALL:
    case op::CALLCODE:
    case op::DELEGATECALL:
    case op::STATICCALL: {
      bool has_value = o == op::CALL || o == op::CALLCODE;
      auto p = pop_n(s, has_value ? 7 : 6);
      if (!p.ok) return StepStatus::Underflow;
      const AbstractValue& addr = p.vals[1];
      const AbstractValue* value = has_value ? &p.vals[2] : nullptr;
      const AbstractValue& ret_off = p.vals[has_value ? 5 : 4];
      const AbstractValue& ret_len = p.vals[has_value ? 6 : 5];

      CallSite site;
      site.index = static_cast<uint32_t>(s.events.size());
      site.offset = ins.offset;
      site.opcode = o;
      site.target = addr.uid;
      std::vector<uint32_t> eq_unused;
      collect_calldata_offsets(s, addr.uid, site.target_offsets, eq_unused);
      site.target_from_calldata = reaches_calldata_root(s, addr.uid, false);

      AbstractValue suc = s.mint(o, std::nullopt);
      if (site.target_from_calldata) {
        // an address delivered through the function entry reaches an
        // external call: the success flag is attacker-influenced
        s.set_tainted(suc.uid);
        s.add_pred(suc.uid, addr.uid);
      }
      site.result = suc.uid;
      if (value) {
        site.value = value->uid;
        site.value_maybe_nonzero =
            !value->is_concrete() || *value->concrete != 0;
      }
      s.events.push_back(site);
      uint32_t call_index = site.index;
      s.last_call_index = call_index;

      write_range(s, ret_off, ret_len, [&](const Word&) {
        AbstractValue cell =
            s.mint_source(o, SourceKind::CallResult, kNoOffset, call_index);
        s.add_pred(cell.uid, suc.uid);
        return cell;
      });
      s.push(suc);
      return StepStatus::Ok;
    }

    case op::SELFDESTRUCT: {
      auto p = pop_n(s, 1);
      if (!p.ok) return StepStatus::Underflow;
      CallSite site;
      site.index = static_cast<uint32_t>(s.events.size());
      site.offset = ins.offset;
      site.opcode = o;
      site.target = p.vals[0].uid;
      std::vector<uint32_t> eq_unused;
      collect_calldata_offsets(s, site.target, site.target_offsets, eq_unused);
      site.target_from_calldata = reaches_calldata_root(s, site.target, false);
      site.value_maybe_nonzero = true;  // beneficiary receives the balance
      s.events.push_back(site);
      s.last_call_index = site.index;
      s.end = PathEnd::SelfDestruct;
      return StepStatus::Halted;
    }

    case op::CREATE:
    case op::CREATE2: {
      auto p = pop_n(s, info.pops);
      if (!p.ok) return StepStatus::Underflow;
      s.push(s.mint(o, std::nullopt));  // fresh, untainted address
      return StepStatus::Ok;
    }

    case op::STOP:
      s.end = PathEnd::Stop;
      return StepStatus::Halted;
    case op::RETURN: {
      if (!pop_n(s, 2).ok) return StepStatus::Underflow;
      s.end = PathEnd::Return;
      return StepStatus::Halted;
    }
    case op::REVERT: {
      if (!pop_n(s, 2).ok) return StepStatus::Underflow;
      s.end = PathEnd::Revert;
      return StepStatus::Halted;
    }

    default: break;
  }

  if (info.klass == OpcodeClass::Halt || info.klass == OpcodeClass::Invalid) {
    s.end = PathEnd::Invalid;
    return StepStatus::Halted;
  }

  if (op::is_log(o)) {
    return pop_n(s, info.pops).ok ? StepStatus::Ok : StepStatus::Underflow;
  }

  if (info.klass == OpcodeClass::Environment) {
    // block/tx context the caller does not control: plain fresh symbols
    auto p = pop_n(s, info.pops);
    if (!p.ok) return StepStatus::Underflow;
    for (unsigned i = 0; i < info.pushes; ++i) s.push(s.mint(o, std::nullopt));
    return StepStatus::Ok;
  }

  // pure stack operation: fold when fully concrete, else a fresh symbol
  auto p = pop_n(s, info.pops);
  if (!p.ok) return StepStatus::Underflow;
  std::optional<Word> folded;
  bool all_concrete = true;
  for (const AbstractValue& v : p.vals) all_concrete &= v.is_concrete();
  if (all_concrete) {
    if (foldable_unary(o) && p.vals.size() == 1)
      folded = fold_unary(o, *p.vals[0].concrete);
    else if (foldable_binary(o) && p.vals.size() == 2)
      folded = fold_binary(o, *p.vals[0].concrete, *p.vals[1].concrete);
    else if (foldable_ternary(o) && p.vals.size() == 3)
      folded = fold_ternary(o, *p.vals[0].concrete, *p.vals[1].concrete,
                            *p.vals[2].concrete);
  }
  if (info.pushes == 0) return StepStatus::Ok;
  AbstractValue ret = s.mint(o, folded);
  apply_stack_taint(s, ret, p.vals);
  s.push(ret);
  return StepStatus::Ok;
}

namespace {

void record_jumpi_site(SimState& s, const Instruction& ins,
                       const AbstractValue& cond) {
  if (!s.is_tainted(cond)) return;
  JumpiSite site;
  site.index = static_cast<uint32_t>(s.events.size());
  site.offset = ins.offset;
  site.cond = cond.uid;
  site.cond_from_calldata = reaches_calldata_root(s, cond.uid, true);
  collect_calldata_offsets(s, cond.uid, site.verified_offsets, site.eq_offsets);
  s.events.push_back(std::move(site));
}

}  // namespace

BlockOutcome step_block(const Cfg& cfg, SimState& s, const Budget& budget,
                        const StepObserver& observer) {
  BlockOutcome out;
  uint32_t bid = s.current_block;
  if (bid >= cfg.blocks.size()) {
    s.end = PathEnd::BadJumpTarget;
    return out;
  }
  if (++s.visits[bid] > budget.max_block_revisits) {
    s.end = PathEnd::RevisitLimit;
    return out;
  }
  s.trace.push_back(bid);
  const BasicBlock& b = cfg.blocks[bid];

  for (const Instruction* ins = cfg.block_begin(b); ins != cfg.block_end(b);
       ++ins) {
    size_t depth_before = s.stack.size();
    size_t taint_before = s.tainted.size();
    auto observe = [&] {
      if (observer)
        observer(*ins, depth_before, s.stack.size(), taint_before,
                 s.tainted.size());
    };

    if (ins->opcode == op::JUMP) {
      auto p = pop_n(s, 1);
      observe();
      if (!p.ok) {
        s.end = PathEnd::StackUnderflow;
        return out;
      }
      const AbstractValue& dest = p.vals[0];
      if (!dest.is_concrete()) {
        s.end = PathEnd::SymbolicJumpTarget;
        return out;
      }
      auto target = cfg.jump_target_block(*dest.concrete);
      if (!target) {
        s.end = PathEnd::BadJumpTarget;
        return out;
      }
      out.kind = BlockOutcome::Continue;
      out.next_block = *target;
      return out;
    }

    if (ins->opcode == op::JUMPI) {
      auto p = pop_n(s, 2);
      if (!p.ok) {
        observe();
        s.end = PathEnd::StackUnderflow;
        return out;
      }
      const AbstractValue& dest = p.vals[0];
      const AbstractValue& cond = p.vals[1];
      record_jumpi_site(s, *ins, cond);
      observe();

      bool has_fall = bid + 1 < cfg.blocks.size();
      // rule 1: a concrete condition decides the branch outright
      if (cond.is_concrete()) {
        if (*cond.concrete == 0) {
          if (!has_fall) {
            s.end = PathEnd::Stop;  // fallthrough past the end of code
            return out;
          }
          out.kind = BlockOutcome::Continue;
          out.next_block = bid + 1;
          return out;
        }
        if (!dest.is_concrete()) {
          s.end = PathEnd::SymbolicJumpTarget;
          return out;
        }
        auto target = cfg.jump_target_block(*dest.concrete);
        if (!target) {
          s.end = PathEnd::BadJumpTarget;
          return out;
        }
        out.kind = BlockOutcome::Continue;
        out.next_block = *target;
        return out;
      }
      // rule 2: symbolic condition, both branches stay live
      if (!dest.is_concrete()) {
        s.end = PathEnd::SymbolicJumpTarget;
        return out;
      }
      auto target = cfg.jump_target_block(*dest.concrete);
      if (!target) {
        s.end = PathEnd::BadJumpTarget;
        return out;
      }
      out.kind = BlockOutcome::Branch;
      out.taken_block = *target;
      out.fall_block = bid + 1;
      out.has_fall = has_fall;
      // 2(a): a condition an attacker steers from calldata gets its taken
      // branch explored first, bypassing the examination
      out.prioritize_taken = reaches_calldata_root(s, cond.uid, true);
      return out;
    }

    StepStatus st = step_instruction(s, *ins);
    observe();
    if (st == StepStatus::Underflow) {
      s.end = PathEnd::StackUnderflow;
      return out;
    }
    if (st == StepStatus::Halted) return out;
  }

  if (bid + 1 < cfg.blocks.size()) {
    out.kind = BlockOutcome::Continue;
    out.next_block = bid + 1;
    return out;
  }
  s.end = PathEnd::Stop;  // ran off the end of code
  return out;
}

SimState init_state(const FunctionCandidate& f) {
  SimState s;
  s.current_block = f.entry_block;
  return s;
}

namespace {

struct PendingPath {
  int priority = 1;  // 0 = prioritized branch
  uint64_t seq = 0;
  SimState state;
};

struct PendingOrder {
  bool operator()(const PendingPath& a, const PendingPath& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.state.current_block != b.state.current_block)
      return a.state.current_block > b.state.current_block;
    return a.seq > b.seq;  // min-queue: earliest insertion wins ties
  }
};

}  // namespace

SimResult simulate_function(const Cfg& cfg, const FunctionCandidate& f,
                            const Budget& budget,
                            std::chrono::steady_clock::time_point deadline,
                            const TerminalHook& on_terminal,
                            const StepObserver& observer) {
  SimResult result;
  std::vector<PendingPath> heap;
  const PendingOrder order{};
  uint64_t seq = 0;
  uint32_t next_path_id = 1;

  auto push_pending = [&](PendingPath&& p) {
    heap.push_back(std::move(p));
    std::push_heap(heap.begin(), heap.end(), order);
  };
  auto pop_pending = [&] {
    std::pop_heap(heap.begin(), heap.end(), order);
    PendingPath p = std::move(heap.back());
    heap.pop_back();
    return p;
  };

  PendingPath root;
  root.seq = seq++;
  root.state = init_state(f);
  push_pending(std::move(root));

  auto finish = [&](SimState&& st) -> bool {
    ++result.paths;
    result.states.push_back(std::move(st));
    if (on_terminal && on_terminal(result.states.back())) {
      result.early_exit = true;
      return true;
    }
    return false;
  };

  while (!heap.empty()) {
    if (result.paths >= budget.max_paths) {
      result.budget_exhausted = true;
      break;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      result.deadline_hit = true;
      break;
    }
    SimState state = pop_pending().state;

    bool running = true;
    while (running) {
      if (std::chrono::steady_clock::now() > deadline) {
        result.deadline_hit = true;
        state.end = PathEnd::Deadline;
        finish(std::move(state));
        running = false;
        break;
      }
      BlockOutcome out = step_block(cfg, state, budget, observer);
      switch (out.kind) {
        case BlockOutcome::Continue:
          state.current_block = out.next_block;
          break;
        case BlockOutcome::Terminal:
          if (finish(std::move(state))) return result;
          running = false;
          break;
        case BlockOutcome::Branch: {
          PendingPath taken;
          taken.priority = out.prioritize_taken ? 0 : 1;
          taken.seq = seq++;
          taken.state = state;  // copy; the fork point owns the original
          taken.state.current_block = out.taken_block;
          push_pending(std::move(taken));
          if (out.has_fall) {
            PendingPath fall;
            fall.seq = seq++;
            fall.state = std::move(state);
            fall.state.current_block = out.fall_block;
            fall.state.path_id = next_path_id++;
            push_pending(std::move(fall));
          }
          running = false;
          break;
        }
      }
    }
    if (result.early_exit || result.deadline_hit) break;
  }
  return result;
}

}  // namespace evmtaint
