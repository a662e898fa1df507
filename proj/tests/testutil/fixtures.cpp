#include "fixtures.hpp"

#include "evmtaint/keccak.hpp"

namespace evmtaint::testutil {

namespace {

// Single-function selector dispatch: route `selector` to `body`, revert
// otherwise. Body block starts with its JUMPDEST.
void dispatch_one(Asm& a, uint32_t selector, const std::string& body) {
  a.push(0).op(op::CALLDATALOAD).push(0xe0).op(op::SHR);
  a.op(op::DUP1).push(selector, 4).op(op::EQ).push_label(body).op(op::JUMPI);
  a.push(0).push(0).op(op::REVERT);
}

// [] -> [word]
void load_word(Asm& a, uint32_t off) { a.push(off).op(op::CALLDATALOAD); }

// [] -> [addr]  (calldata word masked to 160 bits)
void load_addr(Asm& a, uint32_t off) {
  load_word(a, off);
  a.push(address_mask(), 20).op(op::AND);
}

// Call the address sitting at stack depth `d` with empty calldata.
// [..] -> [.., success]; return data, if any, lands at memory 0.
void call_empty(Asm& a, int d, uint32_t ret_len, uint8_t opcode) {
  const bool carries_value = opcode == op::CALL || opcode == op::CALLCODE;
  a.push(ret_len).push(0).push(0).push(0);
  int raised = 4;
  if (carries_value) {
    a.push(0);
    raised = 5;
  }
  a.op(static_cast<uint8_t>(op::DUP1 + d + raised - 1));
  a.op(op::GAS).op(opcode);
}

// [val] -> []
void mstore_at(Asm& a, uint32_t off) { a.push(off).op(op::MSTORE); }

// [] -> [mem[0]]
void mload0(Asm& a) { a.push(0).op(op::MLOAD); }

// [val] -> []
void sstore_key(Asm& a, uint32_t key) { a.push(key).op(op::SSTORE); }

// [] -> [keccak(mem[0..64))]
void keccak64(Asm& a) { a.push(64).push(0).op(op::KECCAK256); }

// require(mapping[keyed-by-top-copy] != 0) for the address at the top of
// the stack, with the mapping rooted at storage `slot`. [x] -> [x]
void require_listed(Asm& a, uint32_t slot) {
  a.op(op::DUP1);
  mstore_at(a, 0);
  a.push(slot);
  mstore_at(a, 32);
  keccak64(a);
  a.op(op::SLOAD);
  a.require();
}

// Linear scan over storage[base..base+2): jump out to `hit` when an entry
// equals the address at the stack top, revert after the last entry.
// [x] -> [x] at `hit`.
void require_enumerated(Asm& a, uint32_t base, int id) {
  const std::string loop = "scan" + std::to_string(id);
  const std::string miss = "miss" + std::to_string(id);
  const std::string hit = "hit" + std::to_string(id);
  a.push(0);  // [x, i]
  a.jumpdest(loop);
  a.push(2).op(uint8_t(op::DUP1 + 1)).op(op::LT).op(op::ISZERO);
  a.push_label(miss).op(op::JUMPI);
  a.op(op::DUP1).push(base).op(op::ADD).op(op::SLOAD);  // [x, i, entry]
  a.op(uint8_t(op::DUP1 + 2)).op(op::EQ);
  a.push_label(hit).op(op::JUMPI);  // [x, i]
  a.push(1).op(op::ADD);
  a.jump(loop);
  a.jumpdest(miss);
  a.push(0).push(0).op(op::REVERT);
  a.jumpdest(hit);
  a.op(op::POP);  // [x]
}

// Each body opens with a throwaway marker so no two fixtures share a
// runtime hash.
void marker(Asm& a, uint32_t id) { a.push(id).op(op::POP); }

Fixture make(const std::string& name, Asm& a, bool vulnerable,
             const std::string& sig, uint32_t param_offset,
             const std::string& sink, TupleOutcome expected) {
  Fixture f;
  f.name = name;
  f.runtime = a.assemble();
  f.vulnerable = vulnerable;
  f.selector_hex = abi_selector(sig);
  f.param_offset = param_offset;
  f.sink_kind = sink;
  f.expected = expected;
  return f;
}

// deposit(uint256,address,address): asks the `from` token whether the
// caller holds a balance, then pulls from it and mints to `to`. With
// hardcoded_check the token must equal a pinned constant up front;
// without it the address is never compared against anything trusted.
Fixture deposit_delegate(bool strip_owner_probe, bool hardcoded_check,
                         const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "deposit(uint256,address,address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  if (hardcoded_check) {
    // The token address is the first thing the function inspects, so
    // every path through the body carries the check.
    load_addr(a, 68);  // [from]
    a.op(op::DUP1);
    a.push(Word("0x1111111111111111111111111111111111111111"), 20);
    a.op(op::EQ).require();
    load_word(a, 4);
    a.op(op::DUP1).require();  // amount != 0
    load_addr(a, 36);
    a.op(op::DUP1).require();  // to != 0
    a.op(uint8_t(op::SWAP1 + 1));  // [to, amt, from]
  } else {
    load_word(a, 4);
    a.op(op::DUP1).require();  // amount != 0
    load_addr(a, 36);
    a.op(op::DUP1).require();  // to != 0
    load_addr(a, 68);          // [amt, to, from]
  }
  if (!strip_owner_probe) {
    call_empty(a, 1, 32, op::STATICCALL);  // probe from, reply at mem[0]
    a.op(op::POP);
    mload0(a);
    a.op(op::CALLER).op(op::EQ).require();  // reply must name the caller
  }
  call_empty(a, 1, 0, op::CALL);  // pull from `from`
  a.require();
  a.op(op::POP);
  if (hardcoded_check) a.op(op::SWAP1);  // [amt, to]
  a.op(op::DUP1);
  mstore_at(a, 0);
  a.push(1);
  mstore_at(a, 32);
  keccak64(a);                   // [amt, to, slot]
  a.op(op::SWAP1).op(op::POP);   // [amt, slot]
  a.op(op::SSTORE);              // balances[to] = amt
  a.op(op::STOP);
  return make(name, a, !hardcoded_check, sig, 68, "sstore",
              hardcoded_check ? TupleOutcome::DroppedAtV
                              : TupleOutcome::Vulnerable);
}

// swap(address,uint256): calls the pool, reads the amount it reported,
// and credits it to an accumulator.
Fixture slip_transfer(bool verify_mapping, const std::string& name,
                      uint32_t id) {
  Asm a;
  const std::string sig = "swap(address,uint256)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);  // [pool]
  if (verify_mapping) require_listed(a, 3);
  call_empty(a, 1, 32, op::CALL);
  a.require();  // call must succeed
  mload0(a);
  a.op(op::DUP1).require();  // reported amount != 0
  a.push(2).op(op::SLOAD).op(op::ADD);
  sstore_key(a, 2);  // total += reported
  a.op(op::POP).op(op::STOP);
  return make(name, a, !verify_mapping, sig, 4, "sstore",
              verify_mapping ? TupleOutcome::DroppedAtV
                             : TupleOutcome::Vulnerable);
}

// claim(address): whatever the token reports gets written to storage.
// No branches at all between the call and the store.
Fixture callback_mint(bool enumerate, uint8_t call_op, uint32_t slot,
                      const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "claim(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  if (enumerate) require_enumerated(a, 10, static_cast<int>(id));
  call_empty(a, 1, 32, call_op);
  a.op(op::POP);
  mload0(a);
  sstore_key(a, slot);
  a.op(op::POP).op(op::STOP);
  return make(name, a, !enumerate, sig, 4, "sstore",
              enumerate ? TupleOutcome::DroppedAtV
                        : TupleOutcome::Vulnerable);
}

// route(address): the store writes an untainted counter, so the only
// dependence on the call is the success guard around it.
Fixture swap_router(bool hardcoded_iszero, uint8_t call_op,
                    const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "route(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  if (hardcoded_iszero) {
    a.op(op::DUP1);
    a.push(Word("0x2222222222222222222222222222222222222222"), 20);
    a.op(op::EQ).op(op::ISZERO);
    a.push_label("reject").op(op::JUMPI);
  }
  call_empty(a, 1, 0, call_op);
  a.require();
  a.push(7).op(op::SLOAD).push(1).op(op::ADD);
  sstore_key(a, 7);  // hops++
  a.op(op::POP).op(op::STOP);
  if (hardcoded_iszero) {
    a.jumpdest("reject");
    a.push(0).push(0).op(op::REVERT);
  }
  return make(name, a, !hardcoded_iszero, sig, 4, "sstore",
              hardcoded_iszero ? TupleOutcome::DroppedAtV
                               : TupleOutcome::Vulnerable);
}

// cashout(address,address): probe the vault, then self-destruct. The
// patched twin only accepts vaults present in a storage mapping.
Fixture selfdestruct_drain(bool verify_mapping, const std::string& name,
                           uint32_t id) {
  Asm a;
  const std::string sig = "cashout(address,address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);  // [vault]
  if (verify_mapping) require_listed(a, 6);
  call_empty(a, 1, 0, op::STATICCALL);
  a.require();
  a.op(op::POP);      // []
  load_addr(a, 36);   // [beneficiary]
  a.op(op::SELFDESTRUCT);
  return make(name, a, !verify_mapping, sig, 4, "selfdestruct",
              verify_mapping ? TupleOutcome::DroppedAtV
                             : TupleOutcome::Vulnerable);
}

// cashout variant where the drained address is the called one.
Fixture selfdestruct_self(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "cashout(address,address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  call_empty(a, 1, 0, op::CALL);
  a.require();
  a.op(op::SELFDESTRUCT);
  return make(name, a, true, sig, 4, "selfdestruct",
              TupleOutcome::Vulnerable);
}

// poke(address): parameter goes straight to storage, but the only call
// targets a constant address, so the entry-call phase never matches.
Fixture hardcoded_target(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "poke(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  sstore_key(a, 9);
  a.push(Word("0x3333333333333333333333333333333333333333"), 20);
  call_empty(a, 1, 32, op::CALL);
  a.op(op::POP).op(op::POP);
  mload0(a);
  sstore_key(a, 8);
  a.op(op::STOP);
  return make(name, a, false, sig, 4, "", TupleOutcome::DroppedAtEC);
}

// sweep(address): mapping-verified call-and-store, benign from birth.
Fixture mapping_sweep(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "sweep(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  require_listed(a, 11);
  call_empty(a, 1, 32, op::CALL);
  a.op(op::POP);
  mload0(a);
  sstore_key(a, 12);
  a.op(op::POP).op(op::STOP);
  return make(name, a, false, sig, 4, "", TupleOutcome::DroppedAtV);
}

// withdrawTo(address): enumeration-verified.
Fixture enum_withdraw(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "withdrawTo(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  require_enumerated(a, 20, static_cast<int>(id));
  call_empty(a, 1, 32, op::CALL);
  a.op(op::POP);
  mload0(a);
  sstore_key(a, 13);
  a.op(op::POP).op(op::STOP);
  return make(name, a, false, sig, 4, "", TupleOutcome::DroppedAtV);
}

// redeem(address): permission keyed by caller and token, two keccak
// levels deep.
Fixture nested_mapping(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "redeem(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);  // [tok]
  a.op(op::CALLER);
  mstore_at(a, 0);
  a.push(14);
  mstore_at(a, 32);
  keccak64(a);  // [tok, h1 = hash(caller, 14)]
  a.op(uint8_t(op::DUP1 + 1));
  mstore_at(a, 0);
  mstore_at(a, 32);  // consumes h1
  keccak64(a);       // [tok, h2 = hash(tok, h1)]
  a.op(op::SLOAD).require();
  call_empty(a, 1, 32, op::CALL);
  a.op(op::POP);
  mload0(a);
  sstore_key(a, 15);
  a.op(op::POP).op(op::STOP);
  return make(name, a, false, sig, 4, "", TupleOutcome::DroppedAtV);
}

// collect(address): scan accumulates match flags in memory with OR, one
// single branch on the final flag. No forks inside the loop.
Fixture enum_flag(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "collect(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);  // [tok]
  a.push(0);
  mstore_at(a, 128);  // flag = 0
  a.push(0);          // [tok, i]
  a.jumpdest("scanf");
  a.push(2).op(uint8_t(op::DUP1 + 1)).op(op::LT).op(op::ISZERO);
  a.push_label("donef").op(op::JUMPI);
  a.op(op::DUP1).push(20).op(op::ADD).op(op::SLOAD);  // [tok, i, entry]
  a.op(uint8_t(op::DUP1 + 2)).op(op::EQ);                          // [tok, i, match]
  a.push(128).op(op::MLOAD).op(op::OR);
  mstore_at(a, 128);  // flag |= match
  a.push(1).op(op::ADD);
  a.jump("scanf");
  a.jumpdest("donef");
  a.op(op::POP);  // [tok]
  a.push(128).op(op::MLOAD).require();
  call_empty(a, 1, 32, op::CALL);
  a.op(op::POP);
  mload0(a);
  sstore_key(a, 16);
  a.op(op::POP).op(op::STOP);
  return make(name, a, false, sig, 4, "", TupleOutcome::DroppedAtV);
}

// probe(address): unverified call but nothing downstream of it.
Fixture no_state_mod(const std::string& name, uint32_t id) {
  Asm a;
  const std::string sig = "probe(address)";
  dispatch_one(a, abi_selector_value(sig), "body");
  a.jumpdest("body");
  marker(a, id);
  load_addr(a, 4);
  call_empty(a, 1, 32, op::STATICCALL);
  a.op(op::POP).op(op::POP);
  a.op(op::STOP);
  return make(name, a, false, sig, 4, "", TupleOutcome::DroppedAtSM);
}

std::vector<Fixture> build_benchmark() {
  std::vector<Fixture> out;
  // Originals.
  out.push_back(deposit_delegate(false, false, "deposit_delegate", 1));
  out.push_back(slip_transfer(false, "slip_transfer", 2));
  out.push_back(callback_mint(false, op::CALL, 5, "callback_mint", 3));
  out.push_back(swap_router(false, op::CALL, "swap_router", 4));
  out.push_back(selfdestruct_drain(false, "selfdestruct_drain", 5));
  // Patched twins.
  out.push_back(deposit_delegate(false, true, "deposit_delegate_pinned", 11));
  out.push_back(slip_transfer(true, "slip_transfer_listed", 12));
  out.push_back(callback_mint(true, op::CALL, 5, "callback_mint_enum", 13));
  out.push_back(swap_router(true, op::CALL, "swap_router_pinned", 14));
  out.push_back(selfdestruct_drain(true, "selfdestruct_drain_listed", 15));
  // Benign lookalikes.
  out.push_back(hardcoded_target("pinned_poke", 21));
  out.push_back(mapping_sweep("mapping_sweep", 22));
  out.push_back(enum_withdraw("enum_withdraw", 23));
  out.push_back(nested_mapping("nested_permit", 24));
  out.push_back(enum_flag("enum_flag_collect", 25));
  // Stripped twins: same shapes with the verification removed or the
  // call flavor changed.
  out.push_back(deposit_delegate(true, false, "deposit_noprobe", 31));
  out.push_back(slip_transfer(false, "slip_transfer_bare", 32));
  out.push_back(
      callback_mint(false, op::STATICCALL, 9, "callback_mint_static", 33));
  out.push_back(swap_router(false, op::DELEGATECALL, "swap_router_bare", 34));
  out.push_back(selfdestruct_self("selfdestruct_called", 35));
  return out;
}

std::vector<Fixture> build_phase_set() {
  std::vector<Fixture> out;
  out.push_back(deposit_delegate(false, true, "verified_hardcoded", 51));
  out.push_back(slip_transfer(true, "verified_mapping", 52));
  out.push_back(hardcoded_target("constant_callee", 53));
  out.push_back(no_state_mod("probe_only", 54));
  out.push_back(slip_transfer(false, "unverified_spend", 55));
  out.push_back(callback_mint(false, op::CALL, 5, "unverified_mint", 56));
  return out;
}

}  // namespace

const std::vector<Fixture>& benchmark_fixtures() {
  static const std::vector<Fixture> fixtures = build_benchmark();
  return fixtures;
}

const std::vector<Fixture>& phase_fixtures() {
  static const std::vector<Fixture> fixtures = build_phase_set();
  return fixtures;
}

std::vector<uint8_t> dynamic_jump_program() {
  Asm a;
  a.push(0);
  a.jumpi("b2");        // block 0: never taken at runtime
  a.push_label("b4");   // block 1: park the eventual target
  a.jump("b3");
  a.jumpdest("b2");
  a.op(op::STOP);
  a.jumpdest("b3");     // block 3: jump through the parked value
  a.op(op::JUMP);
  a.jumpdest("b4");
  a.op(op::STOP);
  return a.assemble();
}

DispatcherFixture token_dispatcher_fixture() {
  DispatcherFixture fx;
  fx.functions = {
      {"name()", "f_name", {}},
      {"approve(address,uint256)", "f_approve", {4}},
      {"totalSupply()", "f_supply", {}},
      {"transferFrom(address,address,uint256)", "f_from", {4, 36}},
      {"balanceOf(address)", "f_balance", {4}},
      {"symbol()", "f_symbol", {}},
      {"transfer(address,uint256)", "f_transfer", {4}},
      {"allowance(address,address)", "f_allowance", {4, 36}},
  };

  Asm a;
  a.push(0).op(op::CALLDATALOAD).push(0xe0).op(op::SHR);  // [sel]
  a.push(4).op(op::CALLDATASIZE).op(op::LT);
  a.push_label("fallback").op(op::JUMPI);
  // Binary-search split: selectors below the pivot jump to the low
  // chain, the rest fall through.
  a.op(op::DUP1).push(abi_selector_value("balanceOf(address)"), 4).op(op::GT);
  a.push_label("low").op(op::JUMPI);
  for (size_t i = 4; i < 8; ++i) {
    a.op(op::DUP1).push(abi_selector_value(fx.functions[i].signature), 4);
    a.op(op::EQ).push_label(fx.functions[i].body_label).op(op::JUMPI);
  }
  a.jumpdest("fallback");
  a.push(0).push(0).op(op::REVERT);
  a.jumpdest("low");
  for (size_t i = 0; i < 4; ++i) {
    a.op(op::DUP1).push(abi_selector_value(fx.functions[i].signature), 4);
    a.op(op::EQ).push_label(fx.functions[i].body_label).op(op::JUMPI);
  }
  a.push(0).push(0).op(op::REVERT);

  for (const auto& fn : fx.functions) {
    a.jumpdest(fn.body_label);
    for (uint32_t off : fn.address_offsets) {
      load_addr(a, off);
      a.op(op::POP);
    }
    if (fn.signature == "totalSupply()") {
      a.push(0).push(0).op(op::RETURN);
    } else {
      a.op(op::STOP);
    }
  }
  fx.runtime = a.assemble();
  for (const auto& fn : fx.functions)
    fx.body_offsets.emplace_back(fn.signature, a.offset_of(fn.body_label));
  return fx;
}

}  // namespace evmtaint::testutil
