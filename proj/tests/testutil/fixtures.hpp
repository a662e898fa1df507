#pragma once

#include "asm.hpp"
#include "evmtaint/detector.hpp"

#include <string>
#include <vector>

namespace evmtaint::testutil {

// A hand-assembled contract with its ground truth. The benchmark set
// holds four families: exploitable originals, patched twins that verify
// the address first, benign lookalikes, and twins with the verification
// stripped back out.
struct Fixture {
  std::string name;
  std::vector<uint8_t> runtime;
  bool vulnerable = false;
  std::string selector_hex;   // function of interest
  uint32_t param_offset = 0;  // its address parameter
  std::string sink_kind;      // expected sink when vulnerable
  TupleOutcome expected = TupleOutcome::DroppedAtV;  // phase-set fixtures
};

// 20 contracts, 10 vulnerable / 10 clean.
const std::vector<Fixture>& benchmark_fixtures();

// Contracts that terminate at one specific phase of the cascade, with
// the expected per-tuple outcome.
const std::vector<Fixture>& phase_fixtures();

// Five-block shape with one jump whose target only materializes on the
// simulated stack: block 1 pushes the final target, block 3 consumes it.
std::vector<uint8_t> dynamic_jump_program();

struct DispatchedFn {
  std::string signature;
  std::string body_label;
  std::vector<uint32_t> address_offsets;  // calldata offsets of address args
};

struct DispatcherFixture {
  std::vector<uint8_t> runtime;
  std::vector<DispatchedFn> functions;
  std::vector<std::pair<std::string, uint32_t>> body_offsets;  // sig, offset
};

// Token-interface dispatcher: eight selectors behind a binary-search
// split, five of them taking address parameters.
DispatcherFixture token_dispatcher_fixture();

}  // namespace evmtaint::testutil
