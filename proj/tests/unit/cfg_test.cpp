#include "evmtaint/cfg.hpp"

#include "../testutil/fixtures.hpp"
#include "evmtaint/keccak.hpp"
#include "evmtaint/sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace evmtaint;
using namespace evmtaint::testutil;

namespace {

bool has_edge(const Cfg& cfg, uint32_t from, uint32_t to, EdgeKind kind) {
  for (const Edge& e : cfg.blocks[from].edges)
    if (e.to == to && e.kind == kind) return true;
  return false;
}

}  // namespace

TEST_CASE("block partition invariants hold on every fixture") {
  for (const Fixture& fx : benchmark_fixtures()) {
    CAPTURE(fx.name);
    Cfg cfg = cfg_from_code(fx.runtime);
    REQUIRE(!cfg.blocks.empty());
    uint32_t next_ins = 0;
    for (const BasicBlock& b : cfg.blocks) {
      CHECK(b.first_instruction == next_ins);
      CHECK(b.instruction_count > 0);
      next_ins += b.instruction_count;
      CHECK(cfg.block_by_offset.at(b.start_offset) == b.id);
      // a JUMPDEST anywhere but the front would have split the block
      for (const Instruction* i = cfg.block_begin(b) + 1; i != cfg.block_end(b);
           ++i)
        CHECK(i->opcode != op::JUMPDEST);
    }
    CHECK(next_ins == cfg.instructions.size());
  }
}

TEST_CASE("stack-carried jump target leaves a dynamic exit") {
  Cfg cfg = cfg_from_code(dynamic_jump_program());
  REQUIRE(cfg.blocks.size() == 5);

  CHECK(has_edge(cfg, 0, 1, EdgeKind::Fallthrough));
  CHECK(has_edge(cfg, 0, 2, EdgeKind::JumpdestTaken));
  CHECK(cfg.blocks[0].edges.size() == 2);

  // block 1 jumps to a constant it pushed itself
  CHECK(has_edge(cfg, 1, 3, EdgeKind::JumpdestTaken));
  CHECK(!cfg.blocks[1].dynamic_exit);

  // block 3 jumps through a value that arrives on the stack
  CHECK(cfg.blocks[3].edges.empty());
  CHECK(cfg.blocks[3].dynamic_exit);
  CHECK(cfg.bad_jumps.empty());

  // the simulator resolves what the static pass could not
  FunctionCandidate f;
  f.entry_block = 0;
  auto r = simulate_function(cfg, f, Budget{},
                             std::chrono::steady_clock::now() +
                                 std::chrono::seconds(30));
  REQUIRE(r.states.size() == 1);
  CHECK(r.states[0].trace == std::vector<uint32_t>{0, 1, 3, 4});
  CHECK(r.states[0].end == PathEnd::Stop);
}

TEST_CASE("unresolvable jump target is recorded, not fatal") {
  // PUSH1 3 JUMP, but offset 3 is no JUMPDEST
  Cfg cfg = cfg_from_code({0x60, 0x03, 0x56, 0x00});
  REQUIRE(cfg.bad_jumps.size() == 1);
  CHECK(cfg.bad_jumps[0].target == Word(3));
  CHECK(cfg.blocks[0].edges.empty());
}

TEST_CASE("binary-search dispatcher yields the full selector table") {
  DispatcherFixture fx = token_dispatcher_fixture();
  Cfg cfg = cfg_from_code(fx.runtime);
  auto fns = extract_functions(cfg);
  REQUIRE(fns.size() == fx.functions.size());

  std::set<uint32_t> expected, got;
  for (const auto& fn : fx.functions)
    expected.insert(abi_selector_value(fn.signature));
  for (const auto& c : fns) {
    REQUIRE(c.selector.has_value());
    got.insert(*c.selector);
  }
  CHECK(got == expected);

  // entries resolve to the right body blocks
  for (const auto& c : fns) {
    const auto body = std::find_if(
        fx.functions.begin(), fx.functions.end(), [&](const DispatchedFn& fn) {
          return abi_selector_value(fn.signature) == *c.selector;
        });
    REQUIRE(body != fx.functions.end());
    uint32_t want_offset = 0;
    for (const auto& [sig, off] : fx.body_offsets)
      if (sig == body->signature) want_offset = off;
    CHECK(cfg.blocks[c.entry_block].start_offset == want_offset);
  }
}

TEST_CASE("address-parameter filter keeps exactly the address takers") {
  DispatcherFixture fx = token_dispatcher_fixture();
  Cfg cfg = cfg_from_code(fx.runtime);
  auto kept = filter_candidates(cfg, extract_functions(cfg));

  std::set<uint32_t> expected;
  for (const auto& fn : fx.functions)
    if (!fn.address_offsets.empty())
      expected.insert(abi_selector_value(fn.signature));
  REQUIRE(kept.size() == expected.size());

  for (const auto& c : kept) {
    CHECK(expected.count(*c.selector) == 1);
    const auto& fn = *std::find_if(
        fx.functions.begin(), fx.functions.end(), [&](const DispatchedFn& f) {
          return abi_selector_value(f.signature) == *c.selector;
        });
    std::vector<uint32_t> offsets;
    for (uint32_t idx : c.address_params)
      offsets.push_back(c.param_layout[idx].calldata_offset);
    CHECK(offsets == fn.address_offsets);
  }
}

TEST_CASE("code without a dispatcher degrades to a single root") {
  auto fns = extract_functions(cfg_from_code(dynamic_jump_program()));
  REQUIRE(fns.size() == 1);
  CHECK(!fns[0].selector.has_value());
  CHECK(fns[0].entry_block == 0);
  CHECK(fns[0].selector_hex() == "none");
}

TEST_CASE("every fixture dispatcher resolves its declared selector") {
  for (const Fixture& fx : benchmark_fixtures()) {
    CAPTURE(fx.name);
    Cfg cfg = cfg_from_code(fx.runtime);
    auto kept = filter_candidates(cfg, extract_functions(cfg));
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].selector_hex() == fx.selector_hex);
    bool has_param = false;
    for (uint32_t idx : kept[0].address_params)
      has_param |= kept[0].param_layout[idx].calldata_offset == fx.param_offset;
    CHECK(has_param);
  }
}

TEST_CASE("simulated traces only travel existing edges or dynamic exits") {
  for (const Fixture& fx : benchmark_fixtures()) {
    CAPTURE(fx.name);
    Cfg cfg = cfg_from_code(fx.runtime);
    auto kept = filter_candidates(cfg, extract_functions(cfg));
    REQUIRE(kept.size() == 1);
    auto r = simulate_function(cfg, kept[0], Budget{},
                               std::chrono::steady_clock::now() +
                                   std::chrono::seconds(30));
    for (const SimState& s : r.states) {
      for (size_t i = 0; i + 1 < s.trace.size(); ++i) {
        uint32_t from = s.trace[i], to = s.trace[i + 1];
        bool ok = cfg.blocks[from].dynamic_exit;
        for (const Edge& e : cfg.blocks[from].edges) ok |= e.to == to;
        CHECK_MESSAGE(ok, fx.name << ": trace hop " << from << "->" << to);
      }
    }
  }
}

TEST_CASE("cfg dump names blocks and terminators") {
  std::string text = dump_cfg(cfg_from_code(dynamic_jump_program()));
  CHECK(text.find("block 0") != std::string::npos);
  CHECK(text.find("dynamic-exit") != std::string::npos);
  CHECK(text.find("JUMPDEST") != std::string::npos);
}
