#pragma once

#include "evmtaint/detector.hpp"

#include <json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace evmtaint {

struct AnalysisOptions {
  std::chrono::milliseconds timeout{600'000};  // per contract, all functions
  size_t max_paths = 512;
  int max_block_revisits = 3;
  bool strict_phase1 = false;
  bool input_is_runtime = false;  // skip creation-code extraction
  bool dump_cfg = false;
  bool dump_trace = false;  // include witness block traces in findings
};

enum class Verdict : uint8_t { Clean, Vulnerable, Error, Timeout };

const char* to_string(Verdict v);

struct ReportTuple {
  std::string selector_hex;
  uint32_t param_index = 0;
  uint32_t calldata_offset = 0;
  TupleOutcome outcome = TupleOutcome::DroppedAtV;
};

struct Report {
  std::string source;    // where the code came from (path, address, label)
  std::string contract;  // runtime code hash
  Verdict verdict = Verdict::Clean;
  std::vector<Finding> findings;
  std::vector<ReportTuple> tuples;  // every (function, param) pair examined
  std::vector<std::string> warnings;
  std::string error;
  size_t functions = 0;  // candidates that reached simulation
  size_t paths = 0;
  std::string cfg_text;   // dump_cfg
  bool include_traces = false;  // dump_trace: emit witness block traces
  double elapsed_ms = 0.0;
};

Report analyze_code(const std::vector<uint8_t>& code,
                    const AnalysisOptions& opts);
Report analyze_file(const std::string& path, const AnalysisOptions& opts);

// Stable serialization: two runs over the same code differ only in the
// "timings" object (and "source" if the caller sets it differently).
nlohmann::ordered_json report_to_json(const Report& r,
                                      bool include_timings = true);

nlohmann::ordered_json finding_to_json(const Finding& f,
                                       bool include_trace = false);
Finding finding_from_json(const nlohmann::json& j);

struct CorpusEntry {
  std::string path;
  std::optional<bool> labeled_vulnerable;
};

struct CorpusSummary {
  size_t total = 0;
  size_t unique_codes = 0;
  size_t duplicates = 0;
  size_t errors = 0;
  size_t vulnerable = 0;
  size_t clean = 0;
  size_t timeouts = 0;
  // against labels, when provided
  size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<Report> reports;  // one per entry, input order

  double precision() const {
    return tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp);
  }
  double recall() const {
    return tp + fn == 0 ? 1.0 : double(tp) / double(tp + fn);
  }
};

// Analyzes every entry, sharing results between entries whose runtime
// code hashes match. `jobs` threads; output order and report bytes do
// not depend on the thread count.
CorpusSummary analyze_corpus(const std::vector<CorpusEntry>& entries,
                             const AnalysisOptions& opts, unsigned jobs = 1);

nlohmann::ordered_json corpus_to_json(const CorpusSummary& s,
                                      bool include_timings = true);

}  // namespace evmtaint
