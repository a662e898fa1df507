#include "evmtaint/report.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

namespace evmtaint {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Clean: return "clean";
    case Verdict::Vulnerable: return "vulnerable";
    case Verdict::Error: return "error";
    case Verdict::Timeout: return "timeout";
  }
  return "?";
}

Report analyze_code(const std::vector<uint8_t>& code,
                    const AnalysisOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  Report r;
  try {
    std::vector<uint8_t> runtime;
    if (opts.input_is_runtime) {
      runtime = code;
    } else {
      RuntimeSplit split = extract_runtime(RawCode{code});
      runtime = std::move(split.runtime);
      r.warnings = std::move(split.warnings);
    }
    r.contract = code_hash(runtime);

    Cfg cfg = cfg_from_code(runtime);
    if (opts.dump_cfg) r.cfg_text = dump_cfg(cfg);
    r.include_traces = opts.dump_trace;

    std::vector<FunctionCandidate> candidates =
        filter_candidates(cfg, extract_functions(cfg));

    Budget budget;
    budget.max_block_revisits = opts.max_block_revisits;
    budget.max_paths = opts.max_paths;
    budget.wall_clock = opts.timeout;
    auto deadline = t0 + opts.timeout;

    DetectOptions dopts;
    dopts.strict_phase1 = opts.strict_phase1;

    bool deadline_hit = false;
    bool budget_exhausted = false;
    for (const FunctionCandidate& f : candidates) {
      FunctionAnalysis fa = detect_function(cfg, f, budget, deadline, dopts);
      ++r.functions;
      r.paths += fa.paths;
      deadline_hit |= fa.deadline_hit;
      budget_exhausted |= fa.budget_exhausted;
      for (const TupleResult& t : fa.tuples) {
        ReportTuple rt;
        rt.selector_hex = f.selector_hex();
        rt.param_index = t.param_index;
        rt.calldata_offset = t.calldata_offset;
        rt.outcome = t.outcome;
        r.tuples.push_back(std::move(rt));
      }
      for (Finding& fd : fa.findings) r.findings.push_back(std::move(fd));
    }

    std::sort(r.findings.begin(), r.findings.end(),
              [](const Finding& a, const Finding& b) {
                if (a.selector_hex != b.selector_hex)
                  return a.selector_hex < b.selector_hex;
                return a.param_index < b.param_index;
              });
    std::sort(r.tuples.begin(), r.tuples.end(),
              [](const ReportTuple& a, const ReportTuple& b) {
                if (a.selector_hex != b.selector_hex)
                  return a.selector_hex < b.selector_hex;
                return a.param_index < b.param_index;
              });

    if (budget_exhausted)
      r.warnings.push_back("path budget exhausted; coverage is partial");
    if (!r.findings.empty()) {
      r.verdict = Verdict::Vulnerable;
      if (deadline_hit)
        r.warnings.push_back(
            "deadline hit after findings were made; more may exist");
    } else if (deadline_hit) {
      r.verdict = Verdict::Timeout;
      r.warnings.push_back("deadline hit before any finding; result unknown");
    } else {
      r.verdict = Verdict::Clean;
    }
  } catch (const std::exception& e) {
    r.verdict = Verdict::Error;
    r.error = e.what();
  }
  r.elapsed_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
  return r;
}

Report analyze_file(const std::string& path, const AnalysisOptions& opts) {
  Report r;
  r.source = path;
  try {
    RawCode code = load_code_file(path);
    std::string source = r.source;
    r = analyze_code(code.bytes, opts);
    r.source = source;
  } catch (const std::exception& e) {
    r.verdict = Verdict::Error;
    r.error = e.what();
  }
  return r;
}

nlohmann::ordered_json finding_to_json(const Finding& f, bool include_trace) {
  nlohmann::ordered_json fj;
  fj["selector"] = f.selector_hex;
  fj["param_index"] = f.param_index;
  fj["calldata_offset"] = f.calldata_offset;
  fj["call_offset"] = f.call_offset;
  fj["call_opcode"] = opcode_info(f.call_opcode).name;
  fj["sink_offset"] = f.sink_offset;
  fj["sink_kind"] = f.sink_kind;
  fj["extended"] = f.extended;
  fj["witness_path"] = f.witness_path;
  if (include_trace) fj["witness_trace"] = f.witness_trace;
  return fj;
}

namespace {

uint8_t opcode_by_name(const std::string& name) {
  for (int o = 0; o < 256; ++o)
    if (name == opcode_info(static_cast<uint8_t>(o)).name)
      return static_cast<uint8_t>(o);
  return 0;
}

}  // namespace

Finding finding_from_json(const nlohmann::json& j) {
  Finding f;
  f.selector_hex = j.at("selector").get<std::string>();
  f.param_index = j.at("param_index").get<uint32_t>();
  f.calldata_offset = j.at("calldata_offset").get<uint32_t>();
  f.call_offset = j.at("call_offset").get<uint32_t>();
  f.call_opcode = opcode_by_name(j.at("call_opcode").get<std::string>());
  f.sink_offset = j.at("sink_offset").get<uint32_t>();
  f.sink_kind = j.at("sink_kind").get<std::string>();
  f.extended = j.at("extended").get<bool>();
  f.witness_path = j.at("witness_path").get<uint32_t>();
  if (j.contains("witness_trace"))
    f.witness_trace = j.at("witness_trace").get<std::vector<uint32_t>>();
  return f;
}

nlohmann::ordered_json report_to_json(const Report& r, bool include_timings) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["source"] = r.source;
  j["contract"] = r.contract;
  j["verdict"] = to_string(r.verdict);
  j["functions"] = r.functions;
  j["paths"] = r.paths;

  auto findings = nlohmann::ordered_json::array();
  for (const Finding& f : r.findings)
    findings.push_back(finding_to_json(f, r.include_traces));
  j["findings"] = std::move(findings);

  auto tuples = nlohmann::ordered_json::array();
  for (const ReportTuple& t : r.tuples) {
    nlohmann::ordered_json tj;
    tj["selector"] = t.selector_hex;
    tj["param_index"] = t.param_index;
    tj["calldata_offset"] = t.calldata_offset;
    tj["outcome"] = to_string(t.outcome);
    tuples.push_back(std::move(tj));
  }
  j["tuples"] = std::move(tuples);

  j["warnings"] = r.warnings;
  if (!r.error.empty()) j["error"] = r.error;
  if (!r.cfg_text.empty()) j["cfg"] = r.cfg_text;
  if (include_timings) j["timings"] = {{"elapsed_ms", r.elapsed_ms}};
  return j;
}

CorpusSummary analyze_corpus(const std::vector<CorpusEntry>& entries,
                             const AnalysisOptions& opts, unsigned jobs) {
  CorpusSummary out;
  out.total = entries.size();

  struct Slot {
    bool load_failed = false;
    std::string error;
    size_t unique_index = SIZE_MAX;
  };
  struct UniqueCode {
    std::vector<uint8_t> code;
    Report report;
  };

  std::vector<Slot> slots(entries.size());
  std::vector<UniqueCode> uniques;
  std::map<std::string, size_t> by_hash;

  for (size_t i = 0; i < entries.size(); ++i) {
    try {
      RawCode code = load_code_file(entries[i].path);
      std::string hash;
      if (opts.input_is_runtime) {
        hash = code_hash(code.bytes);
      } else {
        RuntimeSplit split = extract_runtime(code);
        hash = code_hash(split.runtime);
      }
      auto [it, inserted] = by_hash.emplace(hash, uniques.size());
      if (inserted) {
        UniqueCode u;
        u.code = std::move(code.bytes);
        uniques.push_back(std::move(u));
      } else {
        ++out.duplicates;
      }
      slots[i].unique_index = it->second;
    } catch (const std::exception& e) {
      slots[i].load_failed = true;
      slots[i].error = e.what();
    }
  }
  out.unique_codes = uniques.size();

  unsigned n = std::max(1u, jobs);
  n = static_cast<unsigned>(
      std::min<size_t>(n, std::max<size_t>(uniques.size(), 1)));
  std::atomic<size_t> cursor{0};
  auto worker = [&] {
    for (size_t i = cursor.fetch_add(1); i < uniques.size();
         i = cursor.fetch_add(1))
      uniques[i].report = analyze_code(uniques[i].code, opts);
  };
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (size_t i = 0; i < entries.size(); ++i) {
    Report r;
    if (slots[i].load_failed) {
      r.verdict = Verdict::Error;
      r.error = slots[i].error;
    } else {
      r = uniques[slots[i].unique_index].report;
    }
    r.source = entries[i].path;

    switch (r.verdict) {
      case Verdict::Vulnerable: ++out.vulnerable; break;
      case Verdict::Clean: ++out.clean; break;
      case Verdict::Timeout: ++out.timeouts; break;
      case Verdict::Error: ++out.errors; break;
    }
    if (entries[i].labeled_vulnerable && r.verdict != Verdict::Error) {
      bool flagged = r.verdict == Verdict::Vulnerable;
      bool labeled = *entries[i].labeled_vulnerable;
      if (flagged && labeled) ++out.tp;
      else if (flagged && !labeled) ++out.fp;
      else if (!flagged && labeled) ++out.fn;
      else ++out.tn;
    }
    out.reports.push_back(std::move(r));
  }
  return out;
}

nlohmann::ordered_json corpus_to_json(const CorpusSummary& s,
                                      bool include_timings) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["total"] = s.total;
  j["unique_codes"] = s.unique_codes;
  j["duplicates"] = s.duplicates;
  j["vulnerable"] = s.vulnerable;
  j["clean"] = s.clean;
  j["timeouts"] = s.timeouts;
  j["errors"] = s.errors;
  if (s.tp + s.fp + s.tn + s.fn > 0) {
    j["labels"] = {{"tp", s.tp},
                   {"fp", s.fp},
                   {"tn", s.tn},
                   {"fn", s.fn},
                   {"precision", s.precision()},
                   {"recall", s.recall()}};
  }
  auto reports = nlohmann::ordered_json::array();
  for (const Report& r : s.reports)
    reports.push_back(report_to_json(r, include_timings));
  j["reports"] = std::move(reports);
  return j;
}

}  // namespace evmtaint
