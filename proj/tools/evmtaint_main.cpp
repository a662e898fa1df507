#include "evmtaint/bytecode.hpp"
#include "evmtaint/report.hpp"
#include "evmtaint/watcher.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace evmtaint;

namespace {

struct CommonOpts {
  double timeout_s = 600.0;
  size_t max_paths = 512;
  int max_revisits = 3;
  bool strict_phase1 = false;
  bool runtime_input = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--timeout", o.timeout_s,
                  "per-contract analysis budget, seconds");
  cmd->add_option("--max-paths", o.max_paths, "explored paths per function");
  cmd->add_option("--max-revisits", o.max_revisits,
                  "times one path may re-enter a block");
  cmd->add_flag("--strict-phase1", o.strict_phase1,
                "only equality checks count as verification");
  cmd->add_flag("--runtime", o.runtime_input,
                "input is deployed code, skip constructor stripping");
}

AnalysisOptions to_analysis(const CommonOpts& o) {
  AnalysisOptions a;
  a.timeout = std::chrono::milliseconds(
      static_cast<int64_t>(o.timeout_s * 1000.0));
  a.max_paths = o.max_paths;
  a.max_block_revisits = o.max_revisits;
  a.strict_phase1 = o.strict_phase1;
  a.input_is_runtime = o.runtime_input;
  return a;
}

void write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << text << "\n";
}

int exit_code_for(bool any_finding, bool any_error) {
  if (any_finding) return 1;
  if (any_error) return 2;
  return 0;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const std::string& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<std::string> dir_files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) dir_files.push_back(e.path().string());
      std::sort(dir_files.begin(), dir_files.end());
      files.insert(files.end(), dir_files.begin(), dir_files.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

bool looks_like_hex(const std::string& s) {
  size_t i = s.rfind("0x", 0) == 0 ? 2 : 0;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isxdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

// an argument that names no file but parses as hex is analyzed directly
Report analyze_one(const std::string& input, const AnalysisOptions& opts) {
  std::error_code ec;
  if (fs::exists(input, ec) || !looks_like_hex(input))
    return analyze_file(input, opts);
  Report r;
  r.source = input;
  try {
    RawCode code = decode_hex(input);
    std::string source = r.source;
    r = analyze_code(code.bytes, opts);
    r.source = source;
  } catch (const std::exception& e) {
    r.verdict = Verdict::Error;
    r.error = e.what();
  }
  return r;
}

int run_analyze(const std::vector<std::string>& inputs, const CommonOpts& common,
                bool dump_cfg, bool dump_trace, bool no_timings,
                const std::string& out_path) {
  AnalysisOptions opts = to_analysis(common);
  opts.dump_cfg = dump_cfg;
  opts.dump_trace = dump_trace;

  std::vector<std::string> files = expand_inputs(inputs);
  bool any_finding = false, any_error = false;
  auto arr = nlohmann::ordered_json::array();
  for (const std::string& f : files) {
    Report r = analyze_one(f, opts);
    any_finding |= r.verdict == Verdict::Vulnerable;
    any_error |= r.verdict == Verdict::Error || r.verdict == Verdict::Timeout;
    arr.push_back(report_to_json(r, !no_timings));
  }
  std::string text =
      files.size() == 1 ? arr[0].dump(2) : nlohmann::ordered_json(arr).dump(2);
  write_output(out_path, text);
  return exit_code_for(any_finding, any_error);
}

std::vector<CorpusEntry> load_entries(const std::vector<std::string>& files,
                                      const std::string& labels_path) {
  nlohmann::json labels;
  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw std::runtime_error("cannot read labels: " + labels_path);
    in >> labels;
  }
  std::vector<CorpusEntry> entries;
  for (const std::string& f : files) {
    CorpusEntry e;
    e.path = f;
    std::string base = fs::path(f).filename().string();
    if (labels.contains(base))
      e.labeled_vulnerable = labels[base].get<bool>();
    else if (labels.contains(f))
      e.labeled_vulnerable = labels[f].get<bool>();
    entries.push_back(std::move(e));
  }
  return entries;
}

int run_corpus(const std::vector<std::string>& inputs, const CommonOpts& common,
               const std::string& labels_path, unsigned jobs, bool no_timings,
               const std::string& out_path, const std::string& report_dir) {
  AnalysisOptions opts = to_analysis(common);
  std::vector<CorpusEntry> entries =
      load_entries(expand_inputs(inputs), labels_path);
  CorpusSummary summary = analyze_corpus(entries, opts, jobs);

  if (!report_dir.empty()) {
    fs::create_directories(report_dir);
    for (const Report& r : summary.reports) {
      fs::path p = fs::path(report_dir) /
                   (fs::path(r.source).filename().string() + ".json");
      std::ofstream out(p, std::ios::trunc);
      out << report_to_json(r, !no_timings).dump(2) << "\n";
    }
  }
  write_output(out_path, corpus_to_json(summary, !no_timings).dump(2));

  bool any_finding = summary.vulnerable > 0;
  bool any_error = summary.errors > 0 || summary.timeouts > 0;
  return exit_code_for(any_finding, any_error);
}

std::unique_ptr<AlertSink> make_sink(const std::string& spec) {
  if (spec == "stdout" || spec.empty()) return std::make_unique<StdoutSink>();
  if (spec.rfind("file:", 0) == 0)
    return std::make_unique<FileSink>(spec.substr(5));
  if (spec.rfind("webhook:", 0) == 0)
    return std::make_unique<WebhookSink>(spec.substr(8));
  throw std::runtime_error("unknown sink: " + spec +
                           " (expected stdout, file:PATH, webhook:URL)");
}

int run_watch_cmd(const std::string& rpc_url, const std::string& replay_path,
                  const std::string& state_dir, const CommonOpts& common,
                  uint64_t from_block, int64_t until_block, unsigned workers,
                  unsigned poll_ms, const std::string& sink_spec) {
  std::unique_ptr<RpcTransport> transport;
  if (!replay_path.empty())
    transport = std::make_unique<ReplayTransport>(replay_path);
  else if (!rpc_url.empty())
    transport = std::make_unique<HttpTransport>(rpc_url);
  else
    throw std::runtime_error("watch needs --rpc or --replay");

  EthRpc rpc(*transport);
  StateStore store(state_dir);
  std::unique_ptr<AlertSink> sink = make_sink(sink_spec);

  WatchOptions wopts;
  wopts.from_block = from_block;
  if (until_block >= 0) wopts.until_block = static_cast<uint64_t>(until_block);
  wopts.workers = workers;
  wopts.poll_interval = std::chrono::milliseconds(poll_ms);
  wopts.analysis = to_analysis(common);

  WatchStats stats = run_watch(rpc, store, *sink, wopts);
  std::cerr << "blocks=" << stats.blocks << " deployments=" << stats.deployments
            << " analyzed=" << stats.analyzed
            << " cache_hits=" << stats.cache_hits
            << " empty=" << stats.empty_code << " alerts=" << stats.alerts
            << " suppressed=" << stats.duplicates_suppressed
            << " errors=" << stats.errors << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"address-verification taint analysis for EVM bytecode"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* analyze = app.add_subcommand(
      "analyze", "analyze bytecode files, one report each");
  std::vector<std::string> analyze_inputs;
  bool dump_cfg = false, dump_trace = false, no_timings = false;
  std::string out_path;
  analyze->add_option("inputs", analyze_inputs,
                      "code files or literal hex strings")
      ->required();
  add_common(analyze, common);
  analyze->add_flag("--dump-cfg", dump_cfg, "embed the recovered CFG");
  analyze->add_flag("--dump-trace", dump_trace, "embed witness block traces");
  analyze->add_flag("--no-timings", no_timings, "omit the timings object");
  analyze->add_option("--out", out_path, "write the report here");

  auto* corpus = app.add_subcommand(
      "corpus", "analyze a directory of contracts with dedup and stats");
  std::vector<std::string> corpus_inputs;
  std::string labels_path, report_dir;
  unsigned jobs = 1;
  corpus->add_option("inputs", corpus_inputs, "files or directories")
      ->required();
  add_common(corpus, common);
  corpus->add_option("--labels", labels_path,
                     "JSON map of file name to expected verdict");
  corpus->add_option("--jobs", jobs, "worker threads");
  corpus->add_flag("--no-timings", no_timings, "omit timing objects");
  corpus->add_option("--out", out_path, "write the summary here");
  corpus->add_option("--report-dir", report_dir,
                     "also write one report file per input");

  auto* watch = app.add_subcommand(
      "watch", "follow new deployments and alert on vulnerable ones");
  std::string rpc_url, replay_path, state_dir, sink_spec = "stdout";
  uint64_t from_block = 0;
  int64_t until_block = -1;
  unsigned workers = 1, poll_ms = 3000;
  watch->add_option("--rpc", rpc_url, "JSON-RPC endpoint URL");
  watch->add_option("--replay", replay_path, "recorded JSON-RPC trace file");
  watch->add_option("--state-dir", state_dir, "cursor and alert log directory")
      ->required();
  add_common(watch, common);
  watch->add_option("--from-block", from_block, "first block when no cursor");
  watch->add_option("--until-block", until_block,
                    "stop after this block instead of following the head");
  watch->add_option("--workers", workers, "parallel analyses per block");
  watch->add_option("--poll-ms", poll_ms, "head polling interval");
  watch->add_option("--sink", sink_spec, "stdout, file:PATH, or webhook:URL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed())
      return run_analyze(analyze_inputs, common, dump_cfg, dump_trace,
                         no_timings, out_path);
    if (corpus->parsed())
      return run_corpus(corpus_inputs, common, labels_path, jobs, no_timings,
                        out_path, report_dir);
    if (watch->parsed())
      return run_watch_cmd(rpc_url, replay_path, state_dir, common, from_block,
                           until_block, workers, poll_ms, sink_spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
