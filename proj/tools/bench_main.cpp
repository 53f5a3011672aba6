// Benchmark and checker CLI for the concurrent-set size methods.
//
//   sizable-bench run        throughput/overhead rows -> CSV
//   sizable-bench sweep-tries  optimistic retry-bound sweep -> CSV
//   sizable-bench check      linearizability verdict for a history file

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sizable/bench.hpp"
#include "sizable/history.hpp"
#include "sizable/linearizability_checker.hpp"
#include "sizable/sized_set.hpp"

namespace {

using namespace sizable;

StructureKind parseStructure(const std::string& s) {
  if (s == "list") return StructureKind::LinkedList;
  if (s == "hash") return StructureKind::HashTable;
  throw CLI::ValidationError("--structure", "expected list or hash");
}

SizeMethod parseMethod(const std::string& s) {
  if (s == "none") return SizeMethod::None;
  if (s == "sp") return SizeMethod::Sp;
  if (s == "handshake") return SizeMethod::Handshake;
  if (s == "optimistic") return SizeMethod::Optimistic;
  if (s == "lock") return SizeMethod::Lock;
  throw CLI::ValidationError("--method", "expected none|sp|handshake|optimistic|lock");
}

struct CommonFlags {
  std::string structure = "hash";
  std::vector<std::string> methods = {"sp"};
  std::string workload = "update";
  int threads = 4;
  int sizeThreads = 1;
  int64_t sizeDelayUs = 0;
  double durationS = 1.0;
  int64_t prefill = 100'000;
  int64_t keyRange = 0;
  double zipfTheta = 0.0;
  int maxTries = 3;
  uint64_t seed = 42;
  int reps = 10;
  int warmup = 5;
  uint64_t buckets = 1u << 15;
  std::string out;
};

void addCommonFlags(CLI::App& app, CommonFlags& f, bool multiMethod) {
  app.add_option("--structure", f.structure, "Data structure: list|hash")
      ->check(CLI::IsMember({"list", "hash"}));
  if (multiMethod) {
    app.add_option("--method", f.methods,
                   "Size methods to run (repeatable): none|sp|handshake|optimistic|lock")
        ->delimiter(',');
  }
  app.add_option("--workload", f.workload, "Mix preset: read|update")
      ->check(CLI::IsMember({"read", "update"}));
  app.add_option("--threads", f.threads, "Workload threads (w)")->check(CLI::PositiveNumber);
  app.add_option("--size-threads", f.sizeThreads, "Size threads (s)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--size-delay-us", f.sizeDelayUs, "Delay between size calls, microseconds");
  app.add_option("--duration-s", f.durationS, "Seconds per repetition");
  app.add_option("--prefill", f.prefill, "Initial element count");
  app.add_option("--key-range", f.keyRange,
                 "Key range [1,r]; 0 derives r from the prefill/mix balance");
  app.add_option("--zipf-theta", f.zipfTheta,
                 "Skew for contains keys (0 = uniform; updates stay uniform)");
  app.add_option("--max-tries", f.maxTries, "Optimistic retry bound before escalation");
  app.add_option("--seed", f.seed, "Workload RNG seed");
  app.add_option("--reps", f.reps, "Measured repetitions")->check(CLI::PositiveNumber);
  app.add_option("--warmup", f.warmup, "Warm-up repetitions")->check(CLI::NonNegativeNumber);
  app.add_option("--buckets", f.buckets, "Hash table bucket count");
  app.add_option("--out", f.out, "CSV output path (default: stdout)");
}

WorkloadSpec makeSpec(const CommonFlags& f, int workloadThreads, int sizeThreads) {
  WorkloadSpec spec = f.workload == "read" ? WorkloadSpec::readHeavy() : WorkloadSpec::updateHeavy();
  spec.prefillTarget = f.prefill;
  spec.keyRange = f.keyRange;
  spec.durationSeconds = f.durationS;
  spec.workloadThreads = workloadThreads;
  spec.sizeThreads = sizeThreads;
  spec.sizeDelayMicros = f.sizeDelayUs;
  spec.seed = f.seed;
  if (f.zipfTheta > 0.0) spec.zipfTheta = f.zipfTheta;
  return spec;
}

BenchConfig makeConfig(const CommonFlags& f, SizeMethod method) {
  BenchConfig cfg;
  cfg.structure = parseStructure(f.structure);
  cfg.method = method;
  // Baselines run w+s workload threads so comparisons hold total threads equal.
  int w = method == SizeMethod::None ? f.threads + f.sizeThreads : f.threads;
  int s = method == SizeMethod::None ? 0 : f.sizeThreads;
  cfg.workload = makeSpec(f, w, s);
  cfg.workloadLabel = f.workload;
  cfg.bucketCount = f.buckets;
  cfg.maxTries = f.maxTries;
  cfg.repetitions = f.reps;
  cfg.warmupRepetitions = f.warmup;
  return cfg;
}

void writeRows(const std::vector<BenchResult>& rows, const std::string& out) {
  if (out.empty()) {
    emitCsv(rows, std::cout);
  } else {
    emitCsv(rows, out);
    std::cerr << "wrote " << rows.size() << " rows to " << out << "\n";
  }
}

int cmdRun(const CommonFlags& f) {
  std::vector<BenchResult> rows;
  for (const auto& m : f.methods) {
    SizeMethod method = parseMethod(m);
    rows.push_back(runExperiment(makeConfig(f, method)));
    std::cerr << "done: " << f.structure << "/" << m << "\n";
  }
  computeOverheads(rows);
  writeRows(rows, f.out);
  return 0;
}

int cmdSweep(const CommonFlags& f, const std::vector<int>& values) {
  auto rows = sweepMaxTries(makeConfig(f, SizeMethod::Optimistic), values);
  writeRows(rows, f.out);
  return 0;
}

int cmdCheck(const std::string& path, uint64_t budget) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << "\n";
    return 2;
  }
  History h = parseHistory(in);
  CheckOptions opts;
  opts.stateBudget = budget;
  CheckResult res = checkLinearizable(h, opts);
  switch (res.status) {
    case CheckStatus::Linearizable:
      std::cout << "LINEARIZABLE (" << res.exploredStates << " states explored)\n";
      return 0;
    case CheckStatus::Violation:
      std::cout << "VIOLATION (minimal unlinearizable prefix: " << res.witnessPrefixLen
                << " events)\n";
      return 1;
    case CheckStatus::BudgetExceeded:
      std::cout << "SEARCH BUDGET EXCEEDED (" << res.exploredStates << " states)\n";
      return 2;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"concurrent-set size method benchmarks"};
  app.require_subcommand(1);

  CommonFlags runFlags;
  CLI::App* run = app.add_subcommand("run", "Measure workload and size throughput");
  addCommonFlags(*run, runFlags, true);

  CommonFlags sweepFlags;
  std::vector<int> triesValues = {2, 4, 8, 16};
  CLI::App* sweep = app.add_subcommand("sweep-tries", "Sweep the optimistic retry bound");
  addCommonFlags(*sweep, sweepFlags, false);
  sweep->add_option("--values", triesValues, "Retry bounds to sweep")->delimiter(',');

  std::string checkPath;
  uint64_t checkBudget = 20'000'000;
  CLI::App* check = app.add_subcommand("check", "Check a recorded history for linearizability");
  check->add_option("--in", checkPath, "History file (tab-separated events)")->required();
  check->add_option("--budget", checkBudget, "State exploration budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmdRun(runFlags);
    if (sweep->parsed()) return cmdSweep(sweepFlags, triesValues);
    if (check->parsed()) return cmdCheck(checkPath, checkBudget);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
