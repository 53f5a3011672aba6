#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sizable/sized_set.hpp"
#include "sizable/workload.hpp"

namespace sizable {

struct BenchConfig {
  StructureKind structure = StructureKind::HashTable;
  SizeMethod method = SizeMethod::Sp;
  WorkloadSpec workload;
  std::string workloadLabel = "update";
  uint64_t bucketCount = 1u << 15;
  int maxTries = 3;
  int repetitions = 10;
  int warmupRepetitions = 5;
  ThreadRegistry* registry = nullptr;
};

struct BenchResult {
  std::string structure;
  std::string method;
  std::string workload;
  int workloadThreads = 0;
  int sizeThreads = 0;
  int64_t sizeDelayMicros = 0;
  int maxTries = 0;
  int64_t prefill = 0;
  int64_t keyRange = 0;
  double durationSeconds = 0;
  int repetitions = 0;
  double opsPerSecond = 0;
  std::optional<double> sizeOpsPerSecond;
  std::optional<double> escalationsPerSizeOp;
  std::optional<double> overheadPct;  // vs the none baseline at equal total threads
  double runSeconds = 0;
};

class CapacityExceededError : public std::runtime_error {
 public:
  CapacityExceededError()
      : std::runtime_error("registry capacity too small for workload + size threads") {}
};

namespace detail {

struct RepStats {
  double opsPerSecond = 0;
  double sizeOpsPerSecond = 0;
  double escalationsPerSizeOp = 0;
  double seconds = 0;
};

inline RepStats runOnce(const BenchConfig& cfg, ThreadRegistry& reg) {
  SetOptions so;
  so.structure = cfg.structure;
  so.method = cfg.method;
  so.bucketCount = cfg.bucketCount;
  so.maxTries = cfg.maxTries;
  so.registry = &reg;
  auto set = makeSizedSet(std::move(so));

  {
    RegistrationGuard g(reg);
    prefill(*set, cfg.workload, cfg.workload.seed ^ 0x5eedull);
  }

  const int w = cfg.workload.workloadThreads;
  const int s = cfg.method == SizeMethod::None ? 0 : cfg.workload.sizeThreads;
  std::atomic<bool> stop{false};
  std::atomic<bool> go{false};
  std::vector<uint64_t> opCounts(static_cast<std::size_t>(w), 0);
  std::vector<uint64_t> sizeCounts(static_cast<std::size_t>(s), 0);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(w + s));

  for (int t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      RegistrationGuard g(reg);
      OpStream stream(cfg.workload, cfg.workload.seed + static_cast<uint64_t>(t) * 1000003ull);
      while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
      uint64_t count = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        WorkloadOp op = stream.next();
        if (op.isContains) set->contains(op.key);
        else if (op.kind == OpKind::Insert) set->insert(op.key);
        else set->erase(op.key);
        ++count;
      }
      opCounts[static_cast<std::size_t>(t)] = count;
    });
  }
  for (int t = 0; t < s; ++t) {
    threads.emplace_back([&, t] {
      RegistrationGuard g(reg);
      while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
      uint64_t count = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        set->size();
        ++count;
        if (cfg.workload.sizeDelayMicros > 0) {
          std::this_thread::sleep_for(std::chrono::microseconds(cfg.workload.sizeDelayMicros));
        }
      }
      sizeCounts[static_cast<std::size_t>(t)] = count;
    });
  }

  auto start = std::chrono::steady_clock::now();
  go.store(true, std::memory_order_release);
  std::this_thread::sleep_for(std::chrono::duration<double>(cfg.workload.durationSeconds));
  stop.store(true, std::memory_order_seq_cst);
  for (auto& th : threads) th.join();
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RepStats st;
  uint64_t ops = 0;
  for (uint64_t c : opCounts) ops += c;
  uint64_t sizes = 0;
  for (uint64_t c : sizeCounts) sizes += c;
  st.opsPerSecond = static_cast<double>(ops) / elapsed;
  st.sizeOpsPerSecond = static_cast<double>(sizes) / elapsed;
  st.escalationsPerSizeOp =
      sizes > 0 ? static_cast<double>(set->escalations()) / static_cast<double>(sizes) : 0.0;
  st.seconds = elapsed;
  if (set->awaitingSizes() != 0) {
    throw std::logic_error("awaitingSizes did not return to zero after the run");
  }
  return st;
}

}  // namespace detail

inline BenchResult runExperiment(const BenchConfig& cfg) {
  ThreadRegistry& reg = cfg.registry != nullptr ? *cfg.registry : processRegistry();
  const int s = cfg.method == SizeMethod::None ? 0 : cfg.workload.sizeThreads;
  if (cfg.workload.workloadThreads + s + 1 > reg.capacity()) throw CapacityExceededError();
  cfg.workload.validate();

  BenchResult r;
  r.structure = structureName(cfg.structure);
  r.method = methodName(cfg.method);
  r.workload = cfg.workloadLabel;
  r.workloadThreads = cfg.workload.workloadThreads;
  r.sizeThreads = s;
  r.sizeDelayMicros = cfg.workload.sizeDelayMicros;
  r.maxTries = cfg.maxTries;
  r.prefill = cfg.workload.prefillTarget;
  r.keyRange = effectiveKeyRange(cfg.workload);
  r.durationSeconds = cfg.workload.durationSeconds;
  r.repetitions = cfg.repetitions;

  for (int i = 0; i < cfg.warmupRepetitions; ++i) detail::runOnce(cfg, reg);
  double ops = 0, sizeOps = 0, esc = 0, secs = 0;
  for (int i = 0; i < cfg.repetitions; ++i) {
    auto st = detail::runOnce(cfg, reg);
    ops += st.opsPerSecond;
    sizeOps += st.sizeOpsPerSecond;
    esc += st.escalationsPerSizeOp;
    secs += st.seconds;
  }
  const double n = static_cast<double>(cfg.repetitions);
  r.opsPerSecond = ops / n;
  r.runSeconds = secs;
  if (cfg.method != SizeMethod::None) r.sizeOpsPerSecond = sizeOps / n;
  if (cfg.method == SizeMethod::Optimistic) r.escalationsPerSizeOp = esc / n;
  return r;
}

/// Fills in overheadPct on rows that have a matching none-baseline row at
/// equal total thread count.
inline void computeOverheads(std::vector<BenchResult>& rows) {
  for (auto& row : rows) {
    if (row.method == "none") continue;
    for (const auto& base : rows) {
      if (base.method != "none" || base.structure != row.structure ||
          base.workload != row.workload) {
        continue;
      }
      if (base.workloadThreads != row.workloadThreads + row.sizeThreads) continue;
      if (base.opsPerSecond > 0) {
        row.overheadPct = 100.0 * (base.opsPerSecond - row.opsPerSecond) / base.opsPerSecond;
      }
      break;
    }
  }
}

/// One row per tries value, reporting escalations per size operation.
inline std::vector<BenchResult> sweepMaxTries(BenchConfig cfg, std::vector<int> values) {
  if (cfg.method != SizeMethod::Optimistic) {
    throw std::invalid_argument("tries sweep applies to the optimistic method only");
  }
  if (values.empty()) values = {3};
  std::vector<BenchResult> rows;
  rows.reserve(values.size());
  for (int v : values) {
    cfg.maxTries = v;
    rows.push_back(runExperiment(cfg));
  }
  return rows;
}

inline const char* csvHeader() {
  return "structure,method,workload,threads,size_threads,size_delay_us,max_tries,prefill,"
         "key_range,duration_s,reps,ops_per_sec,size_ops_per_sec,escalations_per_size_op,"
         "overhead_pct,run_seconds";
}

inline std::string toCsvRow(const BenchResult& r) {
  char buf[512];
  auto opt = [](const std::optional<double>& v, const char* fmt) {
    char b[64];
    if (!v.has_value()) return std::string();
    std::snprintf(b, sizeof b, fmt, *v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%d,%lld,%d,%lld,%lld,%.3f,%d,%.2f,%s,%s,%s,%.3f",
                r.structure.c_str(), r.method.c_str(), r.workload.c_str(), r.workloadThreads,
                r.sizeThreads, static_cast<long long>(r.sizeDelayMicros), r.maxTries,
                static_cast<long long>(r.prefill), static_cast<long long>(r.keyRange),
                r.durationSeconds, r.repetitions, r.opsPerSecond,
                opt(r.sizeOpsPerSecond, "%.2f").c_str(),
                opt(r.escalationsPerSizeOp, "%.4f").c_str(), opt(r.overheadPct, "%.3f").c_str(),
                r.runSeconds);
  return buf;
}

inline void emitCsv(const std::vector<BenchResult>& rows, std::ostream& os) {
  os << csvHeader() << '\n';
  for (const auto& r : rows) os << toCsvRow(r) << '\n';
}

inline void emitCsv(const std::vector<BenchResult>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  emitCsv(rows, f);
  if (!f.good()) throw std::runtime_error("write failed: " + path);
}

/// Inverse of emitCsv, for round-trip checks and downstream tooling.
inline std::vector<BenchResult> parseCsv(std::istream& is) {
  std::vector<BenchResult> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;
  if (line != csvHeader()) throw std::runtime_error("unexpected CSV header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    f.push_back(cur);
    if (f.size() != 16) throw std::runtime_error("bad CSV row: " + line);
    BenchResult r;
    r.structure = f[0];
    r.method = f[1];
    r.workload = f[2];
    r.workloadThreads = std::stoi(f[3]);
    r.sizeThreads = std::stoi(f[4]);
    r.sizeDelayMicros = std::stoll(f[5]);
    r.maxTries = std::stoi(f[6]);
    r.prefill = std::stoll(f[7]);
    r.keyRange = std::stoll(f[8]);
    r.durationSeconds = std::stod(f[9]);
    r.repetitions = std::stoi(f[10]);
    r.opsPerSecond = std::stod(f[11]);
    if (!f[12].empty()) r.sizeOpsPerSecond = std::stod(f[12]);
    if (!f[13].empty()) r.escalationsPerSizeOp = std::stod(f[13]);
    if (!f[14].empty()) r.overheadPct = std::stod(f[14]);
    r.runSeconds = std::stod(f[15]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sizable
