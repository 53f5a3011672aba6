#pragma once

#include <atomic>
#include <cstdio>
#include <memory>
#include <thread>
#include <vector>

#include "sizable/history.hpp"
#include "sizable/schedule_control.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/sized_set.hpp"
#include "sizable/workload_rng.hpp"

namespace sizable {

/// Randomized recording run. Kept small on purpose: the checker's search is
/// exponential in history length.
struct RecordConfig {
  int threads = 3;
  int opsPerThread = 6;
  int64_t keyRange = 3;
  StructureKind structure = StructureKind::LinkedList;
  SizeMethod method = SizeMethod::Sp;
  uint64_t bucketCount = 4;
  int maxTries = 3;
  int handshakeRounds = 2;
  uint64_t seed = 1;
  bool forceSizeOp = true;   // guarantee at least one SIZE per run
  bool includeSizeOps = true;  // false: insert/delete/contains only
  ThreadRegistry* registry = nullptr;
};

struct ScriptedOp {
  HistoryOp op;
  int64_t key = 0;
};

/// Deterministic scripted run: per-thread fixed operation lists plus the
/// exact order of yield points. Requires a build with schedule hooks. If the
/// protocol itself blocks the scripted order (a blocking wait the script
/// cannot cut through), the controller drains and the run completes
/// naturally; drained runs keep their verdict deterministic but not their
/// byte-exact stamp order.
struct ScriptedConfig {
  std::vector<std::vector<ScriptedOp>> threadOps;
  std::vector<ScheduleStep> script;
  StructureKind structure = StructureKind::LinkedList;
  SizeMethod method = SizeMethod::Sp;
  uint64_t bucketCount = 4;
  int maxTries = 3;
  int handshakeRounds = 2;
  ThreadRegistry* registry = nullptr;
  /// Ops run against this set when provided (lets tests pre-populate or
  /// inspect calculators); otherwise one is built from the fields above.
  SizedSet* set = nullptr;
};

namespace detail {

class SpinBarrier {
 public:
  explicit SpinBarrier(int n) : waiting_(n) {}
  void arriveAndWait() {
    waiting_.fetch_sub(1, std::memory_order_seq_cst);
    while (waiting_.load(std::memory_order_seq_cst) > 0) std::this_thread::yield();
  }

 private:
  std::atomic<int> waiting_;
};

class Recorder {
 public:
  explicit Recorder(int threads) : perThread_(static_cast<std::size_t>(threads)) {}

  int64_t runOp(SizedSet& set, int thread, HistoryOp op, int64_t key) {
    SIZABLE_HOOK("harness:invoke");
    stamp(thread, EventKind::Invoke, op, key, 0, false);
    int64_t result = 0;
    switch (op) {
      case HistoryOp::Insert: result = set.insert(key) ? 1 : 0; break;
      case HistoryOp::Delete: result = set.erase(key) ? 1 : 0; break;
      case HistoryOp::Contains: result = set.contains(key) ? 1 : 0; break;
      case HistoryOp::Size: result = set.size(); break;
    }
    SIZABLE_HOOK("harness:respond");
    stamp(thread, EventKind::Respond, op, key, result, true);
    return result;
  }

  History finish() {
    History h;
    for (auto& v : perThread_) {
      h.events.insert(h.events.end(), v.begin(), v.end());
    }
    std::sort(h.events.begin(), h.events.end(),
              [](const Event& a, const Event& b) { return a.seq < b.seq; });
    return h;
  }

 private:
  void stamp(int thread, EventKind kind, HistoryOp op, int64_t key, int64_t result,
             bool hasResult) {
    Event e;
    e.seq = seq_.fetch_add(1, std::memory_order_seq_cst);
    e.threadId = thread;
    e.kind = kind;
    e.op = op;
    e.key = key;
    e.result = result;
    e.hasResult = hasResult;
    perThread_[static_cast<std::size_t>(thread)].push_back(e);
  }

  std::atomic<uint64_t> seq_{0};
  std::vector<std::vector<Event>> perThread_;
};

inline std::vector<ScriptedOp> drawOps(const RecordConfig& cfg, int thread) {
  SplitMix64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<uint64_t>(thread) + 1);
  std::vector<ScriptedOp> ops;
  ops.reserve(static_cast<std::size_t>(cfg.opsPerThread));
  for (int i = 0; i < cfg.opsPerThread; ++i) {
    uint64_t r = rng.next() % 100;
    HistoryOp op;
    if (r < 30) op = HistoryOp::Insert;
    else if (r < 60) op = HistoryOp::Delete;
    else if (r < 85 || !cfg.includeSizeOps) op = HistoryOp::Contains;
    else op = HistoryOp::Size;
    int64_t key = static_cast<int64_t>(rng.next() % static_cast<uint64_t>(cfg.keyRange)) + 1;
    ops.push_back(ScriptedOp{op, key});
  }
  if (cfg.forceSizeOp && cfg.includeSizeOps && thread == 0 && cfg.opsPerThread > 0) {
    ops[rng.next() % static_cast<uint64_t>(cfg.opsPerThread)].op = HistoryOp::Size;
  }
  return ops;
}

}  // namespace detail

/// Runs the configured structure+method with randomized per-thread op lists
/// and returns the complete recorded history.
inline History record(const RecordConfig& cfg) {
  if (cfg.threads > 4 || cfg.opsPerThread > 8 || cfg.keyRange > 3) {
    std::fprintf(stderr,
                 "harness: config beyond the checking budget "
                 "(threads<=4, ops<=8, keys<=3); checking may be slow\n");
  }
  ThreadRegistry& reg = cfg.registry != nullptr ? *cfg.registry : processRegistry();
  SetOptions so;
  so.structure = cfg.structure;
  so.method = cfg.method;
  so.bucketCount = cfg.bucketCount;
  so.maxTries = cfg.maxTries;
  so.handshakeRounds = cfg.handshakeRounds;
  so.registry = &reg;
  auto set = makeSizedSet(std::move(so));

  detail::Recorder rec(cfg.threads);
  detail::SpinBarrier barrier(cfg.threads);
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(cfg.threads));
  for (int t = 0; t < cfg.threads; ++t) {
    workers.emplace_back([&, t] {
      auto ops = detail::drawOps(cfg, t);
      RegistrationGuard g(reg);
      barrier.arriveAndWait();
      for (const auto& op : ops) rec.runOp(*set, t, op.op, op.key);
    });
  }
  for (auto& w : workers) w.join();
  return rec.finish();
}

/// Executes threads in exactly the scripted yield-point order.
inline History scriptedSchedule(const ScriptedConfig& cfg) {
#if !defined(SIZABLE_SCHEDULE_HOOKS)
  (void)cfg;
  throw std::logic_error("scriptedSchedule requires a build with SIZABLE_SCHEDULE_HOOKS");
#else
  ThreadRegistry& reg = cfg.registry != nullptr ? *cfg.registry : processRegistry();
  std::unique_ptr<SizedSet> owned;
  SizedSet* set = cfg.set;
  if (set == nullptr) {
    SetOptions so;
    so.structure = cfg.structure;
    so.method = cfg.method;
    so.bucketCount = cfg.bucketCount;
    so.maxTries = cfg.maxTries;
    so.handshakeRounds = cfg.handshakeRounds;
    so.registry = &reg;
    owned = makeSizedSet(std::move(so));
    set = owned.get();
  }

  const int threads = static_cast<int>(cfg.threadOps.size());
  auto ctl = std::make_unique<ScheduleController>(cfg.script);
  detail::Recorder rec(threads);
  std::atomic<int> done{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      ScheduleController::bindThread(t);
      sched::SinkBinding bind(ctl.get());
      RegistrationGuard g(reg);
      for (const auto& op : cfg.threadOps[static_cast<std::size_t>(t)]) {
        rec.runOp(*set, t, op.op, op.key);
      }
      ctl->threadFinished(t);
      done.fetch_add(1);
    });
  }
  // Poll for protocol stalls the hooked waiters cannot observe themselves.
  while (done.load() < threads) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    ctl->pollStall();
  }
  for (auto& w : workers) w.join();
  ctl->verifyComplete();
  return rec.finish();
#endif
}

}  // namespace sizable
