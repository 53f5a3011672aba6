#include <doctest.h>

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "park_sink.hpp"
#include "reference_checks.hpp"
#include "sizable/harness.hpp"
#include "sizable/linearizability_checker.hpp"
#include "sizable/sized_set.hpp"

using namespace sizable;
using testing::ParkAt;
using testing::PhaseLog;

namespace {

int64_t sizeResponse(const History& h) {
  for (const auto& e : h.events) {
    if (e.kind == EventKind::Respond && e.op == HistoryOp::Size) return e.result;
  }
  return kInvalidSize;
}

}  // namespace

TEST_CASE("fast update touches only the fast counter") {
  ThreadRegistry reg(8);
  RegistrationGuard g(reg);
  HandshakeSet<ListCore> set(reg, 2);
  CHECK(set.insert(5));
  CHECK(set.calculator().computeFastSize() == 1);
  CHECK(set.calculator().slowCalculator().counterValue(reg.currentThreadId(), 0) == 0);
  CHECK_FALSE(set.erase(9));  // failed fast delete: no counter change
  CHECK(set.calculator().computeFastSize() == 1);
  CHECK(set.size() == 1);
}

TEST_CASE("contains runs the metadata-cooperating mode and skips handshakes") {
  ThreadRegistry reg(8);
  RegistrationGuard g(reg);
  HandshakeSet<ListCore> set(reg, 2);
  CHECK_FALSE(set.contains(7));
  CHECK(set.insert(7));
  CHECK(set.contains(7));
  // contains leaves the caller's phase cell idle: a handshake for a new
  // phase returns immediately even mid-contains-sequence.
  auto t0 = std::chrono::steady_clock::now();
  set.calculator().performHandshake(5);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(100));
}

TEST_CASE("one full size advances the phase 0->1->2->0 mod 4") {
  ThreadRegistry reg(8);
  RegistrationGuard g(reg);
  HandshakeSet<ListCore> set(reg, 2);
  PhaseLog log;
  set.setPhaseObserver(&log);
  set.insert(1);
  set.insert(2);
  CHECK(set.size() == 2);
  CHECK(log.writes() == 3);  // +1, +1, +2
  CHECK(log.violations() == 0);
  CHECK(log.last() == 8);
  CHECK(set.size() == 2);
  CHECK(log.last() == 12);
  CHECK(log.violations() == 0);
}

TEST_CASE("computeFastSize sums the per-thread cells") {
  ThreadRegistry reg(8);
  HandshakeSet<ListCore> set(reg, 2);
  auto run = [&](std::vector<int64_t> keys, bool insert) {
    std::thread t([&] {
      RegistrationGuard g(reg);
      for (int64_t k : keys) insert ? set.insert(k) : set.erase(k);
    });
    t.join();
  };
  run({1, 2, 3}, true);  // +3 on the first id
  run({1}, false);       // sequential threads reuse that id: same cell, net +2
  CHECK(set.calculator().computeFastSize() == 2);
}

TEST_CASE("handshake waits for a thread stuck in the fast phase") {
  ThreadRegistry reg(8);
  HandshakeSet<ListCore> set(reg, 2);
  ParkAt park("hs_op:pre_exec");
  std::atomic<bool> waiterDone{false};
  std::thread op([&] {
    sched::SinkBinding bind(&park);
    RegistrationGuard g(reg);
    set.insert(1);
  });
  park.waitUntilParked();
  // The op thread has published FAST_PHASE and is held before its traversal.
  std::thread waiter([&] {
    RegistrationGuard g(reg);
    set.calculator().performHandshake(5);
    waiterDone.store(true);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  CHECK_FALSE(waiterDone.load());  // FAST_PHASE never satisfies >= target
  park.release();
  op.join();
  waiter.join();
  CHECK(waiterDone.load());
}

TEST_CASE("all-idle handshake returns immediately") {
  ThreadRegistry reg(8);
  RegistrationGuard g(reg);
  HandshakeSet<ListCore> set(reg, 2);
  set.insert(1);
  auto t0 = std::chrono::steady_clock::now();
  set.calculator().performHandshake(5);
  auto elapsed = std::chrono::steady_clock::now() - t0;
  CHECK(elapsed < std::chrono::milliseconds(100));
}

TEST_CASE("a second size adopts the in-flight computation") {
  ThreadRegistry reg(8);
  HandshakeSet<ListCore> set(reg, 2);
  {
    RegistrationGuard g(reg);
    for (int64_t k = 1; k <= 7; ++k) set.insert(k);
  }
  PhaseLog log;
  set.setPhaseObserver(&log);
  std::vector<std::vector<ScriptedOp>> ops = {
      {{HistoryOp::Size, 0}},
      {{HistoryOp::Size, 0}},
  };
  // Size 0 is parked after collecting but before its linearization point;
  // size 1 then arrives, finds the snapshot still collecting, and must wait
  // on it instead of running handshakes of its own.
  std::vector<ScheduleStep> script = {
      {0, "hs_size:pre_collect"},
      {1, "harness:invoke"},
      {1, "hs_size:waiting"},
      {0, "hs_size:pre_uncollect"},
  };
  ScriptedConfig cfg;
  cfg.threadOps = ops;
  cfg.script = script;
  cfg.registry = &reg;
  cfg.set = &set;
  History h = scriptedSchedule(cfg);
  int sizeResponses = 0;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::Respond && e.op == HistoryOp::Size) {
      ++sizeResponses;
      CHECK(e.result == 7);
    }
  }
  CHECK(sizeResponses == 2);
  // Only one size ran the handshake sequence: exactly one +1,+1,+2 triple.
  CHECK(log.writes() == 3);
  CHECK(log.violations() == 0);
  CHECK(checkLinearizable(testing::withInitialContents(h, {1, 2, 3, 4, 5, 6, 7})).linearizable());
}

TEST_CASE("a size arriving after the linearization point joins the handshake window") {
  ThreadRegistry reg(8);
  HandshakeSet<ListCore> set(reg, 2);
  {
    RegistrationGuard g(reg);
    for (int64_t k = 1; k <= 4; ++k) set.insert(k);
  }
  PhaseLog log;
  set.setPhaseObserver(&log);
  std::vector<std::vector<ScriptedOp>> ops = {
      {{HistoryOp::Size, 0}},
      {{HistoryOp::Size, 0}},
  };
  // Size 0 publishes its result but is held before its phase advance; the
  // phase is still 2 mod 4. Size 1 installs a fresh snapshot and joins the
  // open window with a +4 jump; size 0's later advance must not land.
  std::vector<ScheduleStep> script = {
      {0, "hs_size:published"},
      {1, "harness:invoke"},
      {1, "hs_size:joined"},
      {1, "harness:respond"},
      {0, "hs_size:pre_advance"},
      {0, "harness:respond"},
  };
  ScriptedConfig cfg;
  cfg.threadOps = ops;
  cfg.script = script;
  cfg.registry = &reg;
  cfg.set = &set;
  History h = scriptedSchedule(cfg);
  for (const auto& e : h.events) {
    if (e.kind == EventKind::Respond && e.op == HistoryOp::Size) CHECK(e.result == 4);
  }
  CHECK(log.violations() == 0);
  // Writes: 5, 6 (size 0), 10 (size 1 joins), 12 (size 1's advance);
  // size 0's expected-value advance failed.
  CHECK(log.writes() == 4);
  CHECK(log.last() == 12);
  CHECK(checkLinearizable(testing::withInitialContents(h, {1, 2, 3, 4})).linearizable());
}

namespace {

/// The adversarial schedule: a fast delete depends on a slow insert that
/// acknowledged the first handshake but has not yet updated its counter.
/// With one handshake the size computes in that window and reports -1; the
/// second handshake waits the insert out.
History runDependentFastDeleteSchedule(ThreadRegistry& reg, int handshakeRounds) {
  std::vector<std::vector<ScriptedOp>> ops = {
      {{HistoryOp::Delete, 1}},  // thread 0: fast delete
      {{HistoryOp::Size, 0}},    // thread 1: size
      {{HistoryOp::Insert, 1}},  // thread 2: slow insert
  };
  std::vector<ScheduleStep> script = {
      {0, "harness:invoke"},
      {1, "harness:invoke"},
      {2, "harness:invoke"},
      {0, "hs_op:entered"},       // delete reads phase 4: fast mode
      {1, "hs_size:install"},     // size writes phase 5, waits on the delete
      {1, "hs_size:first_inc"},
      {2, "hs_op:entered"},       // insert reads phase 5: slow mode, acks
      {2, "hs_op:pre_exec"},      // insert links the node...
      {2, "slow:pre_metadata"},   // ...then is held before its counter update
      {0, "hs_op:pre_exec"},      // delete finds the node, removes it, idles
      {0, "harness:respond"},
      {1, "hs_size:computed"},    // size finishes (one handshake: right now)
      {1, "harness:respond"},
      {2, "snap:update_enter"},   // insert's counter update lands last
      {2, "harness:respond"},
  };
  ScriptedConfig cfg;
  cfg.threadOps = ops;
  cfg.script = script;
  cfg.structure = StructureKind::LinkedList;
  cfg.method = SizeMethod::Handshake;
  cfg.handshakeRounds = handshakeRounds;
  cfg.registry = &reg;
  return scriptedSchedule(cfg);
}

}  // namespace

TEST_CASE("single handshake admits a non-linearizable size; two handshakes do not") {
  ThreadRegistry reg(8);
  History broken = runDependentFastDeleteSchedule(reg, 1);
  auto res1 = checkLinearizable(broken);
  CHECK(res1.status == CheckStatus::Violation);
  CHECK(res1.witnessPrefixLen > 0);
  CHECK(sizeResponse(broken) == -1);

  History fixed = runDependentFastDeleteSchedule(reg, 2);
  CHECK(checkLinearizable(fixed).linearizable());
  CHECK(sizeResponse(fixed) == 0);
}

TEST_CASE("slow insert whose metadata lands after a dependent fast delete") {
  // The size completes without counting the slow insert; a fast delete of
  // the same key then runs to completion before the insert's counter
  // update. The history is legal only with the insert linearized after the
  // size; the checker must find that ordering.
  ThreadRegistry reg(8);
  std::vector<std::vector<ScriptedOp>> ops = {
      {{HistoryOp::Insert, 1}},  // thread 0: slow insert
      {{HistoryOp::Size, 0}},    // thread 1: size
      {{HistoryOp::Delete, 1}},  // thread 2: fast delete
  };
  std::vector<ScheduleStep> script = {
      {1, "harness:invoke"},
      {1, "hs_size:install"},     // size runs both handshakes; phase is 6
      {0, "harness:invoke"},
      {0, "hs_op:entered"},       // insert reads phase 6: slow mode
      {0, "hs_op:pre_exec"},      // insert links the node
      {0, "slow:pre_metadata"},   // held before the counter update
      {1, "hs_size:pre_collect"}, // size collects nothing, publishes 0
      {1, "harness:respond"},
      {2, "harness:invoke"},      // delete reads phase 8: fast mode again
      {2, "harness:respond"},
      {0, "snap:update_enter"},   // insert's metadata lands last
      {0, "harness:respond"},
  };
  ScriptedConfig cfg;
  cfg.threadOps = ops;
  cfg.script = script;
  cfg.structure = StructureKind::LinkedList;
  cfg.method = SizeMethod::Handshake;
  cfg.registry = &reg;
  History h = scriptedSchedule(cfg);
  CHECK(sizeResponse(h) == 0);
  int64_t insResult = -5, delResult = -5;
  for (const auto& e : h.events) {
    if (e.kind != EventKind::Respond) continue;
    if (e.op == HistoryOp::Insert) insResult = e.result;
    if (e.op == HistoryOp::Delete) delResult = e.result;
  }
  CHECK(insResult == 1);
  CHECK(delResult == 1);
  CHECK(checkLinearizable(h).linearizable());
}

TEST_CASE("fast cells are frozen inside the summation window") {
  ThreadRegistry reg(16);
  HandshakeSet<HashCore> set(reg, 2, 64);
  std::atomic<bool> stop{false};
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t) {
    ts.emplace_back([&, t] {
      RegistrationGuard g(reg);
      SplitMix64 rng(static_cast<uint64_t>(t) + 5);
      while (!stop.load()) {
        int64_t k = static_cast<int64_t>(rng.below(128)) + 1;
        if (rng.below(2) == 0) set.insert(k);
        else set.erase(k);
      }
    });
  }
  std::thread sizer([&] {
    RegistrationGuard g(reg);
    for (int i = 0; i < 300; ++i) set.size();
  });
  sizer.join();
  stop.store(true);
  for (auto& t : ts) t.join();
  CHECK(set.frozenWindowWriteCount() == 0);
}

TEST_CASE("randomized handshake histories are linearizable") {
  ThreadRegistry reg(8);
  for (uint64_t seed = 0; seed < 100; ++seed) {
    RecordConfig cfg;
    cfg.method = SizeMethod::Handshake;
    cfg.structure = seed % 2 == 0 ? StructureKind::LinkedList : StructureKind::HashTable;
    cfg.seed = seed + 1000;
    cfg.registry = &reg;
    History h = record(cfg);
    auto res = checkLinearizable(h);
    CAPTURE(seed);
    INFO("history: " << toText(h));
    REQUIRE(res.linearizable());
  }
}
