#pragma once

#include <atomic>
#include <cassert>
#include <cstdint>
#include <memory>

#include "sizable/common.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/snapshot_size_calculator.hpp"

namespace sizable {

/// Observes every write to the global size phase; used by protocol tests.
class PhaseObserver {
 public:
  virtual ~PhaseObserver() = default;
  virtual void onPhaseWrite(uint64_t oldValue, uint64_t newValue) = 0;
};

/// Phase-coordinated size: updates run an unsynchronized fast path while no
/// size is active, and the metadata-cooperating slow path while one is. A
/// size operation installs a snapshot, runs two handshakes to wait out every
/// operation that may still be on (or dependent on) the fast path, sums the
/// frozen fast cells plus the collected slow counters, and then releases the
/// phase so threads return to the fast path. No handshake is needed on the
/// way back.
class HandshakeSizeCalculator {
 public:
  static constexpr uint64_t kIdlePhase = 0;
  static constexpr uint64_t kFastPhase = 1;

  /// `handshakeRounds` exists for adversarial protocol tests; anything
  /// other than 2 is unsound and must never ship in real use.
  HandshakeSizeCalculator(ThreadRegistry& reg, EpochReclaimer& rec, int handshakeRounds = 2)
      : reg_(reg),
        slow_(reg, rec),
        rounds_(handshakeRounds),
        fast_(std::make_unique<Padded<std::atomic<int64_t>>[]>(
            static_cast<std::size_t>(reg.capacity()))),
        opPhase_(std::make_unique<Padded<std::atomic<uint64_t>>[]>(
            static_cast<std::size_t>(reg.capacity()))) {}

  SnapshotSizeCalculator& slowCalculator() { return slow_; }
  ThreadRegistry& registry() { return reg_; }

  void setPhaseObserver(PhaseObserver* obs) { observer_ = obs; }

  // ---- per-thread phase cells ----

  void setOpPhaseSynchronized(uint64_t phase) {
    opPhase_[static_cast<std::size_t>(reg_.currentThreadId())].value.store(
        phase, std::memory_order_seq_cst);
  }

  void setOpPhase(uint64_t phase) {
    opPhase_[static_cast<std::size_t>(reg_.currentThreadId())].value.store(
        phase, std::memory_order_release);
  }

  uint64_t getSizePhase() const { return sizePhase_.load(std::memory_order_seq_cst); }

  // ---- fast path metadata ----

  void fastUpdateMetadata(OpKind kind) {
    auto& cell = fast_[static_cast<std::size_t>(reg_.currentThreadId())].value;
    bool windowBefore = frozenWindows_.load(std::memory_order_seq_cst) > 0;
    cell.store(cell.load(std::memory_order_seq_cst) + netDelta(kind), std::memory_order_seq_cst);
    bool windowAfter = frozenWindows_.load(std::memory_order_seq_cst) > 0;
    if (windowBefore || windowAfter) frozenWindowWrites_.fetch_add(1, std::memory_order_seq_cst);
  }

  int64_t computeFastSize() const {
    int64_t sum = 0;
    verifiedScan(reg_, [&](int i) {
      sum += fast_[static_cast<std::size_t>(i)].value.load(std::memory_order_seq_cst);
    });
    return sum;
  }

  /// Count of fast-cell writes observed inside a post-handshake summation
  /// window. The protocol guarantees zero; a nonzero value is a bug.
  uint64_t frozenWindowWriteCount() const {
    return frozenWindowWrites_.load(std::memory_order_seq_cst);
  }

  // ---- size ----

  int64_t compute() {
    CountersSnapshot* curr = slow_.currentSnapshot();
    if (!curr->collecting()) {
      auto* fresh = new CountersSnapshot(reg_.capacity(), true);
      CountersSnapshot* installed = slow_.exchangeSnapshot(curr, fresh);
      if (installed == fresh) {
        SIZABLE_HOOK("hs_size:install");
        uint64_t phase = doFirstAndSecondHandshakes();
        frozenWindows_.fetch_add(1, std::memory_order_seq_cst);
        SIZABLE_HOOK("hs_size:pre_collect");
        slow_.collectInto(*fresh);
        int64_t fastSize = computeFastSize();
        SIZABLE_HOOK("hs_size:pre_uncollect");
        fresh->finishCollecting();
        fresh->tryPublish(fastSize + fresh->netTotal(reg_));
        SIZABLE_HOOK("hs_size:published");
        frozenWindows_.fetch_sub(1, std::memory_order_seq_cst);
        SIZABLE_HOOK("hs_size:pre_advance");
        // Expected-value advance: a size that joined this handshake window
        // has already moved the phase on, in which case this write must not
        // land again.
        uint64_t expect = phase;
        if (sizePhase_.compare_exchange_strong(expect, phase + 2, std::memory_order_seq_cst)) {
          notifyPhase(phase, phase + 2);
        }
        SIZABLE_HOOK("hs_size:computed");
        return fresh->publishedSize();
      }
      delete fresh;
      curr = installed;
    }
    SIZABLE_HOOK("hs_size:waiting");
    return curr->waitForSize();
  }

  /// Blocks until every issued thread id has acknowledged `targetPhase` or
  /// is idle. Exposed for protocol tests.
  void performHandshake(uint64_t targetPhase) {
    SIZABLE_WAIT_SCOPE;
    verifiedScan(reg_, [&](int i) {
      Backoff b;
      for (;;) {
        uint64_t p = opPhase_[static_cast<std::size_t>(i)].value.load(std::memory_order_seq_cst);
        if (p == kIdlePhase || p >= targetPhase) return;
        b.pause();
      }
    });
  }

 private:
  uint64_t doFirstAndSecondHandshakes() {
    uint64_t curr = sizePhase_.load(std::memory_order_seq_cst);
    if (curr % 4 == 2) {
      // The previous size has passed its linearization point but not yet
      // released the phase: join its handshake window.
      uint64_t expect = curr;
      if (sizePhase_.compare_exchange_strong(expect, curr + 4, std::memory_order_seq_cst)) {
        notifyPhase(curr, curr + 4);
        SIZABLE_HOOK("hs_size:joined");
        return curr + 4;
      }
    }
    {
      SIZABLE_WAIT_SCOPE;
      Backoff b;
      for (;;) {
        curr = sizePhase_.load(std::memory_order_seq_cst);
        if (curr % 4 == 0) break;
        b.pause();
      }
    }
    writePhase(curr, curr + 1);
    SIZABLE_HOOK("hs_size:first_inc");
    performHandshake(curr + 1);
    writePhase(curr + 1, curr + 2);
    SIZABLE_HOOK("hs_size:second_inc");
    if (rounds_ >= 2) performHandshake(curr + 2);
    return curr + 2;
  }

  void writePhase(uint64_t oldValue, uint64_t newValue) {
    sizePhase_.store(newValue, std::memory_order_seq_cst);
    notifyPhase(oldValue, newValue);
  }

  void notifyPhase(uint64_t oldValue, uint64_t newValue) {
    if (observer_ != nullptr) observer_->onPhaseWrite(oldValue, newValue);
  }

  ThreadRegistry& reg_;
  SnapshotSizeCalculator slow_;
  const int rounds_;
  std::atomic<uint64_t> sizePhase_{4};
  std::unique_ptr<Padded<std::atomic<int64_t>>[]> fast_;
  std::unique_ptr<Padded<std::atomic<uint64_t>>[]> opPhase_;
  std::atomic<int> frozenWindows_{0};
  std::atomic<uint64_t> frozenWindowWrites_{0};
  PhaseObserver* observer_ = nullptr;
};

}  // namespace sizable
