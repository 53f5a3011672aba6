#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <thread>

#include "sizable/common.hpp"
#include "sizable/epoch_reclaimer.hpp"
#include "sizable/optimistic_size_calculator.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/thread_registry.hpp"

namespace sizable {

/// Readers-writer lock surface so alternative implementations can be
/// benchmarked behind the same size method.
class RwGate {
 public:
  virtual ~RwGate() = default;
  virtual void acquireShared() = 0;
  virtual void releaseShared() = 0;
  virtual void acquireExclusive() = 0;
  virtual void releaseExclusive() = 0;
};

/// Default gate. Writers (size operations) take priority over incoming
/// readers, matching the stamped-lock behaviour the method was designed
/// around; a reader-preferring lock would let continuous updates starve
/// size indefinitely. Readers gated by a pending writer spin briefly and
/// then park, so the writer's cores are not burned by their retries.
class WriterPreferenceRwLock final : public RwGate {
 public:
  void acquireShared() override {
    SIZABLE_WAIT_SCOPE;
    int spins = 0;
    for (;;) {
      if (writersWaiting_.load(std::memory_order_seq_cst) == 0) {
        uint64_t s = state_.load(std::memory_order_seq_cst);
        if ((s & kWriterBit) == 0 &&
            state_.compare_exchange_weak(s, s + 1, std::memory_order_seq_cst)) {
          return;
        }
      }
      park(spins);
    }
  }

  void releaseShared() override { state_.fetch_sub(1, std::memory_order_seq_cst); }

  void acquireExclusive() override {
    SIZABLE_WAIT_SCOPE;
    writersWaiting_.fetch_add(1, std::memory_order_seq_cst);
    int spins = 0;
    for (;;) {
      uint64_t expect = 0;
      if (state_.compare_exchange_weak(expect, kWriterBit, std::memory_order_seq_cst)) break;
      park(spins);
    }
    writersWaiting_.fetch_sub(1, std::memory_order_seq_cst);
  }

  void releaseExclusive() override { state_.fetch_and(~kWriterBit, std::memory_order_seq_cst); }

 private:
  static constexpr uint64_t kWriterBit = 1ull << 63;

  static void park(int& spins) {
    if (spins < 16) {
      ++spins;
      std::this_thread::yield();
    } else {
      std::this_thread::sleep_for(std::chrono::microseconds(50));
    }
  }

  std::atomic<uint64_t> state_{0};
  std::atomic<uint64_t> writersWaiting_{0};
};

/// std::shared_mutex behind the gate surface, for comparison runs.
class SharedMutexGate final : public RwGate {
 public:
  void acquireShared() override { mu_.lock_shared(); }
  void releaseShared() override { mu_.unlock_shared(); }
  void acquireExclusive() override { mu_.lock(); }
  void releaseExclusive() override { mu_.unlock(); }

 private:
  std::shared_mutex mu_;
};

/// Lock-based size: updates hold the gate in shared mode around their
/// modification and net-counter write; size takes the exclusive side and
/// sums the counters with a plain pass, since no counter write can be
/// concurrent with it. Concurrent sizes share one result via SizeInfo.
class LockSizeCalculator {
 public:
  LockSizeCalculator(ThreadRegistry& reg, EpochReclaimer& rec,
                     std::unique_ptr<RwGate> gate = nullptr)
      : reg_(reg),
        rec_(rec),
        gate_(gate != nullptr ? std::move(gate) : std::make_unique<WriterPreferenceRwLock>()),
        net_(std::make_unique<Padded<std::atomic<int64_t>>[]>(
            static_cast<std::size_t>(reg.capacity()))) {
    // Published so the first size call takes the installer path; no caller
    // can wait on this instance, and its value is the size at construction.
    auto* initial = new SizeInfo();
    initial->size.store(0, std::memory_order_seq_cst);
    sizeInfo_.store(initial, std::memory_order_seq_cst);
  }

  ~LockSizeCalculator() { delete sizeInfo_.load(); }

  LockSizeCalculator(const LockSizeCalculator&) = delete;
  LockSizeCalculator& operator=(const LockSizeCalculator&) = delete;

  ThreadRegistry& registry() { return reg_; }
  RwGate& gate() { return *gate_; }

  /// Must be called with the shared side held.
  void updateMetadata(OpKind kind) {
    recordIfSumming();
    auto& cell = net_[static_cast<std::size_t>(reg_.currentThreadId())].value;
    cell.store(cell.load(std::memory_order_seq_cst) + netDelta(kind), std::memory_order_seq_cst);
    recordIfSumming();
  }

  int64_t computeSize() {
    for (;;) {
      SizeInfo* current = sizeInfo_.load(std::memory_order_seq_cst);
      if (current->size.load(std::memory_order_seq_cst) != kInvalidSize) {
        auto* fresh = new SizeInfo();
        SizeInfo* expect = current;
        SIZABLE_HOOK("lock:pre_install");
        if (sizeInfo_.compare_exchange_strong(expect, fresh, std::memory_order_seq_cst)) {
          rec_.retire(reg_.currentThreadId(), current);
          int64_t s = lockedSum();
          SIZABLE_HOOK("lock:pre_publish");
          fresh->size.store(s, std::memory_order_seq_cst);
          SIZABLE_HOOK("lock:published");
          return s;
        }
        delete fresh;
        // The witnessed instance was installed within this call's interval,
        // so its value is returnable.
        return waitForSize(*expect);
      }
      // A computation installed before this call is in flight; its value
      // may predate our interval, so wait it out and install a fresh one.
      waitForSize(*current);
    }
  }

  /// Nonzero iff a net-counter write ever raced the exclusive summation.
  uint64_t exclusionViolations() const { return violations_.load(std::memory_order_seq_cst); }

 private:
  int64_t lockedSum() {
    gate_->acquireExclusive();
    summing_.fetch_add(1, std::memory_order_seq_cst);
    SIZABLE_HOOK("lock:summing");
    int64_t sum = 0;
    verifiedScan(reg_, [&](int i) {
      sum += net_[static_cast<std::size_t>(i)].value.load(std::memory_order_seq_cst);
    });
    summing_.fetch_sub(1, std::memory_order_seq_cst);
    gate_->releaseExclusive();
    return sum;
  }

  static int64_t waitForSize(SizeInfo& info) {
    SIZABLE_WAIT_SCOPE;
    Backoff b;
    for (;;) {
      int64_t v = info.size.load(std::memory_order_seq_cst);
      if (v != kInvalidSize) return v;
      b.pause();
    }
  }

  void recordIfSumming() {
    if (summing_.load(std::memory_order_seq_cst) != 0) {
      violations_.fetch_add(1, std::memory_order_seq_cst);
    }
  }

  ThreadRegistry& reg_;
  EpochReclaimer& rec_;
  std::unique_ptr<RwGate> gate_;
  std::unique_ptr<Padded<std::atomic<int64_t>>[]> net_;
  std::atomic<SizeInfo*> sizeInfo_{nullptr};
  std::atomic<int> summing_{0};
  std::atomic<uint64_t> violations_{0};
};

}  // namespace sizable
