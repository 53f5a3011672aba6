#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "sizable/common.hpp"
#include "sizable/epoch_reclaimer.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/thread_registry.hpp"

namespace sizable {

/// Published result of one size computation round. Written at most once
/// with a valid value; losers of the publish keep the winner's value.
struct SizeInfo {
  std::atomic<int64_t> size{kInvalidSize};
};

/// Optimistic size: updaters bracket their modification window with a
/// per-thread activity counter whose odd parity means "update in progress".
/// A size reads all activity counters (waiting out odd cells), sums the net
/// counters non-atomically, and validates by re-reading the activity
/// counters; any change restarts the attempt. After maxTries failures the
/// size raises awaitingSizes, making updaters help compute before their next
/// operation.
class OptimisticSizeCalculator {
 public:
  OptimisticSizeCalculator(ThreadRegistry& reg, EpochReclaimer& rec, int maxTries = 3)
      : reg_(reg),
        rec_(rec),
        maxTries_(maxTries),
        activity_(std::make_unique<Padded<std::atomic<uint64_t>>[]>(
            static_cast<std::size_t>(reg.capacity()))),
        net_(std::make_unique<Padded<std::atomic<int64_t>>[]>(
            static_cast<std::size_t>(reg.capacity()))) {
    sizeInfo_.store(new SizeInfo(), std::memory_order_seq_cst);
  }

  ~OptimisticSizeCalculator() { delete sizeInfo_.load(); }

  OptimisticSizeCalculator(const OptimisticSizeCalculator&) = delete;
  OptimisticSizeCalculator& operator=(const OptimisticSizeCalculator&) = delete;

  ThreadRegistry& registry() { return reg_; }
  int maxTries() const { return maxTries_; }

  void incrementActivityCounter() {
    auto& cell = activity_[static_cast<std::size_t>(reg_.currentThreadId())].value;
    cell.store(cell.load(std::memory_order_seq_cst) + 1, std::memory_order_seq_cst);
  }

  void updateMetadata(OpKind kind) {
    auto& cell = net_[static_cast<std::size_t>(reg_.currentThreadId())].value;
    cell.store(cell.load(std::memory_order_seq_cst) + netDelta(kind), std::memory_order_seq_cst);
  }

  uint64_t activityValue(int tid) const {
    return activity_[static_cast<std::size_t>(tid)].value.load(std::memory_order_seq_cst);
  }

  /// Called by updates before they start operating. A no-op unless some
  /// size has exhausted its retries.
  void helpSize() {
    if (awaitingSizes_.load(std::memory_order_seq_cst) == 0) return;
    SizeInfo* current = sizeInfo_.load(std::memory_order_seq_cst);
    for (;;) {
      if (current->size.load(std::memory_order_seq_cst) != kInvalidSize) return;
      SIZABLE_HOOK("opt:help_attempt");
      int64_t s = tryComputeSize();
      if (s != kInvalidSize) {
        int64_t expect = kInvalidSize;
        current->size.compare_exchange_strong(expect, s, std::memory_order_seq_cst);
        return;
      }
    }
  }

  /// One optimistic attempt: returns the net sum, or kInvalidSize if an
  /// update raced with the summation.
  int64_t tryComputeSize() {
    int firstBound = reg_.maxObservedThreads();
    status_.assign(static_cast<std::size_t>(firstBound), 0);
    for (int i = 0; i < firstBound; ++i) {
      uint64_t v = activityValue(i);
      if (v % 2 != 0) {  // wait out an in-flight update
        SIZABLE_WAIT_SCOPE;
        Backoff b;
        do {
          b.pause();
          v = activityValue(i);
        } while (v % 2 != 0);
      }
      status_[static_cast<std::size_t>(i)] = v;
    }
    SIZABLE_HOOK("opt:post_first_read");
    int64_t sum = 0;
    for (int i = 0; i < firstBound; ++i) {
      sum += net_[static_cast<std::size_t>(i)].value.load(std::memory_order_seq_cst);
    }
    SIZABLE_HOOK("opt:post_sum");
    // Threads registered after the first pass have initial activity 0; any
    // update they completed in the window shows up as a mismatch here.
    int secondBound = reg_.maxObservedThreads();
    for (int i = 0; i < secondBound; ++i) {
      uint64_t expect = i < firstBound ? status_[static_cast<std::size_t>(i)] : 0;
      if (activityValue(i) != expect) return kInvalidSize;
    }
    return sum;
  }

  int64_t computeSize() {
    int count = 0;
    auto [active, returnable] = obtainActiveSizeInfo();
    int64_t size;
    for (;;) {
      size = active->size.load(std::memory_order_seq_cst);
      if (size != kInvalidSize) {
        if (returnable) break;
        // A value in the instance witnessed first may predate this call's
        // interval; a freshly installed instance can only be completed
        // within it.
        active = obtainActiveSizeInfo().first;
        returnable = true;
        continue;
      }
      if (count == maxTries_) {
        awaitingSizes_.fetch_add(1, std::memory_order_seq_cst);
        escalations_.fetch_add(1, std::memory_order_seq_cst);
        SIZABLE_HOOK("opt:escalated");
      }
      if (count <= maxTries_) ++count;
      size = tryComputeSize();
      if (size != kInvalidSize) {
        int64_t expect = kInvalidSize;
        active->size.compare_exchange_strong(expect, size, std::memory_order_seq_cst);
        break;
      }
    }
    if (count == maxTries_ + 1) awaitingSizes_.fetch_add(-1, std::memory_order_seq_cst);
    return size;
  }

  int64_t awaitingSizes() const { return awaitingSizes_.load(std::memory_order_seq_cst); }
  uint64_t escalations() const { return escalations_.load(std::memory_order_seq_cst); }

 private:
  /// Returns the instance whose value may still be produced, plus whether it
  /// was (re)installed within this call (and its value therefore returnable).
  std::pair<SizeInfo*, bool> obtainActiveSizeInfo() {
    SizeInfo* current = sizeInfo_.load(std::memory_order_seq_cst);
    if (current->size.load(std::memory_order_seq_cst) == kInvalidSize) return {current, false};
    auto* fresh = new SizeInfo();
    SizeInfo* expect = current;
    if (sizeInfo_.compare_exchange_strong(expect, fresh, std::memory_order_seq_cst)) {
      rec_.retire(reg_.currentThreadId(), current);
      return {fresh, true};
    }
    delete fresh;
    return {expect, true};
  }

  ThreadRegistry& reg_;
  EpochReclaimer& rec_;
  const int maxTries_;
  std::unique_ptr<Padded<std::atomic<uint64_t>>[]> activity_;
  std::unique_ptr<Padded<std::atomic<int64_t>>[]> net_;
  std::atomic<SizeInfo*> sizeInfo_{nullptr};
  std::atomic<int64_t> awaitingSizes_{0};
  std::atomic<uint64_t> escalations_{0};
  static thread_local std::vector<uint64_t> status_;
};

inline thread_local std::vector<uint64_t> OptimisticSizeCalculator::status_;

}  // namespace sizable
