#pragma once

#include <array>
#include <atomic>
#include <cassert>
#include <memory>
#include <vector>

#include "sizable/common.hpp"
#include "sizable/thread_registry.hpp"

namespace sizable {

/// Epoch-based deferred reclamation for nodes and size-protocol objects.
///
/// Every structure operation pins the calling thread's slot to the current
/// global epoch for its duration. Retired objects are bucketed by the epoch
/// they were retired in and freed once the global epoch has moved two steps
/// past them, which guarantees no pinned reader can still hold a reference.
class EpochReclaimer {
 public:
  explicit EpochReclaimer(ThreadRegistry& reg)
      : reg_(reg), slots_(static_cast<std::size_t>(reg.capacity())) {}

  EpochReclaimer(const EpochReclaimer&) = delete;
  EpochReclaimer& operator=(const EpochReclaimer&) = delete;

  ~EpochReclaimer() {
    for (auto& slot : slots_)
      for (auto& bucket : slot.buckets) freeAll(bucket);
  }

  void pin(int tid) {
    auto& s = slots_[static_cast<std::size_t>(tid)];
    for (;;) {
      uint64_t e = epoch_.load(std::memory_order_seq_cst);
      s.state.store((e << 1) | 1, std::memory_order_seq_cst);
      if (epoch_.load(std::memory_order_seq_cst) == e) return;
    }
  }

  void unpin(int tid) {
    slots_[static_cast<std::size_t>(tid)].state.store(0, std::memory_order_release);
  }

  template <typename T>
  void retire(int tid, T* p) {
    retire(tid, p, [](void* q) { delete static_cast<T*>(q); });
  }

  void retire(int tid, void* p, void (*deleter)(void*)) {
    auto& s = slots_[static_cast<std::size_t>(tid)];
    uint64_t e = epoch_.load(std::memory_order_seq_cst);
    auto& bucket = s.buckets[e % kBuckets];
    if (bucket.epochTag != e) {
      // Re-used only after the global epoch advanced past it by kBuckets-1
      // steps, so its previous contents are unreachable.
      freeAll(bucket);
      bucket.epochTag = e;
    }
    bucket.items.push_back(Retired{p, deleter});
    if (++s.retireCount % kAdvancePeriod == 0) tryAdvance(e);
  }

  uint64_t currentEpoch() const { return epoch_.load(std::memory_order_seq_cst); }

  /// Advances the epoch if every pinned thread has caught up with it.
  bool tryAdvance(uint64_t expected) {
    bool stale = false;
    verifiedScan(reg_, [&](int i) {
      uint64_t st = slots_[static_cast<std::size_t>(i)].state.load(std::memory_order_seq_cst);
      if ((st & 1) != 0 && (st >> 1) != expected) stale = true;
    });
    if (stale) return false;
    return epoch_.compare_exchange_strong(expected, expected + 1, std::memory_order_seq_cst);
  }

  class Guard {
   public:
    Guard(EpochReclaimer& r, int tid) : r_(r), tid_(tid) { r_.pin(tid_); }
    ~Guard() { r_.unpin(tid_); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    EpochReclaimer& r_;
    int tid_;
  };

 private:
  static constexpr int kBuckets = 3;
  static constexpr uint64_t kAdvancePeriod = 128;

  struct Retired {
    void* p;
    void (*deleter)(void*);
  };

  struct Bucket {
    uint64_t epochTag = ~0ull;
    std::vector<Retired> items;
  };

  struct alignas(kCacheLine) Slot {
    std::atomic<uint64_t> state{0};  // bit0 = pinned, bits 1.. = epoch
    uint64_t retireCount = 0;
    std::array<Bucket, kBuckets> buckets;
  };

  static void freeAll(Bucket& b) {
    for (auto& r : b.items) r.deleter(r.p);
    b.items.clear();
  }

  ThreadRegistry& reg_;
  std::atomic<uint64_t> epoch_{1};
  std::vector<Slot> slots_;
};

}  // namespace sizable
