#pragma once

#include <atomic>
#include <cassert>
#include <cstdint>
#include <memory>

#include "sizable/common.hpp"
#include "sizable/epoch_reclaimer.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/thread_registry.hpp"

namespace sizable {

/// Record installed by a successful slow insert or delete. Carries enough
/// for any helper to apply the metadata update exactly once.
struct UpdateInfo {
  OpKind kind;
  int threadId;
  uint64_t counterBefore;  // owner's counter for this kind at creation
};

/// Sentinel marking a node deleted by the plain (non-metadata) path. Helpers
/// must not run metadata updates for nodes carrying it.
inline const UpdateInfo* const kPlainDeleted = reinterpret_cast<const UpdateInfo*>(1);

inline bool isRealInfo(const UpdateInfo* p) { return p != nullptr && p != kPlainDeleted; }

/// One size computation in flight: per-thread snapshot cells, a collecting
/// flag whose true->false transition is the size's linearization point, and
/// the published result.
class CountersSnapshot {
 public:
  CountersSnapshot(int maxThreads, bool collecting)
      : maxThreads_(maxThreads),
        cells_(std::make_unique<std::atomic<uint64_t>[]>(static_cast<std::size_t>(maxThreads) * 2)),
        collecting_(collecting) {
    for (int i = 0; i < maxThreads * 2; ++i) cells_[i].store(kInvalidCounter, std::memory_order_relaxed);
  }

  bool collecting() const { return collecting_.load(std::memory_order_seq_cst); }

  /// true->false, at most once; the first transition is the linearization
  /// point of the size operation owning this snapshot.
  void finishCollecting() {
    bool was = collecting_.exchange(false, std::memory_order_seq_cst);
    if (was) {
      assert(!closed_.exchange(true) && "collecting closed twice");
    }
  }

  /// Raises the cell to at least `value`. Both the collector and forwarding
  /// updaters go through this: a cell may first be seeded by a helper
  /// forwarding an old operation's (smaller) cumulative value, and the
  /// collector's larger read must still land. Every contributed value was
  /// read from the live counter before the collecting flag fell, so their
  /// maximum is itself a legal pre-linearization value.
  void raiseCell(int tid, int kindIdx, uint64_t value) {
    auto& c = cell(tid, kindIdx);
    uint64_t cur = c.load(std::memory_order_seq_cst);
    while (cur == kInvalidCounter || cur < value) {
      if (c.compare_exchange_weak(cur, value, std::memory_order_seq_cst)) return;
    }
  }

  void addCollected(int tid, int kindIdx, uint64_t value) { raiseCell(tid, kindIdx, value); }

  void forward(int tid, int kindIdx, uint64_t value) { raiseCell(tid, kindIdx, value); }

  uint64_t cellValue(int tid, int kindIdx) const {
    return cell(tid, kindIdx).load(std::memory_order_seq_cst);
  }

  /// Net contribution of the collected cells; never-collected cells count 0.
  int64_t netTotal(const ThreadRegistry& reg) const {
    int64_t sum = 0;
    verifiedScan(reg, [&](int i) {
      uint64_t ins = cellValue(i, 0);
      uint64_t del = cellValue(i, 1);
      if (ins != kInvalidCounter) sum += static_cast<int64_t>(ins);
      if (del != kInvalidCounter) sum -= static_cast<int64_t>(del);
    });
    return sum;
  }

  bool tryPublish(int64_t v) {
    int64_t expect = kInvalidSize;
    return size_.compare_exchange_strong(expect, v, std::memory_order_seq_cst);
  }

  int64_t publishedSize() const { return size_.load(std::memory_order_seq_cst); }

  int64_t waitForSize() const {
    SIZABLE_WAIT_SCOPE;
    Backoff b;
    for (;;) {
      int64_t v = publishedSize();
      if (v != kInvalidSize) return v;
      b.pause();
    }
  }

 private:
  std::atomic<uint64_t>& cell(int tid, int kindIdx) {
    return cells_[static_cast<std::size_t>(tid) * 2 + static_cast<std::size_t>(kindIdx)];
  }
  const std::atomic<uint64_t>& cell(int tid, int kindIdx) const {
    return cells_[static_cast<std::size_t>(tid) * 2 + static_cast<std::size_t>(kindIdx)];
  }

  const int maxThreads_;
  std::unique_ptr<std::atomic<uint64_t>[]> cells_;
  std::atomic<bool> collecting_;
  std::atomic<bool> closed_{false};
  std::atomic<int64_t> size_{kInvalidSize};
};

/// The wait-free baseline size engine: per-thread insert/delete counters
/// updated idempotently through UpdateInfo records, and a size that takes a
/// linearizable snapshot of all counters. Also drives the slow path of the
/// handshake method, which installs its own snapshots through the shared
/// snapshot slot.
class SnapshotSizeCalculator {
 public:
  SnapshotSizeCalculator(ThreadRegistry& reg, EpochReclaimer& rec)
      : reg_(reg),
        rec_(rec),
        counters_(std::make_unique<PairCell[]>(static_cast<std::size_t>(reg.capacity()))) {
    // Pre-installed completed snapshot: the first size always installs a
    // fresh one, so no caller can end up waiting on this instance.
    snapshot_.store(new CountersSnapshot(reg.capacity(), false), std::memory_order_seq_cst);
  }

  ~SnapshotSizeCalculator() { delete snapshot_.load(); }

  SnapshotSizeCalculator(const SnapshotSizeCalculator&) = delete;
  SnapshotSizeCalculator& operator=(const SnapshotSizeCalculator&) = delete;

  ThreadRegistry& registry() { return reg_; }

  UpdateInfo* createUpdateInfo(OpKind kind) {
    int tid = reg_.currentThreadId();
    return new UpdateInfo{kind, tid, counterValue(tid, counterIndex(kind))};
  }

  /// Applies the counter increment for `info` exactly once across all
  /// helpers, then forwards the post-update value into a collecting
  /// snapshot so the in-flight size stays consistent.
  void updateMetadata(const UpdateInfo& info) {
    SIZABLE_HOOK("snap:update_enter");
    auto& cell = counters_[static_cast<std::size_t>(info.threadId)].c[counterIndex(info.kind)];
    uint64_t expect = info.counterBefore;
    cell.compare_exchange_strong(expect, info.counterBefore + 1, std::memory_order_seq_cst);
    CountersSnapshot* snap = snapshot_.load(std::memory_order_seq_cst);
    if (snap->collecting()) {
      SIZABLE_HOOK("snap:pre_forward");
      snap->forward(info.threadId, counterIndex(info.kind), info.counterBefore + 1);
    }
    SIZABLE_HOOK("snap:update_done");
  }

  void help(const UpdateInfo* info) {
    if (isRealInfo(info)) updateMetadata(*info);
  }

  uint64_t counterValue(int tid, int kindIdx) const {
    return counters_[static_cast<std::size_t>(tid)].c[kindIdx].load(std::memory_order_seq_cst);
  }

  CountersSnapshot* currentSnapshot() const { return snapshot_.load(std::memory_order_seq_cst); }

  /// Installs `fresh` if the slot still holds `expected`; retires the
  /// replaced snapshot. Returns the snapshot now governing the slot.
  CountersSnapshot* exchangeSnapshot(CountersSnapshot* expected, CountersSnapshot* fresh) {
    CountersSnapshot* witnessed = expected;
    if (snapshot_.compare_exchange_strong(witnessed, fresh, std::memory_order_seq_cst)) {
      rec_.retire(reg_.currentThreadId(), expected);
      return fresh;
    }
    return witnessed;
  }

  void collectInto(CountersSnapshot& snap) {
    SIZABLE_HOOK("snap:collect_enter");
    bool stopped = false;
    verifiedScan(reg_, [&](int i) {
      if (stopped) return;
      uint64_t ins = counterValue(i, 0);
      uint64_t del = counterValue(i, 1);
      // A value may be installed only if it was read while the snapshot was
      // still collecting; otherwise it could postdate the linearization
      // point. Once collecting is false every remaining cell is settled by
      // whoever closed the snapshot.
      if (!snap.collecting()) {
        stopped = true;
        return;
      }
      snap.addCollected(i, 0, ins);
      snap.addCollected(i, 1, del);
    });
  }

  /// Linearizable size: helps the collecting snapshot if one is in flight,
  /// otherwise installs a fresh one so its own linearization point lies
  /// within this call. Wait-free: no step loops on other threads' progress.
  int64_t compute() {
    CountersSnapshot* snap = currentSnapshot();
    if (!snap->collecting()) {
      auto* fresh = new CountersSnapshot(reg_.capacity(), true);
      CountersSnapshot* installed = exchangeSnapshot(snap, fresh);
      if (installed != fresh) delete fresh;
      snap = installed;
    }
    collectInto(*snap);
    SIZABLE_HOOK("snap:pre_uncollect");
    snap->finishCollecting();
    snap->tryPublish(snap->netTotal(reg_));
    SIZABLE_HOOK("snap:published");
    return snap->publishedSize();
  }

 private:
  struct alignas(kCacheLine) PairCell {
    std::atomic<uint64_t> c[2] = {0, 0};  // [insert, delete]
  };

  ThreadRegistry& reg_;
  EpochReclaimer& rec_;
  std::unique_ptr<PairCell[]> counters_;
  std::atomic<CountersSnapshot*> snapshot_{nullptr};
};

}  // namespace sizable
