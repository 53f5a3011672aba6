#pragma once

#include <cassert>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sizable/common.hpp"
#include "sizable/epoch_reclaimer.hpp"
#include "sizable/handshake_size_calculator.hpp"
#include "sizable/linked_list_set.hpp"
#include "sizable/lock_size_calculator.hpp"
#include "sizable/optimistic_size_calculator.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/snapshot_size_calculator.hpp"
#include "sizable/thread_registry.hpp"

namespace sizable {

enum class StructureKind { LinkedList, HashTable };
enum class SizeMethod { None, Sp, Handshake, Optimistic, Lock };

inline const char* structureName(StructureKind s) {
  return s == StructureKind::LinkedList ? "list" : "hash";
}

inline const char* methodName(SizeMethod m) {
  switch (m) {
    case SizeMethod::None: return "none";
    case SizeMethod::Sp: return "sp";
    case SizeMethod::Handshake: return "handshake";
    case SizeMethod::Optimistic: return "optimistic";
    case SizeMethod::Lock: return "lock";
  }
  return "?";
}

/// A concurrent integer set with a linearizable size. Calling threads must
/// be registered with the set's registry for every operation.
class SizedSet {
 public:
  virtual ~SizedSet() = default;
  virtual bool insert(int64_t key) = 0;
  virtual bool erase(int64_t key) = 0;
  virtual bool contains(int64_t key) = 0;
  virtual int64_t size() = 0;

  /// Element count by traversal; valid only while no operation is running.
  virtual int64_t quiescentCount() const = 0;

  virtual StructureKind structureKind() const = 0;
  virtual SizeMethod sizeMethod() const = 0;

  // Method-specific probes; defaults for methods without them.
  virtual int64_t awaitingSizes() const { return 0; }
  virtual uint64_t escalations() const { return 0; }
  virtual uint64_t frozenWindowWriteCount() const { return 0; }
  virtual uint64_t exclusionViolations() const { return 0; }
  virtual void setPhaseObserver(PhaseObserver*) {}
};

/// One lock-free list.
class ListCore {
 public:
  ListCore(ThreadRegistry& reg, EpochReclaimer& rec) : list_(reg, rec) {}

  static constexpr StructureKind kKind = StructureKind::LinkedList;

  LinkedListSet& bucketFor(int64_t) { return list_; }
  const LinkedListSet& bucketFor(int64_t) const { return list_; }

  int64_t quiescentCount() const { return list_.quiescentCount(); }

 private:
  LinkedListSet list_;
};

/// Fixed array of lock-free lists; no resizing.
class HashCore {
 public:
  HashCore(ThreadRegistry& reg, EpochReclaimer& rec, uint64_t bucketCount)
      : bucketCount_(bucketCount) {
    if (bucketCount_ == 0) throw std::invalid_argument("bucketCount must be >= 1");
    buckets_.reserve(bucketCount_);
    for (uint64_t i = 0; i < bucketCount_; ++i) {
      buckets_.push_back(std::make_unique<LinkedListSet>(reg, rec));
    }
  }

  static constexpr StructureKind kKind = StructureKind::HashTable;

  LinkedListSet& bucketFor(int64_t key) { return *buckets_[hashBucket(key, bucketCount_)]; }
  const LinkedListSet& bucketFor(int64_t key) const {
    return *buckets_[hashBucket(key, bucketCount_)];
  }

  int64_t quiescentCount() const {
    int64_t n = 0;
    for (const auto& b : buckets_) n += b->quiescentCount();
    return n;
  }

 private:
  uint64_t bucketCount_;
  std::vector<std::unique_ptr<LinkedListSet>> buckets_;
};

namespace detail {

template <typename Core>
class SetBase : public SizedSet {
 public:
  template <typename... CoreArgs>
  explicit SetBase(ThreadRegistry& reg, CoreArgs&&... args)
      : reg_(reg), rec_(reg), core_(reg, rec_, std::forward<CoreArgs>(args)...) {}

  int64_t quiescentCount() const override { return core_.quiescentCount(); }
  StructureKind structureKind() const override { return Core::kKind; }

 protected:
  EpochReclaimer::Guard pinned() { return EpochReclaimer::Guard(rec_, reg_.currentThreadId()); }

  ThreadRegistry& reg_;
  EpochReclaimer rec_;
  Core core_;
};

}  // namespace detail

/// Original structure, no size support; the overhead baseline.
template <typename Core>
class BaselineSet final : public detail::SetBase<Core> {
 public:
  using detail::SetBase<Core>::SetBase;

  bool insert(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).plainInsert(key);
  }

  bool erase(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).plainErase(key);
  }

  bool contains(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).plainContains(key);
  }

  int64_t size() override { throw std::logic_error("baseline structure has no size operation"); }

  SizeMethod sizeMethod() const override { return SizeMethod::None; }
};

/// Wait-free snapshot method: every update runs the metadata-cooperating
/// path; size snapshots the per-thread counters.
template <typename Core>
class SpSet final : public detail::SetBase<Core> {
 public:
  template <typename... CoreArgs>
  explicit SpSet(ThreadRegistry& reg, CoreArgs&&... args)
      : detail::SetBase<Core>(reg, std::forward<CoreArgs>(args)...), calc_(reg, this->rec_) {}

  bool insert(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).slowInsert(key, calc_);
  }

  bool erase(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).slowErase(key, calc_);
  }

  bool contains(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).slowContains(key, calc_);
  }

  int64_t size() override {
    auto g = this->pinned();
    return calc_.compute();
  }

  SizeMethod sizeMethod() const override { return SizeMethod::Sp; }

  SnapshotSizeCalculator& calculator() { return calc_; }

 private:
  SnapshotSizeCalculator calc_;
};

/// Handshake method: fast path when no size is active, slow path otherwise;
/// contains always runs the slow mode and takes no part in handshakes.
template <typename Core>
class HandshakeSet final : public detail::SetBase<Core> {
 public:
  template <typename... CoreArgs>
  explicit HandshakeSet(ThreadRegistry& reg, int handshakeRounds, CoreArgs&&... args)
      : detail::SetBase<Core>(reg, std::forward<CoreArgs>(args)...),
        calc_(reg, this->rec_, handshakeRounds) {}

  bool insert(int64_t key) override { return wrappedUpdate(OpKind::Insert, key); }
  bool erase(int64_t key) override { return wrappedUpdate(OpKind::Delete, key); }

  bool contains(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).slowContains(key, calc_.slowCalculator());
  }

  int64_t size() override {
    auto g = this->pinned();
    return calc_.compute();
  }

  SizeMethod sizeMethod() const override { return SizeMethod::Handshake; }

  uint64_t frozenWindowWriteCount() const override { return calc_.frozenWindowWriteCount(); }
  void setPhaseObserver(PhaseObserver* obs) override { calc_.setPhaseObserver(obs); }

  HandshakeSizeCalculator& calculator() { return calc_; }

 private:
  bool wrappedUpdate(OpKind kind, int64_t key) {
    auto g = this->pinned();
    calc_.setOpPhaseSynchronized(HandshakeSizeCalculator::kFastPhase);
    SIZABLE_HOOK("hs_op:entered");
    uint64_t phase = calc_.getSizePhase();
    SIZABLE_HOOK("hs_op:pre_exec");
    bool ret;
    if (phase % 4 == 0) {
      auto& bucket = this->core_.bucketFor(key);
      ret = kind == OpKind::Insert ? bucket.plainInsert(key) : bucket.plainErase(key);
      if (ret) calc_.fastUpdateMetadata(kind);
    } else {
      calc_.setOpPhase(phase);
      auto& bucket = this->core_.bucketFor(key);
      ret = kind == OpKind::Insert ? bucket.slowInsert(key, calc_.slowCalculator())
                                   : bucket.slowErase(key, calc_.slowCalculator());
    }
    calc_.setOpPhase(HandshakeSizeCalculator::kIdlePhase);
    return ret;
  }

  HandshakeSizeCalculator calc_;
};

/// Optimistic method: updates announce themselves through parity-stamped
/// activity counters; contains is untouched.
template <typename Core>
class OptimisticSet final : public detail::SetBase<Core> {
 public:
  template <typename... CoreArgs>
  explicit OptimisticSet(ThreadRegistry& reg, int maxTries, CoreArgs&&... args)
      : detail::SetBase<Core>(reg, std::forward<CoreArgs>(args)...),
        calc_(reg, this->rec_, maxTries) {}

  bool insert(int64_t key) override { return wrappedUpdate(OpKind::Insert, key); }
  bool erase(int64_t key) override { return wrappedUpdate(OpKind::Delete, key); }

  bool contains(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).plainContains(key);
  }

  int64_t size() override {
    auto g = this->pinned();
    return calc_.computeSize();
  }

  SizeMethod sizeMethod() const override { return SizeMethod::Optimistic; }

  int64_t awaitingSizes() const override { return calc_.awaitingSizes(); }
  uint64_t escalations() const override { return calc_.escalations(); }

  OptimisticSizeCalculator& calculator() { return calc_; }

 private:
  bool wrappedUpdate(OpKind kind, int64_t key) {
    auto g = this->pinned();
    calc_.helpSize();
    auto& bucket = this->core_.bucketFor(key);
    // Failure needs no announcement: nothing will be modified.
    bool present = bucket.searchPresent(key);
    if (kind == OpKind::Insert ? present : !present) return false;
    calc_.incrementActivityCounter();
    SIZABLE_HOOK("opt:mid_update");
    bool ret = kind == OpKind::Insert ? bucket.plainInsert(key) : bucket.plainErase(key);
    if (ret) calc_.updateMetadata(kind);
    calc_.incrementActivityCounter();
    return ret;
  }

  OptimisticSizeCalculator calc_;
};

/// Lock method: updates hold the shared side of a readers-writer gate
/// around their modification window; size sums under the exclusive side.
template <typename Core>
class LockSet final : public detail::SetBase<Core> {
 public:
  template <typename... CoreArgs>
  explicit LockSet(ThreadRegistry& reg, std::unique_ptr<RwGate> gate, CoreArgs&&... args)
      : detail::SetBase<Core>(reg, std::forward<CoreArgs>(args)...),
        calc_(reg, this->rec_, std::move(gate)) {}

  bool insert(int64_t key) override { return wrappedUpdate(OpKind::Insert, key); }
  bool erase(int64_t key) override { return wrappedUpdate(OpKind::Delete, key); }

  bool contains(int64_t key) override {
    auto g = this->pinned();
    return this->core_.bucketFor(key).plainContains(key);
  }

  int64_t size() override {
    auto g = this->pinned();
    return calc_.computeSize();
  }

  SizeMethod sizeMethod() const override { return SizeMethod::Lock; }

  uint64_t exclusionViolations() const override { return calc_.exclusionViolations(); }

  LockSizeCalculator& calculator() { return calc_; }

 private:
  bool wrappedUpdate(OpKind kind, int64_t key) {
    auto g = this->pinned();
    auto& bucket = this->core_.bucketFor(key);
    bool present = bucket.searchPresent(key);
    if (kind == OpKind::Insert ? present : !present) return false;
    calc_.gate().acquireShared();
    SIZABLE_HOOK("lock:in_critical");
    bool ret = kind == OpKind::Insert ? bucket.plainInsert(key) : bucket.plainErase(key);
    if (ret) calc_.updateMetadata(kind);
    calc_.gate().releaseShared();
    return ret;
  }

  LockSizeCalculator calc_;
};

struct SetOptions {
  StructureKind structure = StructureKind::LinkedList;
  SizeMethod method = SizeMethod::Sp;
  uint64_t bucketCount = 1u << 12;
  int maxTries = 3;
  int handshakeRounds = 2;
  ThreadRegistry* registry = nullptr;  // defaults to processRegistry()
  std::unique_ptr<RwGate> gate;        // defaults to WriterPreferenceRwLock
};

inline std::unique_ptr<SizedSet> makeSizedSet(SetOptions opts) {
  ThreadRegistry& reg = opts.registry != nullptr ? *opts.registry : processRegistry();
  if (opts.structure == StructureKind::LinkedList) {
    switch (opts.method) {
      case SizeMethod::None: return std::make_unique<BaselineSet<ListCore>>(reg);
      case SizeMethod::Sp: return std::make_unique<SpSet<ListCore>>(reg);
      case SizeMethod::Handshake:
        return std::make_unique<HandshakeSet<ListCore>>(reg, opts.handshakeRounds);
      case SizeMethod::Optimistic:
        return std::make_unique<OptimisticSet<ListCore>>(reg, opts.maxTries);
      case SizeMethod::Lock:
        return std::make_unique<LockSet<ListCore>>(reg, std::move(opts.gate));
    }
  } else {
    switch (opts.method) {
      case SizeMethod::None:
        return std::make_unique<BaselineSet<HashCore>>(reg, opts.bucketCount);
      case SizeMethod::Sp: return std::make_unique<SpSet<HashCore>>(reg, opts.bucketCount);
      case SizeMethod::Handshake:
        return std::make_unique<HandshakeSet<HashCore>>(reg, opts.handshakeRounds,
                                                        opts.bucketCount);
      case SizeMethod::Optimistic:
        return std::make_unique<OptimisticSet<HashCore>>(reg, opts.maxTries, opts.bucketCount);
      case SizeMethod::Lock:
        return std::make_unique<LockSet<HashCore>>(reg, std::move(opts.gate), opts.bucketCount);
    }
  }
  throw std::invalid_argument("unknown structure/method combination");
}

}  // namespace sizable
