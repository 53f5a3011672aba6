#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <vector>

#include "sizable/common.hpp"

namespace sizable {

class AlreadyRegisteredError : public std::runtime_error {
 public:
  AlreadyRegisteredError() : std::runtime_error("Thread already registered") {}
};

class TooManyThreadsError : public std::runtime_error {
 public:
  TooManyThreadsError() : std::runtime_error("Too many threads") {}
};

class NotRegisteredError : public std::runtime_error {
 public:
  NotRegisteredError() : std::runtime_error("Thread not registered") {}
};

/// Assigns each participating thread a stable small integer id that indexes
/// every per-thread metadata array in the library. Released ids are pooled
/// and reissued smallest-first, so id reuse is deterministic.
///
/// The library normally uses the process-wide instance from
/// processRegistry(), but standalone registries can be constructed for tests.
class ThreadRegistry {
 public:
  static constexpr int kDefaultMaxThreads = 128;

  explicit ThreadRegistry(int maxThreads = kDefaultMaxThreads)
      : maxThreads_(maxThreads), serial_(nextSerial()) {}

  ThreadRegistry(const ThreadRegistry&) = delete;
  ThreadRegistry& operator=(const ThreadRegistry&) = delete;

  int registerThread() {
    if (findSlot() != nullptr) throw AlreadyRegisteredError();
    int tid;
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (!pool_.empty()) {
        tid = pool_.top();
        pool_.pop();
      } else {
        tid = nextId_.fetch_add(1);
        if (tid >= maxThreads_) throw TooManyThreadsError();
      }
    }
    tls().push_back(TlsEntry{serial_, tid});
    return tid;
  }

  void deregisterThread() {
    auto& entries = tls();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].serial == serial_) {
        int tid = entries[i].id;
        entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(i));
        std::lock_guard<std::mutex> lk(mu_);
        pool_.push(tid);
        return;
      }
    }
    throw NotRegisteredError();
  }

  /// Id of the calling thread; throws if it never registered here.
  int currentThreadId() const {
    const TlsEntry* e = findSlot();
    if (e == nullptr) throw NotRegisteredError();
    return e->id;
  }

  bool isRegistered() const { return findSlot() != nullptr; }

  /// Count of ids ever issued fresh. Monotone; callers iterating per-thread
  /// arrays bound the scan by this value and re-read it after the pass
  /// (see verifiedScan).
  int maxObservedThreads() const { return nextId_.load(std::memory_order_seq_cst); }

  int capacity() const { return maxThreads_; }

 private:
  struct TlsEntry {
    uint64_t serial;
    int id;
  };

  static std::vector<TlsEntry>& tls() {
    thread_local std::vector<TlsEntry> entries;
    return entries;
  }

  const TlsEntry* findSlot() const {
    for (const auto& e : tls())
      if (e.serial == serial_) return &e;
    return nullptr;
  }

  static uint64_t nextSerial() {
    static std::atomic<uint64_t> c{1};
    return c.fetch_add(1);
  }

  const int maxThreads_;
  const uint64_t serial_;
  std::atomic<int> nextId_{0};
  std::mutex mu_;
  std::priority_queue<int, std::vector<int>, std::greater<int>> pool_;
};

/// Process-wide registry shared by sets created without an explicit one.
inline ThreadRegistry& processRegistry() {
  static ThreadRegistry r;
  return r;
}

/// RAII register/deregister for worker threads.
class RegistrationGuard {
 public:
  explicit RegistrationGuard(ThreadRegistry& r) : reg_(r) { reg_.registerThread(); }
  ~RegistrationGuard() { reg_.deregisterThread(); }
  RegistrationGuard(const RegistrationGuard&) = delete;
  RegistrationGuard& operator=(const RegistrationGuard&) = delete;

 private:
  ThreadRegistry& reg_;
};

/// Runs fn(i) for every issued thread id, re-reading the issue counter after
/// each pass and repeating over the extension until it stops growing.
template <typename Fn>
inline void verifiedScan(const ThreadRegistry& reg, Fn&& fn) {
  int done = 0;
  int n = reg.maxObservedThreads();
  for (;;) {
    for (int i = done; i < n; ++i) fn(i);
    done = n;
    n = reg.maxObservedThreads();
    if (n == done) return;
  }
}

}  // namespace sizable
