#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <thread>

namespace sizable {

/// Operation kinds for set updates. The numeric values are chosen so a
/// single-counter scheme can add the value directly instead of branching.
enum class OpKind : int {
  Insert = +1,
  Delete = -1,
};

inline constexpr int counterIndex(OpKind k) { return k == OpKind::Insert ? 0 : 1; }
inline constexpr int64_t netDelta(OpKind k) { return static_cast<int64_t>(k); }

inline constexpr uint64_t kInvalidCounter = std::numeric_limits<uint64_t>::max();
inline constexpr int64_t kInvalidSize = std::numeric_limits<int64_t>::min();

inline constexpr std::size_t kCacheLine = 64;

/// One value per cache line. Used for per-thread metadata arrays so threads
/// do not false-share neighbouring cells.
template <typename T>
struct alignas(kCacheLine) Padded {
  T value{};
};

/// Exponential spin backoff that degrades to yielding, for waits that may
/// outlast a scheduling quantum (this library is routinely run with more
/// threads than cores).
class Backoff {
 public:
  void pause() {
    if (round_ < kSpinRounds) {
      for (int i = 0; i < (1 << round_); ++i) cpuRelax();
      ++round_;
    } else {
      std::this_thread::yield();
    }
  }

  void reset() { round_ = 0; }

 private:
  static constexpr int kSpinRounds = 6;

  static void cpuRelax() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_ia32_pause();
#else
    std::atomic_signal_fence(std::memory_order_seq_cst);
#endif
  }

  int round_ = 0;
};

/// 64-bit mix with full avalanche (splitmix64 finalizer).
inline constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic bucket index for a key, uniform for uniform keys.
inline uint64_t hashBucket(int64_t key, uint64_t bucketCount) {
  return mix64(static_cast<uint64_t>(key)) % bucketCount;
}

}  // namespace sizable
