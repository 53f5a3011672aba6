#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sizable/common.hpp"
#include "sizable/sized_set.hpp"
#include "sizable/workload_rng.hpp"

namespace sizable {

/// Zipf-distributed ranks with the hot ranks scattered across [1, n] by a
/// mixing hash, so skewed reads do not cluster on low keys. Ranks are drawn
/// by exact inverse-CDF lookup, so the empirical rank distribution matches
/// the analytic mass function up to sampling noise.
class ScrambledZipfian {
 public:
  ScrambledZipfian(uint64_t n, double theta) : n_(n), theta_(theta), bits_(evenBitsFor(n)) {
    if (n == 0) throw std::invalid_argument("zipfian range must be >= 1");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must be in (0,1)");
    cdf_.resize(n);
    double sum = 0;
    for (uint64_t i = 1; i <= n; ++i) {
      sum += 1.0 / std::pow(static_cast<double>(i), theta);
      cdf_[i - 1] = sum;
    }
    zetan_ = sum;
    for (auto& v : cdf_) v /= zetan_;
    cdf_.back() = 1.0;
  }

  /// Zipf rank in [1, n]; rank 1 is the hottest.
  uint64_t nextRank(SplitMix64& rng) const {
    double u = rng.unit();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<uint64_t>(it - cdf_.begin()) + 1;
  }

  /// Scrambled key in [1, n]: ranks pass through a fixed permutation, so
  /// the hot ranks land on arbitrary keys but no two ranks collide.
  uint64_t nextKey(SplitMix64& rng) const { return 1 + permute(nextRank(rng) - 1); }

  /// Analytic probability of rank i, the oracle for distribution tests.
  double rankProbability(uint64_t rank) const {
    return 1.0 / (std::pow(static_cast<double>(rank), theta_) * zetan_);
  }

 private:
  /// Feistel network over the smallest even-bit power of two covering n,
  /// cycle-walking values that land outside [0, n).
  uint64_t permute(uint64_t x) const {
    const int half = bits_ / 2;
    const uint64_t mask = (1ull << half) - 1;
    do {
      uint64_t left = x >> half;
      uint64_t right = x & mask;
      for (uint64_t round = 0; round < 4; ++round) {
        uint64_t f = mix64(right ^ (round * 0x9e3779b97f4a7c15ull) ^ 0x5bd1e995u) & mask;
        uint64_t next = left ^ f;
        left = right;
        right = next;
      }
      x = (left << half) | right;
    } while (x >= n_);
    return x;
  }

  static int evenBitsFor(uint64_t n) {
    int b = 2;
    while ((1ull << b) < n) b += 2;
    return b;
  }

  uint64_t n_;
  double theta_;
  double zetan_;
  int bits_ = 2;
  std::vector<double> cdf_;
};

/// Benchmark workload parameters. Fixed mixes: update-heavy 30/20/50 and
/// read-heavy 3/2/95 (insert/delete/contains).
struct WorkloadSpec {
  int insertPct = 30;
  int deletePct = 20;
  int containsPct = 50;
  int64_t keyRange = 0;        // 0 = derive from prefillTarget (balance formula)
  int64_t prefillTarget = 100'000;
  double durationSeconds = 1.0;
  int workloadThreads = 4;
  int sizeThreads = 1;
  int64_t sizeDelayMicros = 0;
  std::optional<double> zipfTheta;  // applies to contains keys only
  uint64_t seed = 42;

  void validate() const {
    if (insertPct + deletePct + containsPct != 100) {
      throw std::invalid_argument("operation mix must sum to 100");
    }
    if (prefillTarget < 0) throw std::invalid_argument("prefill must be >= 0");
  }

  static WorkloadSpec updateHeavy() { return WorkloadSpec{}; }

  static WorkloadSpec readHeavy() {
    WorkloadSpec s;
    s.insertPct = 3;
    s.deletePct = 2;
    s.containsPct = 95;
    return s;
  }
};

/// Key range at which the mix holds the structure at the prefill target:
/// inserts succeed at rate (r-s)/r and deletes at s/r, which balance at
/// s = r * ins/(ins+del), i.e. r = target * (ins+del)/ins.
inline int64_t balancedKeyRange(const WorkloadSpec& spec) {
  if (spec.insertPct == 0) return spec.prefillTarget > 0 ? spec.prefillTarget * 2 : 1;
  double r = static_cast<double>(spec.prefillTarget) *
             static_cast<double>(spec.insertPct + spec.deletePct) /
             static_cast<double>(spec.insertPct);
  return std::max<int64_t>(1, static_cast<int64_t>(std::llround(r)));
}

inline int64_t effectiveKeyRange(const WorkloadSpec& spec) {
  return spec.keyRange > 0 ? spec.keyRange : balancedKeyRange(spec);
}

struct WorkloadOp {
  OpKind kind;       // meaningless when isContains
  bool isContains;
  int64_t key;
};

/// Per-thread operation stream; draws are contention-free.
class OpStream {
 public:
  OpStream(const WorkloadSpec& spec, uint64_t threadSeed)
      : spec_(spec), range_(effectiveKeyRange(spec)), rng_(threadSeed) {
    if (spec.zipfTheta.has_value()) {
      zipf_ = std::make_unique<ScrambledZipfian>(static_cast<uint64_t>(range_), *spec.zipfTheta);
    }
  }

  WorkloadOp next() {
    uint64_t r = rng_.below(100);
    WorkloadOp op;
    if (r < static_cast<uint64_t>(spec_.insertPct)) {
      op = {OpKind::Insert, false, uniformKey()};
    } else if (r < static_cast<uint64_t>(spec_.insertPct + spec_.deletePct)) {
      op = {OpKind::Delete, false, uniformKey()};
    } else {
      // Only contains draws use the skewed distribution when configured;
      // updates stay uniform over the same key space.
      int64_t key = zipf_ != nullptr ? static_cast<int64_t>(zipf_->nextKey(rng_)) : uniformKey();
      op = {OpKind::Insert, true, key};
    }
    return op;
  }

 private:
  int64_t uniformKey() { return static_cast<int64_t>(rng_.below(static_cast<uint64_t>(range_))) + 1; }

  WorkloadSpec spec_;
  int64_t range_;
  SplitMix64 rng_;
  std::unique_ptr<ScrambledZipfian> zipf_;
};

/// Inserts uniform-random keys until the structure holds the target count.
inline void prefill(SizedSet& set, const WorkloadSpec& spec, uint64_t seed = 7) {
  int64_t range = effectiveKeyRange(spec);
  if (range < spec.prefillTarget) {
    throw std::invalid_argument("key range smaller than prefill target");
  }
  SplitMix64 rng(seed);
  int64_t inserted = 0;
  while (inserted < spec.prefillTarget) {
    int64_t key = static_cast<int64_t>(rng.below(static_cast<uint64_t>(range))) + 1;
    if (set.insert(key)) ++inserted;
  }
}

}  // namespace sizable
