#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "sizable/history.hpp"

namespace sizable {

enum class CheckStatus { Linearizable, Violation, BudgetExceeded };

struct CheckResult {
  CheckStatus status = CheckStatus::Linearizable;
  uint64_t exploredStates = 0;
  /// On Violation: length of the shortest event prefix that already has no
  /// legal linearization.
  std::size_t witnessPrefixLen = 0;

  bool linearizable() const { return status == CheckStatus::Linearizable; }
};

struct CheckOptions {
  uint64_t stateBudget = 20'000'000;
  bool computeWitness = true;
};

namespace detail {

struct OpRec {
  int threadId;
  HistoryOp op;
  int64_t key;       // dense key index for state encoding
  int64_t rawKey;
  int64_t result;
  bool hasResult;    // false = pending: may take effect with any result, or not at all
  uint64_t invokeSeq;
  uint64_t respondSeq;
};

inline std::vector<OpRec> collectOps(const History& h) {
  std::vector<OpRec> ops;
  std::map<int, std::size_t> open;  // threadId -> index of pending op
  for (const auto& e : h.events) {
    if (e.kind == EventKind::Invoke) {
      if (open.count(e.threadId) != 0) {
        throw std::runtime_error("overlapping invocations on one thread");
      }
      open[e.threadId] = ops.size();
      ops.push_back(OpRec{e.threadId, e.op, 0, e.key, 0, false, e.seq,
                          std::numeric_limits<uint64_t>::max()});
    } else {
      auto it = open.find(e.threadId);
      if (it == open.end()) throw std::runtime_error("response without invocation");
      OpRec& r = ops[it->second];
      if (r.op != e.op) throw std::runtime_error("response op mismatch");
      r.result = e.result;
      r.hasResult = e.hasResult;
      r.respondSeq = e.seq;
      open.erase(it);
    }
  }
  return ops;
}

/// Replaces keys with dense indices so set state packs into a word.
inline int denseKeyCount(std::vector<OpRec>& ops) {
  std::map<int64_t, int64_t> dense;
  for (auto& r : ops) {
    if (r.op == HistoryOp::Size) continue;
    auto [it, fresh] = dense.emplace(r.rawKey, static_cast<int64_t>(dense.size()));
    (void)fresh;
    r.key = it->second;
  }
  return static_cast<int>(dense.size());
}

/// Exhaustive linearization search with memoized (chosen-set, set-state)
/// pruning. Sound and complete for histories within the key/state budget.
class Searcher {
 public:
  Searcher(std::vector<OpRec> ops, uint64_t budget) : ops_(std::move(ops)), budget_(budget) {}

  CheckStatus run(uint64_t* explored) {
    const std::size_t n = ops_.size();
    if (n > 63) throw std::runtime_error("history too large for the optimized checker");
    completedMask_ = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ops_[i].respondSeq != std::numeric_limits<uint64_t>::max()) {
        completedMask_ |= 1ull << i;
      }
    }
    bool ok;
    try {
      ok = dfs(0, 0);
    } catch (const BudgetBlown&) {
      *explored = explored_;
      return CheckStatus::BudgetExceeded;
    }
    *explored = explored_;
    return ok ? CheckStatus::Linearizable : CheckStatus::Violation;
  }

 private:
  struct BudgetBlown {};

  struct Key {
    uint64_t mask;
    uint64_t state;
    bool operator==(const Key& o) const { return mask == o.mask && state == o.state; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<uint64_t>()(k.mask * 0x9e3779b97f4a7c15ull ^ k.state);
    }
  };

  bool dfs(uint64_t mask, uint64_t state) {
    if ((mask & completedMask_) == completedMask_) return true;  // pending ops may be dropped
    if (!seen_.emplace(Key{mask, state}).second) return false;
    if (++explored_ > budget_) throw BudgetBlown{};

    uint64_t minRespond = std::numeric_limits<uint64_t>::max();
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if ((mask & (1ull << i)) == 0) minRespond = std::min(minRespond, ops_[i].respondSeq);
    }
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if ((mask & (1ull << i)) != 0) continue;
      const OpRec& r = ops_[i];
      if (r.invokeSeq > minRespond) continue;  // some unchosen op responded before this invoked
      int64_t res;
      uint64_t next = applyOp(state, r, &res);
      if (r.hasResult && res != r.result) continue;
      if (dfs(mask | (1ull << i), next)) return true;
    }
    return false;
  }

  static uint64_t applyOp(uint64_t state, const OpRec& r, int64_t* res) {
    const uint64_t bit = r.op == HistoryOp::Size ? 0 : (1ull << r.key);
    switch (r.op) {
      case HistoryOp::Insert:
        *res = (state & bit) == 0 ? 1 : 0;
        return state | bit;
      case HistoryOp::Delete:
        *res = (state & bit) != 0 ? 1 : 0;
        return state & ~bit;
      case HistoryOp::Contains:
        *res = (state & bit) != 0 ? 1 : 0;
        return state;
      case HistoryOp::Size:
        *res = static_cast<int64_t>(__builtin_popcountll(state));
        return state;
    }
    *res = 0;
    return state;
  }

  std::vector<OpRec> ops_;
  uint64_t completedMask_ = 0;
  const uint64_t budget_;
  uint64_t explored_ = 0;
  std::unordered_set<Key, KeyHash> seen_;
};

inline CheckStatus checkOnce(const History& h, uint64_t budget, uint64_t* explored) {
  auto ops = collectOps(h);
  int keys = denseKeyCount(ops);
  if (keys > 63) throw std::runtime_error("history has too many distinct keys");

  bool hasSize = std::any_of(ops.begin(), ops.end(),
                             [](const OpRec& r) { return r.op == HistoryOp::Size; });
  *explored = 0;
  if (!hasSize) {
    // Size reads global state; without it, per-key histories of a set are
    // independent and can be checked separately.
    std::map<int64_t, std::vector<OpRec>> byKey;
    for (const auto& r : ops) byKey[r.key].push_back(r);
    for (auto& [key, group] : byKey) {
      (void)key;
      for (auto& r : group) r.key = 0;
      uint64_t e = 0;
      Searcher s(group, budget);
      CheckStatus st = s.run(&e);
      *explored += e;
      if (st != CheckStatus::Linearizable) return st;
    }
    return CheckStatus::Linearizable;
  }
  Searcher s(std::move(ops), budget);
  return s.run(explored);
}

}  // namespace detail

/// Decides whether a history has a legal sequential ordering that respects
/// real-time precedence. Pending operations are considered both as having
/// taken effect and as never having happened.
inline CheckResult checkLinearizable(const History& h, const CheckOptions& opts = {}) {
  CheckResult out;
  out.status = detail::checkOnce(h, opts.stateBudget, &out.exploredStates);
  if (out.status == CheckStatus::Violation && opts.computeWitness) {
    // Shortest event prefix that is already unlinearizable.
    for (std::size_t len = 1; len <= h.events.size(); ++len) {
      History prefix;
      prefix.events.assign(h.events.begin(), h.events.begin() + static_cast<std::ptrdiff_t>(len));
      uint64_t e = 0;
      if (detail::checkOnce(prefix, opts.stateBudget, &e) == CheckStatus::Violation) {
        out.witnessPrefixLen = len;
        break;
      }
    }
  }
  return out;
}

}  // namespace sizable
