#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sizable/schedule_hooks.hpp"

namespace sizable {

class UnknownLabelError : public std::runtime_error {
 public:
  explicit UnknownLabelError(const std::string& label)
      : std::runtime_error("unknown yield-point label: " + label) {}
};

class ScheduleDeadlockError : public std::runtime_error {
 public:
  explicit ScheduleDeadlockError(const std::string& what) : std::runtime_error(what) {}
};

/// Every yield-point label compiled into the library. Scripts are validated
/// against this list.
inline const std::set<std::string>& allScheduleLabels() {
  static const std::set<std::string> labels = {
      "list:pre_insert_commit", "list:pre_erase_commit", "slow:pre_metadata",
      "snap:collect_enter",     "snap:pre_forward",      "snap:update_done",
      "snap:update_enter",      "snap:pre_uncollect",    "snap:published",
      "hs_op:entered",          "hs_op:pre_exec",        "hs_size:install",
      "hs_size:first_inc",      "hs_size:second_inc",    "hs_size:joined",
      "hs_size:pre_collect",    "hs_size:pre_uncollect", "hs_size:published",
      "hs_size:pre_advance",    "hs_size:computed",      "hs_size:waiting",
      "opt:post_first_read",
      "opt:post_sum",           "opt:escalated",         "opt:help_attempt",
      "opt:mid_update",         "lock:summing",          "lock:pre_install",
      "lock:pre_publish",       "lock:published",        "lock:in_critical",
      "harness:invoke",         "harness:respond",
  };
  return labels;
}

struct ScheduleStep {
  int thread;
  std::string label;
};

/// Drives threads through an exact order of yield points.
///
/// A thread reaching a hook whose label appears among its remaining scripted
/// steps blocks until that step is at the front of the script; hooks a
/// thread is never scripted for pass through. If the front step's thread is
/// stuck in a protocol-level wait (not at a hook), the script cannot make
/// progress; the controller then drains: remaining steps are voided and all
/// blocked threads run to completion. A front step owned by a finished
/// thread is a scripting error and reported as a deadlock.
class ScheduleController : public sched::HookSink {
 public:
  explicit ScheduleController(std::vector<ScheduleStep> steps,
                              std::chrono::milliseconds stallTimeout = std::chrono::milliseconds(600))
      : steps_(std::move(steps)), stallTimeout_(stallTimeout) {
    for (const auto& s : steps_) {
      if (allScheduleLabels().count(s.label) == 0) throw UnknownLabelError(s.label);
    }
    lastProgress_ = Clock::now();
  }

  // Waits are polled rather than built on a condition variable: the
  // controller exists to drive sanitizer-friendly protocol tests, and
  // polling keeps its own synchronization trivially clean for them.
  void onHook(std::string_view label) override {
    const int thread = tlsThread();
    for (;;) {
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (draining_ || failed_ || !scriptedFor(thread, label)) {
          blockedAt_.erase(thread);
          return;
        }
        if (isFront(thread, label)) {
          blockedAt_.erase(thread);
          ++next_;
          lastProgress_ = Clock::now();
          return;
        }
        blockedAt_[thread] = std::string(label);
        classifyStall();
      }
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  }

  void onWaitStateChange(bool waiting) override {
    const int thread = tlsThread();
    std::lock_guard<std::mutex> lk(mu_);
    if (waiting) protocolWaiting_.insert(thread);
    else protocolWaiting_.erase(thread);
  }

  void threadFinished(int thread) {
    std::lock_guard<std::mutex> lk(mu_);
    finished_.insert(thread);
  }

  bool drained() const {
    std::lock_guard<std::mutex> lk(mu_);
    return draining_;
  }

  /// Runner-side stall check while joining workers; covers scripts whose
  /// front thread spins without any hooked waiter to notice.
  void pollStall() {
    std::lock_guard<std::mutex> lk(mu_);
    classifyStall();
  }

  /// After all workers joined: a failed or unconsumed script is an error.
  void verifyComplete() const {
    std::lock_guard<std::mutex> lk(mu_);
    if (failed_) throw ScheduleDeadlockError(failureWhat_);
    if (!draining_ && next_ < steps_.size()) {
      throw ScheduleDeadlockError("schedule deadlock: step for thread " +
                                  std::to_string(steps_[next_].thread) + " at '" +
                                  steps_[next_].label + "' was never reached");
    }
  }

  /// Called on the worker thread before it starts running its script role.
  static void bindThread(int index) { tlsThread() = index; }

 private:
  using Clock = std::chrono::steady_clock;

  static int& tlsThread() {
    thread_local int idx = -1;
    return idx;
  }

  bool scriptedFor(int thread, std::string_view label) const {
    for (std::size_t i = next_; i < steps_.size(); ++i) {
      if (steps_[i].thread == thread && steps_[i].label == label) return true;
    }
    return false;
  }

  bool isFront(int thread, std::string_view label) const {
    return next_ < steps_.size() && steps_[next_].thread == thread &&
           steps_[next_].label == label;
  }

  void classifyStall() {
    if (draining_ || failed_) return;
    if (Clock::now() - lastProgress_ < stallTimeout_) return;
    if (next_ >= steps_.size()) return;
    const ScheduleStep& front = steps_[next_];
    if (finished_.count(front.thread) != 0) {
      failed_ = true;
      failureWhat_ = "schedule deadlock: thread " + std::to_string(front.thread) +
                     " finished before reaching label '" + front.label + "'";
    } else if (blockedAt_.count(front.thread) != 0 && blockedAt_.at(front.thread) != front.label) {
      failed_ = true;
      failureWhat_ = "schedule deadlock: thread " + std::to_string(front.thread) +
                     " is blocked at '" + blockedAt_.at(front.thread) + "' but scripted for '" +
                     front.label + "'";
    } else if (protocolWaiting_.count(front.thread) != 0) {
      // The front thread is provably stuck in a protocol-level blocking
      // wait the script cannot cut through; the remaining steps are
      // unreachable by construction. Void them and let the run complete
      // naturally. A thread that is merely slow is never drained on.
      draining_ = true;
    }
  }

  std::vector<ScheduleStep> steps_;
  const std::chrono::milliseconds stallTimeout_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
  bool draining_ = false;
  bool failed_ = false;
  std::string failureWhat_;
  std::map<int, std::string> blockedAt_;
  std::set<int> finished_;
  std::set<int> protocolWaiting_;
  Clock::time_point lastProgress_;
};

}  // namespace sizable
