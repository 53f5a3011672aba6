#pragma once

#include <string_view>

// Yield-point instrumentation for deterministic schedule tests. Test builds
// define SIZABLE_SCHEDULE_HOOKS; production builds compile the hooks away.

namespace sizable::sched {

class HookSink {
 public:
  virtual ~HookSink() = default;
  virtual void onHook(std::string_view label) = 0;

  /// Entering/leaving a protocol-level blocking wait (a spin on other
  /// threads' progress). Lets a schedule controller distinguish a thread
  /// that cannot advance from one that merely has not been scheduled.
  virtual void onWaitStateChange(bool /*waiting*/) {}
};

inline HookSink*& tlsSink() {
  thread_local HookSink* sink = nullptr;
  return sink;
}

inline void bindSink(HookSink* s) { tlsSink() = s; }

inline void hit(std::string_view label) {
  if (HookSink* s = tlsSink()) s->onHook(label);
}

/// Binds the calling thread to a sink for the current scope.
class SinkBinding {
 public:
  explicit SinkBinding(HookSink* s) : prev_(tlsSink()) { bindSink(s); }
  ~SinkBinding() { bindSink(prev_); }
  SinkBinding(const SinkBinding&) = delete;
  SinkBinding& operator=(const SinkBinding&) = delete;

 private:
  HookSink* prev_;
};

/// Marks the enclosing scope as a protocol-level blocking wait.
class WaitScope {
 public:
  WaitScope() : sink_(tlsSink()) {
    if (sink_ != nullptr) sink_->onWaitStateChange(true);
  }
  ~WaitScope() {
    if (sink_ != nullptr) sink_->onWaitStateChange(false);
  }
  WaitScope(const WaitScope&) = delete;
  WaitScope& operator=(const WaitScope&) = delete;

 private:
  HookSink* sink_;
};

}  // namespace sizable::sched

#if defined(SIZABLE_SCHEDULE_HOOKS)
#define SIZABLE_HOOK(label) ::sizable::sched::hit(label)
#define SIZABLE_WAIT_SCOPE ::sizable::sched::WaitScope sizableWaitScope_
#else
#define SIZABLE_HOOK(label) ((void)0)
#define SIZABLE_WAIT_SCOPE ((void)0)
#endif
