#include <doctest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "sizable/thread_registry.hpp"

using namespace sizable;

TEST_CASE("first registration on a fresh registry gets id 0") {
  ThreadRegistry reg(8);
  CHECK(reg.registerThread() == 0);
  CHECK(reg.currentThreadId() == 0);
  reg.deregisterThread();
}

TEST_CASE("double registration throws") {
  ThreadRegistry reg(8);
  reg.registerThread();
  CHECK_THROWS_AS(reg.registerThread(), AlreadyRegisteredError);
  CHECK_THROWS_WITH(reg.registerThread(), "Thread already registered");
  reg.deregisterThread();
}

TEST_CASE("deregister without register throws") {
  ThreadRegistry reg(8);
  CHECK_THROWS_AS(reg.deregisterThread(), NotRegisteredError);
  CHECK_THROWS_WITH(reg.deregisterThread(), "Thread not registered");
}

TEST_CASE("exhausting capacity throws") {
  ThreadRegistry reg(3);
  std::atomic<bool> release{false};
  std::atomic<int> held{0};
  std::atomic<int> failures{0};
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i) {
    ts.emplace_back([&, i] {
      if (i < 3) {
        reg.registerThread();
        held.fetch_add(1);
        while (!release.load()) std::this_thread::yield();
        reg.deregisterThread();
      } else {
        while (held.load() < 3) std::this_thread::yield();
        try {
          reg.registerThread();
        } catch (const TooManyThreadsError& e) {
          CHECK(std::string(e.what()) == "Too many threads");
          failures.fetch_add(1);
        }
        release.store(true);
      }
    });
  }
  for (auto& t : ts) t.join();
  CHECK(failures.load() == 1);
}

TEST_CASE("default capacity is 128") {
  ThreadRegistry reg;
  CHECK(reg.capacity() == 128);
}

TEST_CASE("released ids are reused smallest-first") {
  ThreadRegistry reg(8);
  reg.registerThread();  // 0
  int id1 = -1;
  std::thread t1([&] {
    id1 = reg.registerThread();
    reg.deregisterThread();
  });
  t1.join();
  CHECK(id1 == 1);
  reg.deregisterThread();  // release 0; pool now {0, 1}
  int idNext = -1;
  std::thread t2([&] {
    idNext = reg.registerThread();
    reg.deregisterThread();
  });
  t2.join();
  CHECK(idNext == 0);
}

TEST_CASE("register/deregister cycles on one thread reuse the same id") {
  ThreadRegistry reg(8);
  for (int i = 0; i < 3; ++i) {
    CHECK(reg.registerThread() == 0);
    reg.deregisterThread();
  }
}

TEST_CASE("maxObservedThreads counts fresh issues only") {
  ThreadRegistry reg(16);
  CHECK(reg.maxObservedThreads() == 0);
  std::vector<std::thread> ts;
  for (int i = 0; i < 5; ++i) {
    ts.emplace_back([&] {
      reg.registerThread();
      reg.deregisterThread();
    });
    ts.back().join();
  }
  // Sequential register/deregister cycles reuse id 0, so only one fresh id
  // was ever issued; issue five concurrently to observe five.
  ThreadRegistry reg2(16);
  std::atomic<bool> release{false};
  std::atomic<int> held{0};
  std::vector<std::thread> ts2;
  for (int i = 0; i < 5; ++i) {
    ts2.emplace_back([&] {
      reg2.registerThread();
      held.fetch_add(1);
      while (!release.load()) std::this_thread::yield();
      reg2.deregisterThread();
    });
  }
  while (held.load() < 5) std::this_thread::yield();
  CHECK(reg2.maxObservedThreads() == 5);
  release.store(true);
  for (auto& t : ts2) t.join();
  CHECK(reg2.maxObservedThreads() == 5);  // deregistration does not shrink it
}

TEST_CASE("uniqueness and bound under register/deregister churn") {
  ThreadRegistry reg(8);
  constexpr int kThreads = 6;
  constexpr int kIters = 2000;
  std::vector<std::atomic<int>> holders(8);
  for (auto& h : holders) h.store(-1);
  std::atomic<int> maxSeen{-1};
  std::atomic<bool> ok{true};
  std::vector<std::thread> ts;
  for (int t = 0; t < kThreads; ++t) {
    ts.emplace_back([&, t] {
      for (int i = 0; i < kIters; ++i) {
        int id = reg.registerThread();
        if (id < 0 || id >= reg.capacity()) ok.store(false);
        int expect = -1;
        if (!holders[static_cast<std::size_t>(id)].compare_exchange_strong(expect, t)) {
          ok.store(false);  // two simultaneous holders of one id
        }
        int prevMax = maxSeen.load();
        int obs = reg.maxObservedThreads();
        if (obs < prevMax) ok.store(false);  // monotonicity
        maxSeen.store(std::max(prevMax, obs));
        holders[static_cast<std::size_t>(id)].store(-1);
        reg.deregisterThread();
      }
    });
  }
  for (auto& t : ts) t.join();
  CHECK(ok.load());
}
