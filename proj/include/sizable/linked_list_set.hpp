#pragma once

#include <atomic>
#include <cassert>
#include <cstdint>
#include <limits>

#include "sizable/common.hpp"
#include "sizable/epoch_reclaimer.hpp"
#include "sizable/schedule_hooks.hpp"
#include "sizable/snapshot_size_calculator.hpp"

namespace sizable {

/// Sorted lock-free linked list set.
///
/// Deletion commits on the node's deleteInfo word: the plain path installs a
/// sentinel, the slow path installs a real UpdateInfo. Using one word for
/// both marks keeps racing plain/slow deletes of the same node to a single
/// winner. A node is deleted as soon as deleteInfo is non-null; the mark bit
/// on its next pointer is set immediately afterwards (by the winner or any
/// helper) to freeze the node before unlinking, as in Michael's scheme.
///
/// Plain operations never touch size metadata. Slow operations run the
/// metadata-cooperating protocol: they install UpdateInfo records, apply
/// counter updates through the calculator, and help the operations their
/// results depend on before returning.
class LinkedListSet {
 public:
  LinkedListSet(ThreadRegistry& reg, EpochReclaimer& rec)
      : reg_(reg), rec_(rec), head_(new Node(std::numeric_limits<int64_t>::min())) {}

  ~LinkedListSet() {
    Node* n = head_;
    while (n != nullptr) {
      Node* next = ptrOf(n->next.load(std::memory_order_relaxed));
      delete n;
      n = next;
    }
  }

  LinkedListSet(const LinkedListSet&) = delete;
  LinkedListSet& operator=(const LinkedListSet&) = delete;

  // ---- plain path (no size metadata) ----

  bool plainInsert(int64_t key) { return insertImpl(key, nullptr, nullptr); }

  bool plainErase(int64_t key) { return eraseImpl<false>(key, nullptr); }

  bool plainContains(int64_t key) const {
    const Node* n = findReadOnly(key);
    return n != nullptr && !isDeleted(n);
  }

  /// True iff an undeleted node with this key is currently linked. Used by
  /// the transformations that search first and return early on failure.
  bool searchPresent(int64_t key) const { return plainContains(key); }

  // ---- slow path (metadata-cooperating) ----

  bool slowInsert(int64_t key, SnapshotSizeCalculator& calc) {
    UpdateInfo* info = calc.createUpdateInfo(OpKind::Insert);
    bool ok = insertImpl(key, info, &calc);
    if (!ok) delete info;
    return ok;
  }

  bool slowErase(int64_t key, SnapshotSizeCalculator& calc) { return eraseImpl<true>(key, &calc); }

  bool slowContains(int64_t key, SnapshotSizeCalculator& calc) {
    const Node* n = findReadOnly(key);
    if (n == nullptr) return false;
    // The result depends on this node's pending updates; apply them before
    // returning so the answer is linearized after them. The next pointer is
    // read before deleteInfo: a mark is only ever set after a deleteInfo
    // commit, so a marked node always shows its deleteInfo here.
    calc.help(n->insertInfo);
    uint64_t next = n->next.load(std::memory_order_seq_cst);
    const UpdateInfo* di = n->deleteInfo.load(std::memory_order_seq_cst);
    if (di != nullptr) {
      calc.help(di);
      return false;
    }
    return !isMarked(next);
  }

  /// Quiescent-only element count; the oracle for exactness tests.
  int64_t quiescentCount() const {
    int64_t n = 0;
    for (Node* cur = ptrOf(head_->next.load(std::memory_order_seq_cst)); cur != nullptr;
         cur = ptrOf(cur->next.load(std::memory_order_seq_cst))) {
      if (!isDeleted(cur)) ++n;
    }
    return n;
  }

 private:
  struct Node {
    explicit Node(int64_t k, uint64_t nextTagged = 0, const UpdateInfo* ins = nullptr)
        : key(k), next(nextTagged), insertInfo(ins) {}

    ~Node() {
      delete insertInfo;
      const UpdateInfo* di = deleteInfo.load(std::memory_order_relaxed);
      if (isRealInfo(di)) delete di;
    }

    const int64_t key;
    std::atomic<uint64_t> next;  // successor pointer | mark bit
    std::atomic<const UpdateInfo*> deleteInfo{nullptr};
    const UpdateInfo* insertInfo;
  };

  static constexpr uint64_t kMark = 1;

  static Node* ptrOf(uint64_t tagged) { return reinterpret_cast<Node*>(tagged & ~kMark); }
  static bool isMarked(uint64_t tagged) { return (tagged & kMark) != 0; }
  static uint64_t tag(Node* p, bool marked) {
    return reinterpret_cast<uint64_t>(p) | (marked ? kMark : 0);
  }

  static bool isDeleted(const Node* n) {
    return n->deleteInfo.load(std::memory_order_seq_cst) != nullptr ||
           isMarked(n->next.load(std::memory_order_seq_cst));
  }

  /// Sets the mark bit on n->next, freezing the successor link.
  static void markNext(Node* n) {
    uint64_t cur = n->next.load(std::memory_order_seq_cst);
    while (!isMarked(cur)) {
      if (n->next.compare_exchange_weak(cur, cur | kMark, std::memory_order_seq_cst)) return;
    }
  }

  /// Locates the window (pred, curr) with curr the first node of key >= key,
  /// unlinking deleted nodes on the way. When `calc` is given (slow mode),
  /// pending metadata of nodes is applied before they are unlinked; plain
  /// mode unlinks without helping.
  struct Window {
    Node* pred;
    Node* curr;
  };

  Window find(int64_t key, SnapshotSizeCalculator* calc) {
  restart:
    Node* pred = head_;
    Node* curr = ptrOf(pred->next.load(std::memory_order_seq_cst));
    while (curr != nullptr) {
      uint64_t currNext = curr->next.load(std::memory_order_seq_cst);
      const UpdateInfo* di = curr->deleteInfo.load(std::memory_order_seq_cst);
      if (di != nullptr || isMarked(currNext)) {
        if (calc != nullptr) {
          calc->help(curr->insertInfo);
          calc->help(di);
        }
        markNext(curr);
        uint64_t frozen = curr->next.load(std::memory_order_seq_cst);
        Node* succ = ptrOf(frozen);
        uint64_t expect = tag(curr, false);
        if (!pred->next.compare_exchange_strong(expect, tag(succ, false),
                                                std::memory_order_seq_cst)) {
          goto restart;
        }
        rec_.retire(reg_.currentThreadId(), curr);
        curr = succ;
        continue;
      }
      if (curr->key >= key) break;
      pred = curr;
      curr = ptrOf(currNext);
    }
    return Window{pred, curr};
  }

  /// Read-only traversal to the first node of key >= key; skips nodes
  /// without unlinking. Returns the node if its key matches, else null.
  const Node* findReadOnly(int64_t key) const {
    Node* curr = ptrOf(head_->next.load(std::memory_order_seq_cst));
    while (curr != nullptr && curr->key < key) {
      curr = ptrOf(curr->next.load(std::memory_order_seq_cst));
    }
    return (curr != nullptr && curr->key == key) ? curr : nullptr;
  }

  bool insertImpl(int64_t key, UpdateInfo* info, SnapshotSizeCalculator* calc) {
    assert(key > std::numeric_limits<int64_t>::min());
    for (;;) {
      Window w = find(key, calc);
      if (w.curr != nullptr && w.curr->key == key) {
        if (calc != nullptr) calc->help(w.curr->insertInfo);
        return false;
      }
      Node* node = new Node(key, tag(w.curr, false), info);
      uint64_t expect = tag(w.curr, false);
      SIZABLE_HOOK("list:pre_insert_commit");
      if (w.pred->next.compare_exchange_strong(expect, tag(node, false),
                                               std::memory_order_seq_cst)) {
        if (calc != nullptr) {
          SIZABLE_HOOK("slow:pre_metadata");
          calc->updateMetadata(*info);
        }
        return true;
      }
      node->insertInfo = nullptr;  // caller still owns info on retry
      delete node;
    }
  }

  template <bool Slow>
  bool eraseImpl(int64_t key, SnapshotSizeCalculator* calc) {
    for (;;) {
      Window w = find(key, calc);
      if (w.curr == nullptr || w.curr->key != key) return false;
      Node* victim = w.curr;
      if constexpr (Slow) {
        // The delete depends on the victim being present: make sure its
        // insert is linearized before committing.
        calc->help(victim->insertInfo);
        UpdateInfo* info = calc->createUpdateInfo(OpKind::Delete);
        const UpdateInfo* expect = nullptr;
        SIZABLE_HOOK("list:pre_erase_commit");
        if (victim->deleteInfo.compare_exchange_strong(expect, info, std::memory_order_seq_cst)) {
          SIZABLE_HOOK("slow:pre_metadata");
          calc->updateMetadata(*info);
          markNext(victim);
          tryUnlink(w.pred, victim);
          return true;
        }
        delete info;
        calc->help(expect);
        return false;
      } else {
        const UpdateInfo* expect = nullptr;
        SIZABLE_HOOK("list:pre_erase_commit");
        if (victim->deleteInfo.compare_exchange_strong(expect, kPlainDeleted,
                                                       std::memory_order_seq_cst)) {
          markNext(victim);
          tryUnlink(w.pred, victim);
          return true;
        }
        return false;
      }
    }
  }

  void tryUnlink(Node* pred, Node* victim) {
    uint64_t frozen = victim->next.load(std::memory_order_seq_cst);
    uint64_t expect = tag(victim, false);
    if (pred->next.compare_exchange_strong(expect, tag(ptrOf(frozen), false),
                                           std::memory_order_seq_cst)) {
      rec_.retire(reg_.currentThreadId(), victim);
    }
  }

  ThreadRegistry& reg_;
  EpochReclaimer& rec_;
  Node* const head_;
};

}  // namespace sizable
