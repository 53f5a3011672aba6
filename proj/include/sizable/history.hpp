#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sizable {

enum class EventKind { Invoke, Respond };
enum class HistoryOp { Insert, Delete, Contains, Size };

inline const char* eventKindName(EventKind k) { return k == EventKind::Invoke ? "INVOKE" : "RESPOND"; }

inline const char* historyOpName(HistoryOp op) {
  switch (op) {
    case HistoryOp::Insert: return "INSERT";
    case HistoryOp::Delete: return "DELETE";
    case HistoryOp::Contains: return "CONTAINS";
    case HistoryOp::Size: return "SIZE";
  }
  return "?";
}

/// One invocation or response in a recorded concurrent run.
struct Event {
  uint64_t seq = 0;
  int threadId = 0;
  EventKind kind = EventKind::Invoke;
  HistoryOp op = HistoryOp::Insert;
  int64_t key = 0;        // unused for SIZE
  int64_t result = 0;     // RESPOND only: 0/1 for booleans, count for SIZE
  bool hasResult = false;
};

/// A timestamped record of a concurrent run. Per thread, INVOKE and RESPOND
/// strictly alternate; a trailing unmatched INVOKE leaves that operation
/// pending, and the checker must consider both completions.
struct History {
  std::vector<Event> events;

  bool complete() const {
    std::set<int> pending;
    for (const auto& e : events) {
      if (e.kind == EventKind::Invoke) pending.insert(e.threadId);
      else pending.erase(e.threadId);
    }
    return pending.empty();
  }
};

/// The sequential specification the checker linearizes against.
class SequentialSetSpec {
 public:
  int64_t apply(HistoryOp op, int64_t key) {
    switch (op) {
      case HistoryOp::Insert: return contents_.insert(key).second ? 1 : 0;
      case HistoryOp::Delete: return contents_.erase(key) > 0 ? 1 : 0;
      case HistoryOp::Contains: return contents_.count(key) > 0 ? 1 : 0;
      case HistoryOp::Size: return static_cast<int64_t>(contents_.size());
    }
    return 0;
  }

 private:
  std::set<int64_t> contents_;
};

// One event per line, tab-separated: seq threadId kind op key result.
// SIZE events carry "-" in the key column; INVOKE events carry "-" in the
// result column.

inline void writeHistory(std::ostream& os, const History& h) {
  for (const auto& e : h.events) {
    os << e.seq << '\t' << e.threadId << '\t' << eventKindName(e.kind) << '\t' << historyOpName(e.op)
       << '\t';
    if (e.op == HistoryOp::Size) os << '-';
    else os << e.key;
    os << '\t';
    if (e.hasResult) os << e.result;
    else os << '-';
    os << '\n';
  }
}

inline std::string toText(const History& h) {
  std::ostringstream os;
  writeHistory(os, h);
  return os.str();
}

inline History parseHistory(std::istream& is) {
  History h;
  std::string line;
  int lineNo = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Event e;
    std::string kind, op, key, result;
    if (!(ls >> e.seq >> e.threadId >> kind >> op >> key >> result)) {
      throw std::runtime_error("bad history line " + std::to_string(lineNo) + ": " + line);
    }
    if (kind == "INVOKE") e.kind = EventKind::Invoke;
    else if (kind == "RESPOND") e.kind = EventKind::Respond;
    else throw std::runtime_error("bad event kind: " + kind);
    if (op == "INSERT") e.op = HistoryOp::Insert;
    else if (op == "DELETE") e.op = HistoryOp::Delete;
    else if (op == "CONTAINS") e.op = HistoryOp::Contains;
    else if (op == "SIZE") e.op = HistoryOp::Size;
    else throw std::runtime_error("bad op: " + op);
    if (key != "-") e.key = std::stoll(key);
    if (result != "-") {
      e.result = std::stoll(result);
      e.hasResult = true;
    }
    h.events.push_back(e);
  }
  return h;
}

inline History parseHistoryText(const std::string& text) {
  std::istringstream is(text);
  return parseHistory(is);
}

}  // namespace sizable
