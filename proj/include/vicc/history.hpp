#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vicc/core.hpp"

namespace vicc {

/// One observed event. Reads and installs name a version by its position in
/// the item's chain (0 is the loaded initial version). Commit events carry
/// the scheduler's stamp when it has one.
struct HistoryEvent {
  enum class Kind { kRead, kWrite, kCommit, kAbort };

  Kind kind = Kind::kRead;
  Tid tid;
  Key key = 0;
  std::uint32_t version_seq = 0;
  NodeId node = 0;
  std::uint64_t time = 0;
  std::optional<CommitStamp> stamp;

  friend bool operator==(const HistoryEvent&, const HistoryEvent&) = default;
};

struct MalformedHistory : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// `R|W tid key version_seq node time`, `C tid s c node time` (dashes when
/// there is no stamp), `A tid - - node time`.
std::string format_event(const HistoryEvent& e);
HistoryEvent parse_event(const std::string& line);

void write_history(std::ostream& os, const std::vector<HistoryEvent>& events);
std::vector<HistoryEvent> read_history(std::istream& is);
std::vector<HistoryEvent> read_history_file(const std::string& path);

/// Append-only, thread-safe event log. Logical time is the append position.
class HistorySink {
 public:
  void read(Tid tid, Key key, std::uint32_t seq, NodeId node);
  void write(Tid tid, Key key, std::uint32_t seq, NodeId node);
  void commit(Tid tid, std::optional<CommitStamp> stamp, NodeId node);
  void abort(Tid tid, NodeId node);

  std::vector<HistoryEvent> events() const;
  std::size_t size() const;

 private:
  void append(HistoryEvent e);

  mutable std::mutex mu_;
  std::vector<HistoryEvent> events_;
};

}  // namespace vicc
