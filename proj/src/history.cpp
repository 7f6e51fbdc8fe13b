#include "vicc/history.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace vicc {

std::string format_event(const HistoryEvent& e) {
  std::ostringstream os;
  switch (e.kind) {
    case HistoryEvent::Kind::kRead:
    case HistoryEvent::Kind::kWrite:
      os << (e.kind == HistoryEvent::Kind::kRead ? 'R' : 'W') << ' ' << e.tid << ' ' << e.key << ' '
         << e.version_seq;
      break;
    case HistoryEvent::Kind::kCommit:
      os << "C " << e.tid << ' ';
      if (e.stamp) {
        os << e.stamp->start << ' ' << e.stamp->commit;
      } else {
        os << "- -";
      }
      break;
    case HistoryEvent::Kind::kAbort:
      os << "A " << e.tid << " - -";
      break;
  }
  os << ' ' << e.node << ' ' << e.time;
  return os.str();
}

namespace {
template <typename T>
T field(std::istringstream& is, const std::string& line) {
  T v{};
  if (!(is >> v)) throw MalformedHistory("bad history line: " + line);
  return v;
}
}  // namespace

HistoryEvent parse_event(const std::string& line) {
  std::istringstream is(line);
  HistoryEvent e;
  const auto kind = field<std::string>(is, line);
  const auto tid = Tid::parse(field<std::string>(is, line));
  if (!tid) throw MalformedHistory("bad tid: " + line);
  e.tid = *tid;
  if (kind == "R" || kind == "W") {
    e.kind = kind == "R" ? HistoryEvent::Kind::kRead : HistoryEvent::Kind::kWrite;
    e.key = field<Key>(is, line);
    e.version_seq = field<std::uint32_t>(is, line);
  } else if (kind == "C" || kind == "A") {
    e.kind = kind == "C" ? HistoryEvent::Kind::kCommit : HistoryEvent::Kind::kAbort;
    const auto a = field<std::string>(is, line);
    const auto b = field<std::string>(is, line);
    if (a != "-" || b != "-") {
      if (e.kind == HistoryEvent::Kind::kAbort) throw MalformedHistory("abort with stamp: " + line);
      try {
        e.stamp = CommitStamp::interval(std::stoull(a), std::stoull(b));
      } catch (const std::exception&) {
        throw MalformedHistory("bad stamp: " + line);
      }
    }
  } else {
    throw MalformedHistory("unknown event kind: " + line);
  }
  e.node = field<NodeId>(is, line);
  e.time = field<std::uint64_t>(is, line);
  std::string rest;
  if (is >> rest) throw MalformedHistory("trailing fields: " + line);
  return e;
}

void write_history(std::ostream& os, const std::vector<HistoryEvent>& events) {
  for (const auto& e : events) os << format_event(e) << '\n';
}

std::vector<HistoryEvent> read_history(std::istream& is) {
  std::vector<HistoryEvent> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_event(line));
  }
  return out;
}

std::vector<HistoryEvent> read_history_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_history(in);
}

void HistorySink::append(HistoryEvent e) {
  std::lock_guard lk(mu_);
  e.time = events_.size();
  events_.push_back(e);
}

void HistorySink::read(Tid tid, Key key, std::uint32_t seq, NodeId node) {
  append({HistoryEvent::Kind::kRead, tid, key, seq, node, 0, std::nullopt});
}

void HistorySink::write(Tid tid, Key key, std::uint32_t seq, NodeId node) {
  append({HistoryEvent::Kind::kWrite, tid, key, seq, node, 0, std::nullopt});
}

void HistorySink::commit(Tid tid, std::optional<CommitStamp> stamp, NodeId node) {
  append({HistoryEvent::Kind::kCommit, tid, 0, 0, node, 0, stamp});
}

void HistorySink::abort(Tid tid, NodeId node) {
  append({HistoryEvent::Kind::kAbort, tid, 0, 0, node, 0, std::nullopt});
}

std::vector<HistoryEvent> HistorySink::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::size_t HistorySink::size() const {
  std::lock_guard lk(mu_);
  return events_.size();
}

}  // namespace vicc
