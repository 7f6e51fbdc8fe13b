#pragma once

#include <cstddef>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vicc/core.hpp"

namespace vicc {

/// reader --rw--> writer: the writer overwrote something the reader read, so
/// the writer must stay invisible to the reader.
struct AntiDepEntry {
  Tid reader;
  Tid writer;

  friend bool operator==(const AntiDepEntry&, const AntiDepEntry&) = default;
};

/// One node's replica of the anti-dependency table. Entries are placed on the
/// hosts of both endpoints; each host purges entries of its own transactions
/// once they terminate.
class AntiDepTable {
 public:
  /// Idempotent. Returns false if the entry was already present.
  bool record(Tid reader, Tid writer);
  bool contains(Tid reader, Tid writer) const;

  /// Drops every entry with `t` on either side. Unknown Tids are a no-op.
  void purge(Tid t);

  /// Writers `reader` must not see, sorted.
  std::vector<Tid> writers_of(Tid reader) const;
  /// Readers that anti-depend on `writer`, sorted.
  std::vector<Tid> readers_of(Tid writer) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<AntiDepEntry> entries() const;

 private:
  struct EntryHash {
    std::size_t operator()(const AntiDepEntry& e) const noexcept {
      return std::hash<Tid>{}(e.reader) * 0x9e3779b97f4a7c15ULL ^ std::hash<Tid>{}(e.writer);
    }
  };

  std::unordered_set<AntiDepEntry, EntryHash> entries_;
  std::unordered_map<Tid, std::unordered_set<Tid>> by_reader_;
  std::unordered_map<Tid, std::unordered_set<Tid>> by_writer_;
};

}  // namespace vicc
