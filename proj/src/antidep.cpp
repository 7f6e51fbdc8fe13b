#include "vicc/antidep.hpp"

#include <algorithm>

namespace vicc {

bool AntiDepTable::record(Tid reader, Tid writer) {
  if (!entries_.insert({reader, writer}).second) return false;
  by_reader_[reader].insert(writer);
  by_writer_[writer].insert(reader);
  return true;
}

bool AntiDepTable::contains(Tid reader, Tid writer) const {
  return entries_.contains({reader, writer});
}

void AntiDepTable::purge(Tid t) {
  if (auto it = by_reader_.find(t); it != by_reader_.end()) {
    for (Tid w : it->second) {
      entries_.erase({t, w});
      if (auto back = by_writer_.find(w); back != by_writer_.end()) {
        back->second.erase(t);
        if (back->second.empty()) by_writer_.erase(back);
      }
    }
    by_reader_.erase(it);
  }
  if (auto it = by_writer_.find(t); it != by_writer_.end()) {
    for (Tid r : it->second) {
      entries_.erase({r, t});
      if (auto back = by_reader_.find(r); back != by_reader_.end()) {
        back->second.erase(t);
        if (back->second.empty()) by_reader_.erase(back);
      }
    }
    by_writer_.erase(it);
  }
}

namespace {
std::vector<Tid> sorted(const std::unordered_map<Tid, std::unordered_set<Tid>>& index, Tid key) {
  std::vector<Tid> out;
  if (auto it = index.find(key); it != index.end()) out.assign(it->second.begin(), it->second.end());
  std::sort(out.begin(), out.end());
  return out;
}
}  // namespace

std::vector<Tid> AntiDepTable::writers_of(Tid reader) const { return sorted(by_reader_, reader); }
std::vector<Tid> AntiDepTable::readers_of(Tid writer) const { return sorted(by_writer_, writer); }

std::vector<AntiDepEntry> AntiDepTable::entries() const {
  std::vector<AntiDepEntry> out(entries_.begin(), entries_.end());
  std::sort(out.begin(), out.end(), [](const AntiDepEntry& a, const AntiDepEntry& b) {
    return a.reader != b.reader ? a.reader < b.reader : a.writer < b.writer;
  });
  return out;
}

}  // namespace vicc
