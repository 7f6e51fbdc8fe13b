#include "vicc/baselines.hpp"

#include <algorithm>

namespace vicc {

CentralBegin Coordinator::begin(Tid tid) {
  ++requests_;
  CentralBegin out;
  out.start_ts = ++clock_;
  out.snapshot.assign(active_.begin(), active_.end());
  active_.insert(tid);
  return out;
}

Timestamp Coordinator::end(Tid tid) {
  ++requests_;
  active_.erase(tid);
  return ++clock_;
}

namespace {
ReadResult found(const Version& v, std::size_t seq, std::vector<Tid> skipped) {
  ReadResult r;
  r.version_seq = static_cast<std::uint32_t>(seq);
  r.value = v.value;
  r.creator = v.creator;
  r.cid = v.cid;
  r.pending_skipped = std::move(skipped);
  return r;
}
}  // namespace

ReadResult central_read(const Store& store, const CentralView& view, Key key) {
  const Item& it = store.item(key);
  std::vector<Tid> skipped;
  for (std::size_t i = it.chain.size(); i-- > 0;) {
    const Version& v = it.chain[i];
    if (!v.published) {
      const bool concurrent = std::binary_search(view.snapshot.begin(), view.snapshot.end(), v.creator) ||
                              v.creator_start > view.start_ts;
      if (!concurrent) {
        ReadResult r;
        r.status = ReadStatus::kWait;
        return r;
      }
      skipped.push_back(v.creator);
      continue;
    }
    if (v.cid < view.start_ts) return found(v, i, std::move(skipped));
  }
  ReadResult r;
  r.status = ReadStatus::kNoVisibleVersion;
  return r;
}

ReadResult optimal_read(const Store& store, Key key) {
  const Item& it = store.item(key);
  std::vector<Tid> skipped;
  for (std::size_t i = it.chain.size(); i-- > 0;) {
    if (it.chain[i].published) return found(it.chain[i], i, std::move(skipped));
    skipped.push_back(it.chain[i].creator);
  }
  ReadResult r;
  r.status = ReadStatus::kNoVisibleVersion;
  return r;
}

}  // namespace vicc
