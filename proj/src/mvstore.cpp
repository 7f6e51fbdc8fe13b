#include "vicc/mvstore.hpp"

#include <algorithm>
#include <stdexcept>

namespace vicc {

bool Item::has_pending_writer(Tid t) const {
  return std::find(writers.begin(), writers.end(), t) != writers.end();
}

std::uint32_t Item::newest_published_seq() const {
  for (std::size_t i = chain.size(); i-- > 0;) {
    if (chain[i].published) return static_cast<std::uint32_t>(i);
  }
  return 0;
}

StatusCache::StatusCache(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

void StatusCache::insert(Tid tid, Entry e) {
  auto [it, fresh] = entries_.try_emplace(tid, e);
  if (!fresh) {
    it->second = e;
    return;
  }
  fifo_.push_back(tid);
  while (fifo_.size() > capacity_) {
    entries_.erase(fifo_.front());
    fifo_.pop_front();
  }
}

void StatusCache::record_commit(Tid tid, CommitStamp stamp) {
  max_start_seen_ = std::max(max_start_seen_, stamp.start);
  insert(tid, Entry{true, stamp});
}

void StatusCache::record_abort(Tid tid) { insert(tid, Entry{false, {}}); }

StatusCache::Lookup StatusCache::lookup(Tid tid) const {
  if (auto it = entries_.find(tid); it != entries_.end()) {
    return {it->second.committed ? State::kCommitted : State::kAborted, it->second.stamp};
  }
  if (tid.seq() <= watermark(tid.session_id())) return {State::kEvicted, {}};
  return {};
}

void StatusCache::advance_watermark(std::uint32_t session, std::uint64_t seq) {
  auto& w = watermarks_[session];
  w = std::max(w, seq);
}

std::uint64_t StatusCache::watermark(std::uint32_t session) const {
  auto it = watermarks_.find(session);
  return it == watermarks_.end() ? 0 : it->second;
}

void lazy_collect(Version& version, StatusCache& cache) {
  std::erase_if(version.visitors, [&](const Visitor& v) {
    const auto r = cache.lookup(v.tid);
    switch (r.state) {
      case StatusCache::State::kUnknown:
        return false;
      case StatusCache::State::kCommitted:
        version.sid = std::max(version.sid, r.stamp.start);
        return true;
      case StatusCache::State::kAborted:
        return true;
      case StatusCache::State::kEvicted:
        cache.count_evicted_lookup();
        version.sid = std::max(version.sid, cache.max_start_seen());
        return true;
    }
    return false;
  });
}

void lazy_collect(Item& item, StatusCache& cache) {
  std::erase_if(item.visited, [&](std::uint32_t seq) {
    auto& v = item.chain[seq];
    lazy_collect(v, cache);
    return v.visitors.empty();
  });
}

std::vector<Visitor> live_visitors(const Item& item) {
  std::vector<Visitor> out;
  for (auto seq : item.visited) {
    for (const auto& v : item.chain[seq].visitors) {
      auto it = std::find_if(out.begin(), out.end(), [&](const Visitor& o) { return o.tid == v.tid; });
      if (it == out.end()) {
        out.push_back(v);
      } else {
        it->lower_at_read = std::max(it->lower_at_read, v.lower_at_read);
      }
    }
  }
  return out;
}

ReadView ReadView::of(const TxnCtx& txn, std::vector<Tid> invisible) {
  ReadView view;
  view.tid = txn.tid;
  view.level = txn.level;
  if (const Bound* b = txn.visibility_bound()) view.bound = *b;
  view.commit_lower = txn.commit_lower;
  view.max_cid_seen = txn.max_cid_seen;
  std::sort(invisible.begin(), invisible.end());
  invisible.erase(std::unique(invisible.begin(), invisible.end()), invisible.end());
  view.invisible = std::move(invisible);
  return view;
}

void ReadView::merge_into(TxnCtx& txn) const {
  if (Bound* b = txn.visibility_bound()) *b = tighten_lower(*b, bound.lower);
  txn.commit_lower = std::max(txn.commit_lower, commit_lower);
  txn.max_cid_seen = std::max(txn.max_cid_seen, max_cid_seen);
}

bool ReadView::excludes(Tid creator) const {
  return std::binary_search(invisible.begin(), invisible.end(), creator);
}

void Store::load(Key key, Value value) {
  auto& it = items_[key];
  it.key = key;
  it.chain.clear();
  it.visited.clear();
  it.writers.clear();
  it.write_lock.reset();
  Version v;
  v.value = value;
  v.creator = kLoaderTid;
  v.published = true;
  it.chain.push_back(std::move(v));
}

Item& Store::item(Key key) {
  auto it = items_.find(key);
  if (it == items_.end()) throw std::out_of_range("unknown key " + std::to_string(key));
  return it->second;
}

const Item& Store::item(Key key) const {
  auto it = items_.find(key);
  if (it == items_.end()) throw std::out_of_range("unknown key " + std::to_string(key));
  return it->second;
}

ReadResult Store::read_visible(ReadView& view, Key key) {
  Item& it = item(key);
  ReadResult res;
  const bool timed = view.level == Level::kPostSI || view.level == Level::kSV;
  for (std::size_t i = it.chain.size(); i-- > 0;) {
    Version& v = it.chain[i];
    if (!v.published) {
      res.pending_skipped.push_back(v.creator);
      continue;
    }
    if (view.excludes(v.creator)) continue;
    if (timed && v.cid > view.bound.upper) continue;

    const auto seq = static_cast<std::uint32_t>(i);
    if (timed) {
      view.bound = tighten_lower(view.bound, v.cid);
      if (view.level == Level::kPostSI) view.commit_lower = std::max(view.commit_lower, v.cid);
      view.max_cid_seen = std::max(view.max_cid_seen, v.cid);
    }
    auto vis = std::find_if(v.visitors.begin(), v.visitors.end(),
                            [&](const Visitor& x) { return x.tid == view.tid; });
    if (vis == v.visitors.end()) {
      v.visitors.push_back({view.tid, view.bound.lower});
      auto pos = std::lower_bound(it.visited.begin(), it.visited.end(), seq);
      if (pos == it.visited.end() || *pos != seq) it.visited.insert(pos, seq);
    } else {
      vis->lower_at_read = std::max(vis->lower_at_read, view.bound.lower);
    }
    res.version_seq = seq;
    res.value = v.value;
    res.creator = v.creator;
    res.cid = v.cid;
    res.status = check_bound(view.bound) == BoundCheck::kMustAbort ? ReadStatus::kMustAbort
                                                                   : ReadStatus::kOk;
    return res;
  }
  res.status = ReadStatus::kNoVisibleVersion;
  return res;
}

LockResult Store::acquire_write_lock(Tid tid, Key key, const WriteCheck& check) {
  Item& it = item(key);
  if (it.write_lock && *it.write_lock != tid) return {LockStatus::kBusy, it.write_lock};
  it.write_lock = tid;
  const auto newest = static_cast<std::uint32_t>(it.chain.size() - 1);
  const bool stale_read = check.read_seq && *check.read_seq != newest;
  const bool blind = std::find(check.invisible.begin(), check.invisible.end(), it.newest().creator) !=
                     check.invisible.end();
  if (stale_read || blind) {
    it.write_lock.reset();
    return {LockStatus::kConflict, std::nullopt};
  }
  return {LockStatus::kAcquired, tid};
}

void Store::install_version(Tid tid, Key key, Value value, Timestamp creator_start) {
  Item& it = item(key);
  if (it.write_lock != tid) throw std::logic_error("install_version without the write lock");
  Version v;
  v.value = value;
  v.creator = tid;
  v.creator_start = creator_start;
  it.chain.push_back(std::move(v));
  if (!it.has_pending_writer(tid)) it.writers.push_back(tid);
}

void Store::publish_commit(Tid tid, CommitStamp stamp, std::span<const Key> keys_written) {
  for (Key k : keys_written) {
    Item& it = item(k);
    for (std::size_t i = it.chain.size(); i-- > 0;) {
      Version& v = it.chain[i];
      if (v.creator == tid && !v.published) {
        v.cid = stamp.commit;
        v.published = true;
        break;
      }
    }
    std::erase(it.writers, tid);
    if (it.write_lock == tid) it.write_lock.reset();
  }
  status_.record_commit(tid, stamp);
}

void Store::rollback(Tid tid, std::span<const Key> keys) {
  for (Key k : keys) {
    auto found = items_.find(k);
    if (found == items_.end()) continue;
    Item& it = found->second;
    if (it.write_lock != tid) continue;
    if (!it.newest().published && it.newest().creator == tid) {
      const auto seq = static_cast<std::uint32_t>(it.chain.size() - 1);
      std::erase(it.visited, seq);
      it.chain.pop_back();
    }
    std::erase(it.writers, tid);
    it.write_lock.reset();
  }
  status_.record_abort(tid);
}

Value Store::total_published() const {
  Value total = 0;
  for (const auto& [k, it] : items_) total += it.chain[it.newest_published_seq()].value;
  return total;
}

}  // namespace vicc
