#include "vicc/schedulers.hpp"

#include <algorithm>

namespace vicc {

TxnCtx begin(Level level, NodeId host, Tid tid) {
  TxnCtx txn;
  txn.tid = tid;
  txn.level = level;
  txn.host = host;
  return txn;
}

TxnCtx retry_with_pinned_upper(const TxnCtx& previous, Tid fresh, Timestamp pinned_upper) {
  TxnCtx txn = begin(previous.level, previous.host, fresh);
  if (Bound* b = txn.visibility_bound()) b->upper = pinned_upper;
  return txn;
}

void txn_write(TxnCtx& txn, Key key, Value value) { txn.write_set[key] = value; }

std::optional<Value> read_own_write(const TxnCtx& txn, Key key) {
  if (auto it = txn.write_set.find(key); it != txn.write_set.end()) return it->second;
  return std::nullopt;
}

namespace {
Timestamp max_of(Timestamp init, std::span<const Timestamp> a, std::span<const Timestamp> b) {
  for (auto v : a) init = std::max(init, v);
  for (auto v : b) init = std::max(init, v);
  return init;
}
}  // namespace

std::optional<CommitStamp> decide_stamp_postsi(TxnCtx& txn, std::span<const Timestamp> sids,
                                               std::span<const Timestamp> incoming_lowers) {
  if (check_bound(txn.start_bound) == BoundCheck::kMustAbort) return std::nullopt;
  const Timestamp s = txn.start_bound.lower;
  txn.commit_lower = max_of(txn.commit_lower, sids, incoming_lowers);
  const auto stamp = CommitStamp::interval(s, std::max(txn.commit_lower, s) + 1);
  txn.decided = stamp;
  return stamp;
}

std::optional<CommitStamp> decide_stamp_sv(TxnCtx& txn, std::span<const Timestamp> sids,
                                           std::span<const Timestamp> incoming_lowers) {
  txn.order_bound.lower = max_of(txn.order_bound.lower, sids, incoming_lowers);
  if (check_bound(txn.order_bound) == BoundCheck::kMustAbort) return std::nullopt;
  const auto stamp = CommitStamp::order(txn.order_bound.lower);
  txn.decided = stamp;
  return stamp;
}

std::vector<BoundUpdate> broadcast_conflict_bounds(const TxnCtx& txn, CommitStamp stamp,
                                                   std::span<const Tid> incoming,
                                                   std::span<const Tid> outgoing) {
  std::vector<BoundUpdate> out;
  for (Tid r : incoming) {
    out.push_back({r, txn.tid, BoundUpdate::Kind::kReaderUpper, txn.level, stamp});
  }
  if (txn.level == Level::kPostSI || txn.level == Level::kSV) {
    for (Tid w : outgoing) {
      out.push_back({w, txn.tid, BoundUpdate::Kind::kWriterLower, txn.level, stamp});
    }
  }
  return out;
}

void apply_bound_update(TxnCtx& txn, const BoundUpdate& u) {
  const bool reader = u.kind == BoundUpdate::Kind::kReaderUpper;
  switch (u.level) {
    case Level::kPostSI:
      if (reader) {
        txn.start_bound = tighten_upper_below(txn.start_bound, u.stamp.commit);
      } else {
        txn.commit_lower = std::max(txn.commit_lower, u.stamp.start + 1);
      }
      break;
    case Level::kSV:
      if (reader) {
        txn.order_bound = tighten_upper_below(txn.order_bound, u.stamp.commit);
      } else {
        txn.order_bound = tighten_lower(txn.order_bound, u.stamp.start + 1);
      }
      break;
    default:
      break;
  }
}

bool satisfied_by_decided(const BoundUpdate& u, CommitStamp target) {
  if (u.level != Level::kPostSI && u.level != Level::kSV) return true;
  // Both sides are already decided, so neither may rely on commit order to
  // break an SV tie; every check is strict.
  if (u.kind == BoundUpdate::Kind::kReaderUpper) return target.start < u.stamp.commit;
  return u.stamp.start < target.commit;
}

PrepareTask::PrepareTask(PrepareSpec spec) : spec_(std::move(spec)) {
  std::sort(spec_.writes.begin(), spec_.writes.end());
  std::sort(spec_.invisible.begin(), spec_.invisible.end());
}

std::vector<Key> PrepareTask::written_keys() const {
  std::vector<Key> keys;
  keys.reserve(spec_.writes.size());
  for (const auto& [k, v] : spec_.writes) keys.push_back(k);
  return keys;
}

bool PrepareTask::validate(const Item& item, Key) const {
  if (spec_.level == Level::kCentralSI) return item.newest().cid <= spec_.start_ts;
  return true;
}

PrepareTask::Step PrepareTask::advance(Store& store) {
  while (cursor_ < spec_.writes.size()) {
    const Key key = spec_.writes[cursor_].first;
    WriteCheck check;
    if (is_vicc(spec_.level)) {
      auto r = std::find_if(spec_.reads.begin(), spec_.reads.end(),
                            [&](const auto& p) { return p.first == key; });
      if (r != spec_.reads.end()) check.read_seq = r->second;
      check.invisible = spec_.invisible;
    }
    const auto lock = store.acquire_write_lock(spec_.tid, key, check);
    if (lock.status == LockStatus::kBusy) return Step::kWaiting;
    if (lock.status == LockStatus::kConflict || !validate(store.item(key), key)) {
      abandon(store, AbortReason::kWriteConflict);
      return Step::kFailed;
    }
    ++cursor_;
  }
  finish(store);
  return Step::kDone;
}

void PrepareTask::abandon(Store& store, AbortReason reason) {
  const auto keys = written_keys();
  store.rollback(spec_.tid, keys);
  result_.ok = false;
  result_.reason = reason;
}

void PrepareTask::finish(Store& store) {
  StatusCache& cache = store.status();
  for (const auto& [key, seq] : spec_.reads) {
    Item& item = store.item(key);
    lazy_collect(item, cache);
    result_.read_sids.push_back(item.chain[seq].sid);
  }
  for (const auto& [key, value] : spec_.writes) {
    Item& item = store.item(key);
    lazy_collect(item, cache);
    const Version& top = item.newest();
    result_.overwritten.push_back({key, top.creator, top.cid, top.sid});
    for (const auto& v : live_visitors(item)) {
      if (v.tid == spec_.tid) continue;
      auto it = std::find_if(result_.incoming.begin(), result_.incoming.end(),
                             [&](const Visitor& o) { return o.tid == v.tid; });
      if (it == result_.incoming.end()) {
        result_.incoming.push_back(v);
      } else {
        it->lower_at_read = std::max(it->lower_at_read, v.lower_at_read);
      }
    }
    store.install_version(spec_.tid, key, value, spec_.start_ts);
  }
  result_.ok = true;
}

}  // namespace vicc
