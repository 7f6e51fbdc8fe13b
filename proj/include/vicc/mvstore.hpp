#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "vicc/core.hpp"

namespace vicc {

/// An ongoing (or not yet collected) reader of a version, with the copy of
/// its lower bound it carried at read time.
struct Visitor {
  Tid tid;
  Timestamp lower_at_read = 0;
};

struct Version {
  Value value = 0;
  Tid creator;
  Timestamp cid = 0;
  Timestamp sid = 0;
  bool published = false;
  // Central SI only: the creator's start timestamp, consulted while the
  // version is still pending.
  Timestamp creator_start = 0;
  std::vector<Visitor> visitors;
};

/// One key and its version chain. chain[i] is the version with version_seq i;
/// appends happen in write-lock order, so index order is the ww order.
struct Item {
  Key key = 0;
  std::vector<Version> chain;
  std::optional<Tid> write_lock;
  std::vector<Tid> writers;
  // Indexes of versions whose visitor list may be non-empty, ascending.
  std::vector<std::uint32_t> visited;

  const Version& newest() const { return chain.back(); }
  Version& newest() { return chain.back(); }
  bool has_pending_writer(Tid t) const;
  /// Newest published version's index.
  std::uint32_t newest_published_seq() const;
};

/// Per-node cache of terminated transactions' outcomes, fed by commit and
/// abort notifications. Bounded FIFO; entries that fell out are reported as
/// evicted when their session watermark proves them terminated.
class StatusCache {
 public:
  enum class State { kUnknown, kCommitted, kAborted, kEvicted };

  struct Lookup {
    State state = State::kUnknown;
    CommitStamp stamp;
  };

  explicit StatusCache(std::size_t capacity = std::size_t{1} << 20);

  void record_commit(Tid tid, CommitStamp stamp);
  void record_abort(Tid tid);
  Lookup lookup(Tid tid) const;

  /// All Tids of `session` with seq <= `seq` have terminated.
  void advance_watermark(std::uint32_t session, std::uint64_t seq);
  std::uint64_t watermark(std::uint32_t session) const;

  /// Upper bound on the start stamp of any committed transaction this cache
  /// has ever seen; the conservative fallback after an eviction.
  Timestamp max_start_seen() const { return max_start_seen_; }

  std::uint64_t evicted_lookups() const { return evicted_lookups_; }
  void count_evicted_lookup() { ++evicted_lookups_; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    bool committed = false;
    CommitStamp stamp;
  };
  void insert(Tid tid, Entry e);

  std::size_t capacity_;
  std::unordered_map<Tid, Entry> entries_;
  std::deque<Tid> fifo_;
  std::unordered_map<std::uint32_t, std::uint64_t> watermarks_;
  Timestamp max_start_seen_ = 0;
  std::uint64_t evicted_lookups_ = 0;
};

/// Removes terminated visitors of `version`. A committed reader's start
/// stamp (order under SV) is folded into the SID as it leaves.
void lazy_collect(Version& version, StatusCache& cache);
void lazy_collect(Item& item, StatusCache& cache);

/// Ongoing readers of any version of `item`, i.e. every transaction that
/// a new writer of the item would anti-depend on. Call after lazy_collect.
std::vector<Visitor> live_visitors(const Item& item);

/// The bound copy that travels with a read. Under PostSI `bound` is the
/// start-time interval and `commit_lower` the commit-time lower bound; under
/// SV `bound` is the order interval. CV ignores both.
struct ReadView {
  Tid tid;
  Level level = Level::kCV;
  Bound bound;
  Timestamp commit_lower = 0;
  Timestamp max_cid_seen = 0;
  // Writers this reader must not see (its outgoing rw edges). Sorted.
  std::vector<Tid> invisible;

  static ReadView of(const TxnCtx& txn, std::vector<Tid> invisible);
  /// Folds a returned copy back into the owner's context (max-merge).
  void merge_into(TxnCtx& txn) const;
  bool excludes(Tid creator) const;
};

enum class ReadStatus { kOk, kNoVisibleVersion, kMustAbort, kWait };

struct ReadResult {
  ReadStatus status = ReadStatus::kOk;
  std::uint32_t version_seq = 0;
  Value value = 0;
  Tid creator;
  Timestamp cid = 0;
  // Creators of pending (installed, unpublished) versions that were passed
  // over; each is an rw edge reader -> creator.
  std::vector<Tid> pending_skipped;
};

/// What a committing writer must satisfy on an item once it holds the lock.
struct WriteCheck {
  // Version the writer read from this item, if any.
  std::optional<std::uint32_t> read_seq;
  // Writers the transaction must not see; the newest creator may not be one.
  std::span<const Tid> invisible;
};

enum class LockStatus { kAcquired, kBusy, kConflict };

struct LockResult {
  LockStatus status = LockStatus::kAcquired;
  std::optional<Tid> holder;
};

/// Multi-version storage for one node's partition.
class Store {
 public:
  explicit Store(std::size_t status_capacity = std::size_t{1} << 20) : status_(status_capacity) {}

  void load(Key key, Value value);
  bool contains(Key key) const { return items_.contains(key); }
  Item& item(Key key);
  const Item& item(Key key) const;
  std::size_t size() const { return items_.size(); }

  /// Newest version visible under the visibility rules, registering the
  /// reader as a visitor and tightening the view's bounds by the CID read.
  ReadResult read_visible(ReadView& view, Key key);

  /// Takes the write lock for `tid` and validates the overwrite: a version
  /// the writer read must still be the newest, and the newest version's
  /// creator must not be one the writer has to stay blind to. A validation
  /// failure releases the lock.
  LockResult acquire_write_lock(Tid tid, Key key, const WriteCheck& check);

  /// Appends an unpublished version and enters `tid` in the writer list.
  /// Throws std::logic_error unless `tid` holds the lock.
  void install_version(Tid tid, Key key, Value value, Timestamp creator_start = 0);

  /// Sets CIDs of `tid`'s pending versions, leaves the writer lists, releases
  /// locks and records the stamp for later visitor collection.
  void publish_commit(Tid tid, CommitStamp stamp, std::span<const Key> keys_written);

  /// Drops pending versions and locks held by `tid` on `keys` and records the
  /// abort. Keys `tid` does not hold are ignored.
  void rollback(Tid tid, std::span<const Key> keys);

  StatusCache& status() { return status_; }
  const StatusCache& status() const { return status_; }

  /// Sum of newest published values over all items.
  Value total_published() const;

  template <typename F>
  void for_each_item(F&& f) const {
    for (const auto& [k, it] : items_) f(it);
  }

 private:
  std::unordered_map<Key, Item> items_;
  StatusCache status_;
};

}  // namespace vicc
