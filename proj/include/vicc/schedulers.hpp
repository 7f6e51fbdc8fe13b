#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "vicc/core.hpp"
#include "vicc/mvstore.hpp"

namespace vicc {

/// Fresh transaction context: PostSI starts at s̲=0, s̄=+inf, c̲=0 and SV at
/// o̲=0, ō=+inf. CV and the baselines keep their bounds unused.
TxnCtx begin(Level level, NodeId host, Tid tid);

/// Next attempt of an aborted transaction whose upper bound (s̄ or ō) is
/// fixed at the highest CID it met before the abort.
TxnCtx retry_with_pinned_upper(const TxnCtx& previous, Tid fresh, Timestamp pinned_upper);

/// Buffers a write; nothing leaves the transaction before commit.
void txn_write(TxnCtx& txn, Key key, Value value);
/// The buffered value, if the transaction already wrote `key`.
std::optional<Value> read_own_write(const TxnCtx& txn, Key key);

/// Commit stamp for PostSI: s = s̲, c̲ raised by the SIDs and the lower
/// bounds of incoming anti-dependencies, c = max(c̲, s) + 1. Returns nullopt
/// when the start interval is already empty.
std::optional<CommitStamp> decide_stamp_postsi(TxnCtx& txn, std::span<const Timestamp> sids,
                                               std::span<const Timestamp> incoming_lowers);

/// Commit order for SV: o = max(o̲, SIDs, incoming lower bounds). Returns
/// nullopt if that exceeds ō.
std::optional<CommitStamp> decide_stamp_sv(TxnCtx& txn, std::span<const Timestamp> sids,
                                           std::span<const Timestamp> incoming_lowers);

/// A bound tightening sent to the host of a conflicting transaction once the
/// sender's stamp is final.
struct BoundUpdate {
  enum class Kind {
    // target --rw--> source: the source must stay invisible to the target.
    kReaderUpper,
    // source --rw--> target: the target must stay invisible to the source.
    kWriterLower,
  };
  Tid target;
  Tid source;
  Kind kind = Kind::kReaderUpper;
  Level level = Level::kCV;
  CommitStamp stamp;
};

/// One bound update per conflicting transaction. `incoming` are the
/// readers that anti-depend on `txn`; `outgoing` are writers `txn` must not
/// see (pending versions it skipped). CV only needs the entries recorded.
std::vector<BoundUpdate> broadcast_conflict_bounds(const TxnCtx& txn, CommitStamp stamp,
                                                   std::span<const Tid> incoming,
                                                   std::span<const Tid> outgoing);

/// Applies an update to a transaction whose stamp is still open.
void apply_bound_update(TxnCtx& txn, const BoundUpdate& update);

/// Whether the constraint carried by `update` holds for a target that had
/// already fixed `target_stamp` when the update arrived.
bool satisfied_by_decided(const BoundUpdate& update, CommitStamp target_stamp);

/// Participant-side request for round 1 of the commit.
struct PrepareSpec {
  Tid tid;
  Level level = Level::kCV;
  std::vector<std::pair<Key, Value>> writes;         // ascending keys
  std::vector<std::pair<Key, std::uint32_t>> reads;  // key and version read
  std::vector<Tid> invisible;                        // sorted
  Timestamp start_ts = 0;                            // central SI only
};

struct OverwriteInfo {
  Key key = 0;
  Tid creator;
  Timestamp cid = 0;
  Timestamp sid = 0;
};

struct PrepareResult {
  bool ok = true;
  AbortReason reason = AbortReason::kWriteConflict;
  std::vector<OverwriteInfo> overwritten;
  std::vector<Timestamp> read_sids;
  std::vector<Visitor> incoming;
};

/// Round 1 on one participant: write locks in ascending key order, the
/// overwrite validation, version installation and gathering of SIDs and
/// conflicting readers. Resumable, since a busy lock suspends it.
class PrepareTask {
 public:
  enum class Step { kDone, kWaiting, kFailed };

  explicit PrepareTask(PrepareSpec spec);

  Step advance(Store& store);
  Key waiting_key() const { return spec_.writes[cursor_].first; }
  /// Gives up (lock timeout): releases every lock taken so far.
  void abandon(Store& store, AbortReason reason);

  const PrepareSpec& spec() const { return spec_; }
  const PrepareResult& result() const { return result_; }
  std::vector<Key> written_keys() const;

 private:
  bool validate(const Item& item, Key key) const;
  void finish(Store& store);

  PrepareSpec spec_;
  PrepareResult result_;
  std::size_t cursor_ = 0;
};

}  // namespace vicc
