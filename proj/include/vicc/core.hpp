#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace vicc {

/// Logical time. The whole domain is non-negative; the max value stands for +inf.
using Timestamp = std::uint64_t;
inline constexpr Timestamp kInfinity = std::numeric_limits<Timestamp>::max();

using Key = std::uint64_t;
using Value = std::int64_t;
using NodeId = std::uint32_t;

/// Globally unique transaction id: issuing session in the high bits, the
/// session's local counter in the low bits. Packing keeps comparison and
/// message encoding to a single word.
class Tid {
 public:
  static constexpr int kSeqBits = 40;
  static constexpr std::uint64_t kSeqMask = (std::uint64_t{1} << kSeqBits) - 1;

  constexpr Tid() = default;
  constexpr Tid(std::uint32_t session_id, std::uint64_t seq)
      : packed_((std::uint64_t{session_id} << kSeqBits) | (seq & kSeqMask)) {}

  static constexpr Tid from_packed(std::uint64_t packed) {
    Tid t;
    t.packed_ = packed;
    return t;
  }

  constexpr std::uint32_t session_id() const {
    return static_cast<std::uint32_t>(packed_ >> kSeqBits);
  }
  constexpr std::uint64_t seq() const { return packed_ & kSeqMask; }
  constexpr std::uint64_t packed() const { return packed_; }

  /// The loader that created every item's initial version.
  constexpr bool is_loader() const { return packed_ == 0; }

  constexpr auto operator<=>(const Tid&) const = default;

  std::string to_string() const;
  static std::optional<Tid> parse(std::string_view text);

 private:
  std::uint64_t packed_ = 0;
};

inline constexpr Tid kLoaderTid{};

std::ostream& operator<<(std::ostream& os, Tid tid);

/// A session issues Tids from a private counter; no coordination needed.
class Session {
 public:
  explicit Session(std::uint32_t id, std::uint64_t persisted_counter = 0)
      : id_(id), counter_(persisted_counter) {}

  Tid next_tid() { return Tid(id_, ++counter_); }

  std::uint32_t id() const { return id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint32_t id_;
  std::uint64_t counter_;
};

/// [lower, upper] interval on logical time. Empty once lower > upper.
struct Bound {
  Timestamp lower = 0;
  Timestamp upper = kInfinity;

  friend bool operator==(const Bound&, const Bound&) = default;
};

enum class BoundCheck { kOk, kMustAbort };

Bound tighten_lower(Bound b, Timestamp v);
Bound tighten_upper(Bound b, Timestamp v);
BoundCheck check_bound(const Bound& b);

/// Tightens the upper bound to "strictly below v". Below zero there is no
/// valid timestamp, so the bound is forced empty.
Bound tighten_upper_below(Bound b, Timestamp v);

enum class Level { kCV, kPostSI, kSV, kCentralSI, kOptimal };

std::string_view to_string(Level level);
std::optional<Level> parse_level(std::string_view text);

/// True for the three visibility-based schedulers.
constexpr bool is_vicc(Level level) {
  return level == Level::kCV || level == Level::kPostSI || level == Level::kSV;
}

enum class Phase { kActive, kPreparing, kCommitted, kAborted };

/// PostSI carries an interval (start < commit). SV carries a single order,
/// stored in both fields so visibility checks read uniformly.
struct CommitStamp {
  Timestamp start = 0;
  Timestamp commit = 0;

  static CommitStamp interval(Timestamp s, Timestamp c) { return {s, c}; }
  static CommitStamp order(Timestamp o) { return {o, o}; }

  friend bool operator==(const CommitStamp&, const CommitStamp&) = default;
};

enum class AbortReason {
  kBoundViolation,
  kWriteConflict,
  kNoVisibleVersion,
  kLockTimeout,
};

std::string_view to_string(AbortReason reason);

/// Per-transaction state. Owned by the host; remote nodes only ever see copies
/// of the bounds that travel with delegated work.
struct TxnCtx {
  Tid tid;
  Level level = Level::kCV;
  NodeId host = 0;
  Phase phase = Phase::kActive;

  // PostSI: start-time bounds and the commit-time lower bound.
  Bound start_bound;
  Timestamp commit_lower = 0;
  // SV: order bounds.
  Bound order_bound;

  // Buffered writes; invisible to everyone else until commit.
  std::map<Key, Value> write_set;

  // Highest CID observed, used to pin the upper bound on retry.
  Timestamp max_cid_seen = 0;

  std::optional<CommitStamp> decided;

  /// The bound that gates CID-based visibility: start bound under PostSI,
  /// order bound under SV. Null for CV and the baselines.
  const Bound* visibility_bound() const;
  Bound* visibility_bound();
};

/// Moves the transaction to `next`, rejecting transitions the lifecycle
/// does not allow (Active->Preparing->{Committed,Aborted}, Active->Aborted).
void advance_phase(TxnCtx& txn, Phase next);

}  // namespace vicc

template <>
struct std::hash<vicc::Tid> {
  std::size_t operator()(const vicc::Tid& t) const noexcept {
    return std::hash<std::uint64_t>{}(t.packed());
  }
};
