#include "vicc/core.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <utility>

namespace vicc {

std::string Tid::to_string() const {
  return std::to_string(session_id()) + "." + std::to_string(seq());
}

std::optional<Tid> Tid::parse(std::string_view text) {
  const auto dot = text.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  std::uint32_t session = 0;
  std::uint64_t seq = 0;
  const auto* begin = text.data();
  auto r1 = std::from_chars(begin, begin + dot, session);
  if (r1.ec != std::errc{} || r1.ptr != begin + dot) return std::nullopt;
  auto r2 = std::from_chars(begin + dot + 1, begin + text.size(), seq);
  if (r2.ec != std::errc{} || r2.ptr != begin + text.size()) return std::nullopt;
  if (seq > kSeqMask) return std::nullopt;
  return Tid(session, seq);
}

std::ostream& operator<<(std::ostream& os, Tid tid) { return os << tid.to_string(); }

Bound tighten_lower(Bound b, Timestamp v) {
  b.lower = std::max(b.lower, v);
  return b;
}

Bound tighten_upper(Bound b, Timestamp v) {
  b.upper = std::min(b.upper, v);
  return b;
}

Bound tighten_upper_below(Bound b, Timestamp v) {
  if (v == 0) {
    b.upper = 0;
    b.lower = std::max<Timestamp>(b.lower, 1);
    return b;
  }
  return tighten_upper(b, v - 1);
}

BoundCheck check_bound(const Bound& b) {
  return b.lower > b.upper ? BoundCheck::kMustAbort : BoundCheck::kOk;
}

std::string_view to_string(Level level) {
  switch (level) {
    case Level::kCV: return "cv";
    case Level::kPostSI: return "postsi";
    case Level::kSV: return "sv";
    case Level::kCentralSI: return "central";
    case Level::kOptimal: return "optimal";
  }
  return "?";
}

std::optional<Level> parse_level(std::string_view text) {
  for (Level l : {Level::kCV, Level::kPostSI, Level::kSV, Level::kCentralSI, Level::kOptimal}) {
    if (to_string(l) == text) return l;
  }
  return std::nullopt;
}

std::string_view to_string(AbortReason reason) {
  switch (reason) {
    case AbortReason::kBoundViolation: return "BoundViolation";
    case AbortReason::kWriteConflict: return "WriteConflict";
    case AbortReason::kNoVisibleVersion: return "NoVisibleVersion";
    case AbortReason::kLockTimeout: return "LockTimeout";
  }
  return "?";
}

const Bound* TxnCtx::visibility_bound() const {
  switch (level) {
    case Level::kPostSI: return &start_bound;
    case Level::kSV: return &order_bound;
    default: return nullptr;
  }
}

Bound* TxnCtx::visibility_bound() {
  return const_cast<Bound*>(std::as_const(*this).visibility_bound());
}

void advance_phase(TxnCtx& txn, Phase next) {
  const Phase cur = txn.phase;
  const bool ok = (cur == Phase::kActive && (next == Phase::kPreparing || next == Phase::kAborted)) ||
                  (cur == Phase::kPreparing && (next == Phase::kCommitted || next == Phase::kAborted));
  if (!ok) throw std::logic_error("illegal transaction phase transition");
  txn.phase = next;
}

}  // namespace vicc
