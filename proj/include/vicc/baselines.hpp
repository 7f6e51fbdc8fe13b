#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "vicc/core.hpp"
#include "vicc/mvstore.hpp"

namespace vicc {

struct CentralBegin {
  Timestamp start_ts = 0;
  std::vector<Tid> snapshot;  // sorted
};

/// Timestamp and active-set authority of the centralized SI baseline. Lives on
/// the master node and is consulted twice per transaction.
class Coordinator {
 public:
  CentralBegin begin(Tid tid);
  /// Draws the commit timestamp and drops `tid` from the active set. Unknown
  /// Tids still get a timestamp.
  Timestamp end(Tid tid);

  Timestamp clock() const { return clock_; }
  const std::set<Tid>& active() const { return active_; }
  std::uint64_t requests() const { return requests_; }

 private:
  Timestamp clock_ = 0;
  std::set<Tid> active_;
  std::uint64_t requests_ = 0;
};

/// What a central-SI read carries to the data node.
struct CentralView {
  Tid tid;
  Timestamp start_ts = 0;
  std::vector<Tid> snapshot;  // sorted
};

/// Newest version committed before the reader started. A pending version
/// whose creator already ended before that point must be waited for
/// (ReadStatus::kWait).
ReadResult central_read(const Store& store, const CentralView& view, Key key);

/// The "optimal" baseline has no timestamps and no snapshot.
inline CentralBegin optimal_begin() { return {}; }

/// Newest published version, no checks at all.
ReadResult optimal_read(const Store& store, Key key);

}  // namespace vicc
