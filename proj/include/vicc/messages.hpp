#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "vicc/baselines.hpp"
#include "vicc/core.hpp"
#include "vicc/mvstore.hpp"
#include "vicc/schedulers.hpp"

namespace vicc {

using Tick = std::uint64_t;

struct ReadReq {
  Tid tid;
  Level level = Level::kCV;
  std::vector<Key> keys;
  ReadView view;          // ViCC levels: the travelling bound copy
  CentralView central;    // central SI
};

struct ReadEntry {
  Key key = 0;
  ReadResult result;
};

struct ReadResp {
  Tid tid;
  std::vector<ReadEntry> entries;
  ReadView view;
};

struct PrepareReq {
  PrepareSpec spec;
};

struct PrepareResp {
  Tid tid;
  PrepareResult result;
};

struct BoundUpdateReq {
  BoundUpdate update;
};

struct BoundReply {
  enum class Status { kApplied, kDecided, kAborted, kUnknown };
  BoundUpdate update;
  Status status = Status::kApplied;
  CommitStamp target_stamp;
};

struct CommitReq {
  Tid tid;
  CommitStamp stamp;
  bool has_stamp = false;
  std::vector<Key> keys;
};

struct AbortReq {
  Tid tid;
  std::vector<Key> keys;
};

struct CoordBeginReq {
  Tid tid;
};

struct CoordBeginResp {
  Tid tid;
  CentralBegin begin;
};

struct CoordEndReq {
  Tid tid;
  bool committed = false;
};

struct CoordEndResp {
  Tid tid;
  Timestamp commit_ts = 0;
};

/// Highest terminated sequence number per session, for lazy collection.
struct Watermark {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> sessions;
};

using Payload = std::variant<ReadReq, ReadResp, PrepareReq, PrepareResp, BoundUpdateReq, BoundReply,
                             CommitReq, AbortReq, CoordBeginReq, CoordBeginResp, CoordEndReq,
                             CoordEndResp, Watermark>;

struct Envelope {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint64_t seq = 0;
  Payload payload;
};

/// Keys a message carries; the simulated service time grows with it.
std::size_t payload_keys(const Payload& p);

/// Node-local wakeups.
struct Timer {
  enum class Kind { kStartSlot, kHoldDone, kLockTimeout };
  Kind kind = Kind::kStartSlot;
  std::uint32_t slot = 0;
  Tid tid;
  Key key = 0;
};

}  // namespace vicc
