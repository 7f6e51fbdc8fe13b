#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vicc/core.hpp"
#include "vicc/history.hpp"

namespace vicc {

/// Dependencies among the committed transactions of a history. Transactions
/// are indexed in commit order; the loader is not a transaction here.
struct DependencyGraph {
  struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
  };
  struct Read {
    std::size_t reader = 0;
    Key key = 0;
    std::uint32_t seq = 0;
  };
  static constexpr std::size_t kLoader = static_cast<std::size_t>(-1);

  std::vector<Tid> txns;
  std::unordered_map<Tid, std::size_t> index;
  std::vector<std::optional<CommitStamp>> stamps;
  // Per key: (version_seq, writer index), ascending seq. Seq 0 is the loader.
  std::map<Key, std::vector<std::pair<std::uint32_t, std::size_t>>> chains;
  std::vector<Read> reads;

  // Only consecutive ww and rw edges are kept; longer ones follow by chaining
  // through ww.
  std::vector<Edge> wr;
  std::vector<Edge> ww;
  std::vector<Edge> rw;  // reader -> overwriter

  std::size_t size() const { return txns.size(); }
  std::size_t writer_of(Key key, std::uint32_t seq) const;
};

/// Throws MalformedHistory on duplicate terminations, duplicate installs at
/// one version, or reads of versions nobody committed.
DependencyGraph extract_dependencies(const std::vector<HistoryEvent>& history);

/// One step of an order cycle. kVisible: from -> to, so from precedes to.
/// kInvisible: to is invisible to from, so from must not come after to.
struct Relation {
  enum class Kind { kVisible, kInvisible };
  Tid from;
  Tid to;
  Kind kind = Kind::kVisible;
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct OracleResult {
  bool pass = true;
  // Fail: the offending pair (CV) or cycle (PostSI, SV).
  std::vector<Relation> witness;
  // PostSI pass: a satisfying interval per transaction.
  std::map<Tid, CommitStamp> assignment;
  // SV pass: a total visibility order.
  std::vector<Tid> order;
  std::string detail;

  std::string report() const;
};

/// Atomic visibility: no forced relation may be demanded both ways, and no
/// pair may be forced visible in both directions.
OracleResult check_cv(const DependencyGraph& g);
/// Interval feasibility of the difference-constraint system.
OracleResult check_postsi(const DependencyGraph& g);
/// Acyclicity of the multiversion serialization graph.
OracleResult check_sv(const DependencyGraph& g);

/// CV first; PostSI and SV (any other level maps to PostSI) only on a CV pass.
OracleResult check(Level level, const std::vector<HistoryEvent>& history);

/// True iff `a` gives every transaction s < c and meets every forced relation.
bool verify_assignment(const DependencyGraph& g, const std::map<Tid, CommitStamp>& a);
/// Checks the stamps the scheduler logged against the forced relations.
OracleResult verify_logged_stamps(const DependencyGraph& g);

/// Whether a cyclic step list has two invisibility steps in a row.
bool has_consecutive_invisibility(const std::vector<Relation>& cycle);

}  // namespace vicc
