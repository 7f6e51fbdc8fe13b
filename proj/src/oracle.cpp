#include "vicc/oracle.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

namespace vicc {

std::size_t DependencyGraph::writer_of(Key key, std::uint32_t seq) const {
  if (seq == 0) return kLoader;
  auto it = chains.find(key);
  if (it == chains.end()) return kLoader;
  auto pos = std::lower_bound(it->second.begin(), it->second.end(), std::pair{seq, std::size_t{0}});
  if (pos == it->second.end() || pos->first != seq) return kLoader;
  return pos->second;
}

DependencyGraph extract_dependencies(const std::vector<HistoryEvent>& history) {
  using K = HistoryEvent::Kind;
  DependencyGraph g;
  std::unordered_set<Tid> aborted;
  for (const auto& e : history) {
    if (e.kind != K::kCommit && e.kind != K::kAbort) continue;
    if (e.tid.is_loader()) throw MalformedHistory("loader cannot terminate");
    if (g.index.contains(e.tid) || aborted.contains(e.tid)) {
      throw MalformedHistory("transaction " + e.tid.to_string() + " terminates twice");
    }
    if (e.kind == K::kAbort) {
      aborted.insert(e.tid);
      continue;
    }
    g.index.emplace(e.tid, g.txns.size());
    g.txns.push_back(e.tid);
    g.stamps.push_back(e.stamp);
  }

  for (const auto& e : history) {
    if (e.kind != K::kWrite) continue;
    auto it = g.index.find(e.tid);
    if (it == g.index.end()) continue;
    if (e.version_seq == 0) throw MalformedHistory("install at version 0 by " + e.tid.to_string());
    g.chains[e.key].emplace_back(e.version_seq, it->second);
  }
  for (auto& [key, chain] : g.chains) {
    std::sort(chain.begin(), chain.end());
    for (std::size_t i = 1; i < chain.size(); ++i) {
      if (chain[i].first == chain[i - 1].first) {
        throw MalformedHistory("two installs at version " + std::to_string(chain[i].first) + " of key " +
                               std::to_string(key));
      }
    }
  }

  std::set<DependencyGraph::Edge> wr, ww, rw;
  for (const auto& [key, chain] : g.chains) {
    for (std::size_t i = 1; i < chain.size(); ++i) {
      if (chain[i - 1].second != chain[i].second) ww.insert({chain[i - 1].second, chain[i].second});
    }
  }
  for (const auto& e : history) {
    if (e.kind != K::kRead) continue;
    auto it = g.index.find(e.tid);
    if (it == g.index.end()) continue;
    const std::size_t r = it->second;
    g.reads.push_back({r, e.key, e.version_seq});
    const std::size_t w = g.writer_of(e.key, e.version_seq);
    if (e.version_seq != 0 && w == DependencyGraph::kLoader) {
      throw MalformedHistory(e.tid.to_string() + " read uncommitted version " + std::to_string(e.version_seq) +
                             " of key " + std::to_string(e.key));
    }
    if (w != DependencyGraph::kLoader && w != r) wr.insert({w, r});
    if (auto c = g.chains.find(e.key); c != g.chains.end()) {
      auto next = std::upper_bound(c->second.begin(), c->second.end(),
                                   std::pair{e.version_seq, DependencyGraph::kLoader});
      if (next != c->second.end() && next->second != r) rw.insert({r, next->second});
    }
  }
  g.wr.assign(wr.begin(), wr.end());
  g.ww.assign(ww.begin(), ww.end());
  g.rw.assign(rw.begin(), rw.end());
  return g;
}

std::string OracleResult::report() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL");
  if (!detail.empty()) os << ": " << detail;
  os << '\n';
  for (const auto& r : witness) {
    os << "  " << r.from << (r.kind == Relation::Kind::kVisible ? " -> " : " <= ") << r.to
       << (r.kind == Relation::Kind::kVisible ? "  (visible)" : "  (invisible to the left)") << '\n';
  }
  for (const auto& [t, s] : assignment) os << "  " << t << " s=" << s.start << " c=" << s.commit << '\n';
  if (!order.empty()) {
    os << "  order:";
    for (Tid t : order) os << ' ' << t;
    os << '\n';
  }
  return os.str();
}

bool has_consecutive_invisibility(const std::vector<Relation>& cycle) {
  const std::size_t n = cycle.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cycle[i].kind == Relation::Kind::kInvisible && cycle[(i + 1) % n].kind == Relation::Kind::kInvisible) {
      return true;
    }
  }
  return false;
}

// ------------------------------------------------------------------- CV

namespace {

std::uint64_t pair_key(std::size_t i, std::size_t j) { return (std::uint64_t(i) << 32) | std::uint64_t(j); }

struct TxnAccess {
  std::map<Key, std::uint32_t> writes;     // key -> installed seq
  std::map<Key, std::uint32_t> min_read;   // key -> oldest seq read
};

std::vector<TxnAccess> accesses(const DependencyGraph& g) {
  std::vector<TxnAccess> acc(g.size());
  for (const auto& [key, chain] : g.chains) {
    for (const auto& [seq, w] : chain) acc[w].writes[key] = seq;
  }
  for (const auto& r : g.reads) {
    auto [it, fresh] = acc[r.reader].min_read.try_emplace(r.key, r.seq);
    if (!fresh) it->second = std::min(it->second, r.seq);
  }
  return acc;
}

}  // namespace

OracleResult check_cv(const DependencyGraph& g) {
  const auto acc = accesses(g);
  // Forced visibility: wr, and every earlier installer on a key one wrote.
  std::unordered_set<std::uint64_t> vis;
  std::vector<std::vector<std::size_t>> vis_into(g.size());
  auto add = [&](std::size_t i, std::size_t j) {
    if (i != j && vis.insert(pair_key(i, j)).second) vis_into[j].push_back(i);
  };
  for (const auto& e : g.wr) add(e.from, e.to);
  for (const auto& [key, chain] : g.chains) {
    for (std::size_t b = 1; b < chain.size(); ++b) {
      for (std::size_t a = 0; a < b; ++a) add(chain[a].second, chain[b].second);
    }
  }

  OracleResult res;
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto& from = vis_into[j];
    std::sort(from.begin(), from.end());
    for (std::size_t i : from) {
      if (vis.contains(pair_key(j, i))) {
        res.pass = false;
        res.detail = "mutual visibility";
        res.witness = {{g.txns[i], g.txns[j], Relation::Kind::kVisible},
                       {g.txns[j], g.txns[i], Relation::Kind::kVisible}};
        return res;
      }
      // j sees i, so j may not have read anything older than what i installed.
      for (const auto& [key, seq] : acc[i].writes) {
        auto r = acc[j].min_read.find(key);
        if (r != acc[j].min_read.end() && r->second < seq) {
          res.pass = false;
          res.detail = "partial visibility on key " + std::to_string(key);
          res.witness = {{g.txns[i], g.txns[j], Relation::Kind::kVisible},
                         {g.txns[j], g.txns[i], Relation::Kind::kInvisible}};
          return res;
        }
      }
    }
  }
  return res;
}

// ------------------------------------------------------- graph utilities

namespace {

struct WEdge {
  std::size_t to;
  int weight;
};

/// Iterative Tarjan. Returns component ids; components come out in reverse
/// topological order (a component's id is smaller than its predecessors').
std::vector<std::size_t> tarjan(const std::vector<std::vector<WEdge>>& adj, std::size_t& count) {
  const std::size_t n = adj.size();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // node, next edge
  std::size_t next_index = 0;
  count = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    while (!call.empty()) {
      auto& [v, ei] = call.back();
      if (ei == 0 && index[v] == kUnset) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      if (ei < adj[v].size()) {
        const std::size_t w = adj[v][ei++].to;
        if (index[w] == kUnset) {
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      const std::size_t done = v;
      call.pop_back();
      if (!call.empty()) {
        auto& parent = call.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return comp;
}

/// Shortest path from `from` to `to` staying inside component `c`.
std::vector<std::size_t> path_within(const std::vector<std::vector<WEdge>>& adj,
                                     const std::vector<std::size_t>& comp, std::size_t from, std::size_t to) {
  const std::size_t c = comp[from];
  std::vector<std::size_t> prev(adj.size(), static_cast<std::size_t>(-1));
  std::queue<std::size_t> q;
  q.push(from);
  prev[from] = from;
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop();
    if (v == to) break;
    for (const auto& e : adj[v]) {
      if (comp[e.to] == c && prev[e.to] == static_cast<std::size_t>(-1)) {
        prev[e.to] = v;
        q.push(e.to);
      }
    }
  }
  std::vector<std::size_t> path{to};
  while (path.back() != from) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

// --------------------------------------------------------------- PostSI

namespace {

// Variables: s_i = 2i, c_i = 2i + 1. An edge u -> v of weight w encodes
// x_v <= x_u + w.
std::vector<std::vector<WEdge>> constraint_graph(const DependencyGraph& g) {
  std::vector<std::vector<WEdge>> adj(2 * g.size());
  auto s = [](std::size_t i) { return 2 * i; };
  auto c = [](std::size_t i) { return 2 * i + 1; };
  for (std::size_t i = 0; i < g.size(); ++i) adj[c(i)].push_back({s(i), -1});  // s_i <= c_i - 1
  auto visible = [&](std::size_t i, std::size_t j) { adj[s(j)].push_back({c(i), 0}); };    // c_i <= s_j
  auto invisible = [&](std::size_t i, std::size_t j) { adj[c(i)].push_back({s(j), -1}); };  // s_j <= c_i - 1
  for (const auto& e : g.wr) visible(e.from, e.to);
  for (const auto& e : g.ww) visible(e.from, e.to);
  for (const auto& e : g.rw) invisible(e.to, e.from);
  return adj;
}

}  // namespace

OracleResult check_postsi(const DependencyGraph& g) {
  const auto adj = constraint_graph(g);
  std::size_t ncomp = 0;
  const auto comp = tarjan(adj, ncomp);
  OracleResult res;

  // All weights are 0 or -1, so a negative cycle exists iff some -1 edge
  // closes inside a strongly connected component.
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (const auto& e : adj[u]) {
      if (e.weight >= 0 || comp[e.to] != comp[u]) continue;
      auto path = path_within(adj, comp, e.to, u);  // e.to ... u, then u -> e.to closes it
      res.pass = false;
      res.detail = "no interval assignment exists";
      // Walk the constraint cycle and translate inter-transaction edges.
      std::vector<Relation> steps;
      path.push_back(e.to);
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const std::size_t a = path[k], b = path[k + 1];
        const std::size_t ta = a / 2, tb = b / 2;
        if (a % 2 == 0 && b % 2 == 1) {
          // s_ta -> c_tb: tb is visible to ta.
          steps.push_back({g.txns[tb], g.txns[ta], Relation::Kind::kVisible});
        } else if (a % 2 == 1 && b % 2 == 0 && ta != tb) {
          // c_ta -> s_tb: ta is invisible to tb.
          steps.push_back({g.txns[tb], g.txns[ta], Relation::Kind::kInvisible});
        }
      }
      std::reverse(steps.begin(), steps.end());
      res.witness = std::move(steps);
      return res;
    }
  }

  // Feasible: every component is zero-weight, so relax the condensation in
  // topological order (tarjan numbers sinks first).
  std::vector<std::vector<std::size_t>> members(ncomp);
  for (std::size_t v = 0; v < adj.size(); ++v) members[comp[v]].push_back(v);
  std::vector<long long> dist(ncomp, 0);
  for (std::size_t cc = ncomp; cc-- > 0;) {
    for (std::size_t v : members[cc]) {
      for (const auto& e : adj[v]) {
        if (comp[e.to] != cc) dist[comp[e.to]] = std::min(dist[comp[e.to]], dist[cc] + e.weight);
      }
    }
  }
  long long lo = 0;
  for (auto d : dist) lo = std::min(lo, d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto s = static_cast<Timestamp>(dist[comp[2 * i]] - lo);
    const auto c = static_cast<Timestamp>(dist[comp[2 * i + 1]] - lo);
    res.assignment[g.txns[i]] = CommitStamp::interval(s, c);
  }
  return res;
}

bool verify_assignment(const DependencyGraph& g, const std::map<Tid, CommitStamp>& a) {
  auto get = [&](std::size_t i) -> const CommitStamp* {
    auto it = a.find(g.txns[i]);
    return it == a.end() ? nullptr : &it->second;
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto* st = get(i);
    if (!st || st->start >= st->commit) return false;
  }
  for (const auto* edges : {&g.wr, &g.ww}) {
    for (const auto& e : *edges) {
      if (get(e.from)->commit > get(e.to)->start) return false;
    }
  }
  for (const auto& e : g.rw) {
    if (get(e.to)->commit <= get(e.from)->start) return false;
  }
  return true;
}

OracleResult verify_logged_stamps(const DependencyGraph& g) {
  OracleResult res;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.stamps[i]) {
      res.pass = false;
      res.detail = g.txns[i].to_string() + " committed without a stamp";
      return res;
    }
    if (g.stamps[i]->start >= g.stamps[i]->commit) {
      res.pass = false;
      res.detail = g.txns[i].to_string() + " has s >= c";
      return res;
    }
  }
  auto st = [&](std::size_t i) { return *g.stamps[i]; };
  for (const auto* edges : {&g.wr, &g.ww}) {
    for (const auto& e : *edges) {
      if (st(e.from).commit > st(e.to).start) {
        res.pass = false;
        res.detail = "visible pair violates c <= s";
        res.witness = {{g.txns[e.from], g.txns[e.to], Relation::Kind::kVisible}};
        return res;
      }
    }
  }
  for (const auto& e : g.rw) {
    if (st(e.to).commit <= st(e.from).start) {
      res.pass = false;
      res.detail = "invisible pair violates c > s";
      res.witness = {{g.txns[e.from], g.txns[e.to], Relation::Kind::kInvisible}};
      return res;
    }
  }
  return res;
}

// ------------------------------------------------------------------- SV

OracleResult check_sv(const DependencyGraph& g) {
  std::vector<std::vector<WEdge>> adj(g.size());
  for (const auto& e : g.wr) adj[e.from].push_back({e.to, 0});
  for (const auto& e : g.ww) adj[e.from].push_back({e.to, 0});
  for (const auto& e : g.rw) adj[e.from].push_back({e.to, 1});

  OracleResult res;
  std::vector<std::size_t> indeg(g.size(), 0);
  for (const auto& out : adj) {
    for (const auto& e : out) ++indeg[e.to];
  }
  // Kahn, preferring commit order among ready transactions.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    res.order.push_back(g.txns[v]);
    for (const auto& e : adj[v]) {
      if (--indeg[e.to] == 0) ready.push(e.to);
    }
  }
  if (res.order.size() == g.size()) return res;

  res.pass = false;
  res.order.clear();
  res.detail = "serialization graph has a cycle";
  std::size_t ncomp = 0;
  const auto comp = tarjan(adj, ncomp);
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (const auto& e : adj[u]) {
      if (comp[e.to] != comp[u]) continue;
      auto path = path_within(adj, comp, e.to, u);
      path.push_back(e.to);
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const std::size_t a = path[k], b = path[k + 1];
        const bool inv = std::any_of(adj[a].begin(), adj[a].end(),
                                     [&](const WEdge& x) { return x.to == b && x.weight == 1; }) &&
                         !std::any_of(adj[a].begin(), adj[a].end(),
                                      [&](const WEdge& x) { return x.to == b && x.weight == 0; });
        res.witness.push_back({g.txns[a], g.txns[b], inv ? Relation::Kind::kInvisible : Relation::Kind::kVisible});
      }
      return res;
    }
  }
  return res;
}

OracleResult check(Level level, const std::vector<HistoryEvent>& history) {
  const auto g = extract_dependencies(history);
  auto cv = check_cv(g);
  if (level == Level::kCV || !cv.pass) return cv;
  return level == Level::kSV ? check_sv(g) : check_postsi(g);
}

}  // namespace vicc
