// Symmetrized sparsity graphs and symbolic elimination on them.
#ifndef FDFILL_GRAPH_HPP_
#define FDFILL_GRAPH_HPP_

#include <algorithm>
#include <set>
#include <span>
#include <vector>

#include "fdfill/sparse.hpp"

namespace fdfill {

// Undirected graph of A + Aᵀ without self loops. Neighbor lists are sorted
// and duplicate free.
class EliminationGraph {
 public:
  EliminationGraph() = default;
  explicit EliminationGraph(std::vector<std::vector<Index>> adjacency)
      : adj_(std::move(adjacency)) {
    for (auto& nb : adj_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    for (Index v = 0; v < size(); ++v) {
      for (Index u : adj_[v]) {
        if (u < 0 || u >= size() || u == v ||
            !std::binary_search(adj_[u].begin(), adj_[u].end(), v)) {
          throw ConstructionError("adjacency is not a simple undirected graph");
        }
      }
    }
  }

  static EliminationGraph from_edges(Index n, std::span<const std::pair<Index, Index>> edges) {
    std::vector<std::vector<Index>> adj(n);
    for (auto [a, b] : edges) {
      if (a == b) continue;
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    return EliminationGraph(std::move(adj));
  }

  Index size() const { return static_cast<Index>(adj_.size()); }
  std::span<const Index> neighbors(Index v) const { return adj_[v]; }
  Index degree(Index v) const { return static_cast<Index>(adj_[v].size()); }
  Index edge_count() const {
    Index s = 0;
    for (const auto& nb : adj_) s += static_cast<Index>(nb.size());
    return s / 2;
  }

  // Consistent relabeling: node v becomes p(v).
  EliminationGraph relabeled(const Permutation& p) const {
    std::vector<std::vector<Index>> adj(adj_.size());
    for (Index v = 0; v < size(); ++v) {
      for (Index u : adj_[v]) adj[p(v)].push_back(p(u));
    }
    return EliminationGraph(std::move(adj));
  }

 private:
  std::vector<std::vector<Index>> adj_;
};

inline EliminationGraph build_graph(const SparseMatrix& a) {
  if (!a.square()) throw DimensionError("build_graph: matrix must be square");
  std::vector<std::vector<Index>> adj(a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i : a.col_rows(j)) {
      if (i == j) continue;
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  return EliminationGraph(std::move(adj));
}

// Plays the elimination game: eliminating v turns its uneliminated
// neighbors into a clique. Returns the number of edges added. Deliberately
// naive; this is the reference the fast paths are checked against.
inline Index elimination_game(const EliminationGraph& g, const Permutation& order) {
  const Index n = g.size();
  if (order.size() != n) throw DimensionError("elimination_game: order size mismatch");
  std::vector<std::set<Index>> adj(n);
  for (Index v = 0; v < n; ++v) adj[v].insert(g.neighbors(v).begin(), g.neighbors(v).end());
  std::vector<bool> gone(n, false);
  Index added = 0;
  for (Index k = 0; k < n; ++k) {
    const Index v = order.inverse()[k];
    std::vector<Index> live;
    for (Index u : adj[v]) {
      if (!gone[u]) live.push_back(u);
    }
    for (std::size_t a = 0; a < live.size(); ++a) {
      for (std::size_t b = a + 1; b < live.size(); ++b) {
        if (adj[live[a]].insert(live[b]).second) {
          adj[live[b]].insert(live[a]);
          ++added;
        }
      }
    }
    gone[v] = true;
  }
  return added;
}

// Elimination tree of the graph under `order`, in permuted labels.
inline std::vector<Index> elimination_tree(const EliminationGraph& g, const Permutation& order) {
  const Index n = g.size();
  std::vector<Index> parent(n, -1), ancestor(n, -1);
  for (Index k = 0; k < n; ++k) {
    const Index v = order.inverse()[k];
    for (Index u : g.neighbors(v)) {
      Index i = order(u);
      while (i != -1 && i < k) {
        Index next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) {
          parent[i] = k;
          break;
        }
        i = next;
      }
    }
  }
  return parent;
}

// Strictly-lower nonzeros of the symbolic Cholesky factor of the permuted
// graph, via row subtrees of the elimination tree.
inline Index symbolic_lower_count(const EliminationGraph& g, const Permutation& order) {
  const Index n = g.size();
  auto parent = elimination_tree(g, order);
  std::vector<Index> flag(n, -1);
  Index count = 0;
  for (Index k = 0; k < n; ++k) {
    flag[k] = k;
    const Index v = order.inverse()[k];
    for (Index u : g.neighbors(v)) {
      for (Index i = order(u); i < k && flag[i] != k; i = parent[i]) {
        ++count;
        flag[i] = k;
      }
    }
  }
  return count;
}

inline Index symbolic_fill(const EliminationGraph& g, const Permutation& order) {
  return symbolic_lower_count(g, order) - g.edge_count();
}

}  // namespace fdfill

#endif  // FDFILL_GRAPH_HPP_
