// Fill-reducing orderings from the minimum-degree family.
//
// exact_min_degree works on the explicit elimination graph and is meant for
// small reference problems. amd works on a quotient graph (elements +
// supervariables) with approximate external degrees, so its cost stays close
// to the size of the input graph.
#ifndef FDFILL_ORDERING_HPP_
#define FDFILL_ORDERING_HPP_

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fdfill/graph.hpp"
#include "fdfill/sparse.hpp"

namespace fdfill {

enum class OrderingKind { Natural, ExactMinDegree, Amd };

inline std::string_view to_string(OrderingKind k) {
  switch (k) {
    case OrderingKind::Natural: return "natural";
    case OrderingKind::ExactMinDegree: return "exact_md";
    case OrderingKind::Amd: return "amd";
  }
  return "?";
}

inline OrderingKind parse_ordering(std::string_view s) {
  if (s == "natural") return OrderingKind::Natural;
  if (s == "exact_md" || s == "md") return OrderingKind::ExactMinDegree;
  if (s == "amd") return OrderingKind::Amd;
  throw std::invalid_argument("unknown ordering '" + std::string(s) + "'");
}

struct OrderingResult {
  Permutation permutation;
  // Strictly-lower fill entries (edges added by symbolic elimination).
  Index predicted_fill = 0;
};

inline OrderingResult natural_ordering(const EliminationGraph& g) {
  auto p = Permutation::identity(g.size());
  Index fill = symbolic_fill(g, p);
  return {std::move(p), fill};
}

// Eliminates a node of minimum current degree at every step, lowest index
// first on ties.
inline OrderingResult exact_min_degree(const EliminationGraph& g) {
  const Index n = g.size();
  std::vector<std::set<Index>> adj(n);
  std::set<std::pair<Index, Index>> queue;
  for (Index v = 0; v < n; ++v) {
    adj[v].insert(g.neighbors(v).begin(), g.neighbors(v).end());
    queue.emplace(g.degree(v), v);
  }
  std::vector<Index> order;
  order.reserve(n);
  Index fill = 0;
  while (!queue.empty()) {
    const Index v = queue.begin()->second;
    queue.erase(queue.begin());
    order.push_back(v);
    std::vector<Index> nb(adj[v].begin(), adj[v].end());
    for (Index u : nb) {
      queue.erase({static_cast<Index>(adj[u].size()), u});
      adj[u].erase(v);
    }
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        if (adj[nb[a]].insert(nb[b]).second) {
          adj[nb[b]].insert(nb[a]);
          ++fill;
        }
      }
    }
    for (Index u : nb) queue.emplace(static_cast<Index>(adj[u].size()), u);
    adj[v].clear();
  }
  return {Permutation::from_order(std::move(order)), fill};
}

namespace detail {

// Quotient-graph approximate minimum degree. Node ids double as element ids:
// when supervariable p is eliminated it becomes element p.
class AmdState {
 public:
  explicit AmdState(const EliminationGraph& g)
      : n_(g.size()),
        status_(n_, Status::Variable),
        weight_(n_, 1),
        degree_(n_, 0),
        elem_weight_(n_, 0),
        adj_vars_(n_),
        adj_elems_(n_),
        elem_vars_(n_),
        members_(n_),
        mark_(n_, 0),
        w_(n_, 0),
        w_stamp_(n_, 0) {
    for (Index v = 0; v < n_; ++v) {
      auto nb = g.neighbors(v);
      adj_vars_[v].assign(nb.begin(), nb.end());
      degree_[v] = static_cast<Index>(nb.size());
      members_[v].push_back(v);
      queue_.emplace(degree_[v], v);
    }
  }

  std::vector<Index> run() {
    std::vector<Index> order;
    order.reserve(n_);
    while (!queue_.empty()) {
      const Index p = queue_.begin()->second;
      queue_.erase(queue_.begin());
      eliminate(p, order);
    }
    return order;
  }

 private:
  enum class Status : std::uint8_t { Variable, Merged, Element, Absorbed };

  bool live_element(Index e) const { return status_[e] == Status::Element; }
  bool live_variable(Index v) const { return status_[v] == Status::Variable; }

  std::uint64_t next_stamp() { return ++stamp_; }

  void eliminate(Index p, std::vector<Index>& order) {
    // Lp = (A_p ∪ L_e for e ∈ E_p) \ {p}; every e ∈ E_p is absorbed into p.
    const auto lp_stamp = next_stamp();
    mark_[p] = lp_stamp;
    std::vector<Index> lp;
    for (Index e : adj_elems_[p]) {
      if (!live_element(e)) continue;
      for (Index v : elem_vars_[e]) {
        if (live_variable(v) && mark_[v] != lp_stamp) {
          mark_[v] = lp_stamp;
          lp.push_back(v);
        }
      }
      status_[e] = Status::Absorbed;
      elem_vars_[e].clear();
    }
    for (Index v : adj_vars_[p]) {
      if (live_variable(v) && mark_[v] != lp_stamp) {
        mark_[v] = lp_stamp;
        lp.push_back(v);
      }
    }
    std::sort(lp.begin(), lp.end());

    status_[p] = Status::Element;
    adj_vars_[p] = {};
    adj_elems_[p] = {};
    order.insert(order.end(), members_[p].begin(), members_[p].end());
    eliminated_ += weight_[p];
    members_[p] = {};

    for (Index i : lp) queue_.erase({degree_[i], i});

    // Lists of Lp variables: drop dead elements, add p, and prune variables
    // now reachable through p.
    for (Index i : lp) {
      auto& el = adj_elems_[i];
      std::erase_if(el, [&](Index e) { return !live_element(e); });
      el.push_back(p);
      auto& vl = adj_vars_[i];
      std::erase_if(vl, [&](Index v) {
        return !live_variable(v) || mark_[v] == lp_stamp || v == i;
      });
    }

    // w(e) = |L_e \ Lp| for elements touching Lp.
    const auto w_stamp = next_stamp();
    for (Index i : lp) {
      for (Index e : adj_elems_[i]) {
        if (e == p) continue;
        if (w_stamp_[e] != w_stamp) {
          w_stamp_[e] = w_stamp;
          w_[e] = elem_weight_[e];
        }
        w_[e] -= weight_[i];
      }
    }

    // Aggressive absorption: L_e ⊆ Lp.
    for (Index i : lp) {
      for (Index e : adj_elems_[i]) {
        if (e != p && live_element(e) && w_[e] == 0) {
          status_[e] = Status::Absorbed;
          elem_vars_[e].clear();
        }
      }
    }
    for (Index i : lp) {
      std::erase_if(adj_elems_[i], [&](Index e) { return !live_element(e); });
      std::sort(adj_elems_[i].begin(), adj_elems_[i].end());
      std::sort(adj_vars_[i].begin(), adj_vars_[i].end());
    }

    merge_indistinguishable(lp);
    std::erase_if(lp, [&](Index v) { return !live_variable(v); });

    Index lp_weight = 0;
    for (Index i : lp) lp_weight += weight_[i];
    elem_vars_[p] = lp;
    elem_weight_[p] = lp_weight;

    const Index remaining = n_ - eliminated_;
    for (Index i : lp) {
      Index external = lp_weight - weight_[i];
      for (Index e : adj_elems_[i]) {
        if (e != p) external += w_[e];
      }
      for (Index v : adj_vars_[i]) external += weight_[v];
      Index d = std::min({remaining - weight_[i], degree_[i] + lp_weight - weight_[i], external});
      degree_[i] = std::max<Index>(d, 0);
      queue_.emplace(degree_[i], i);
    }
  }

  // Variables of Lp with identical element and variable lists are merged
  // into the lowest-numbered one.
  void merge_indistinguishable(const std::vector<Index>& lp) {
    std::vector<std::pair<std::uint64_t, Index>> keyed;
    keyed.reserve(lp.size());
    for (Index i : lp) {
      std::uint64_t h = 0;
      for (Index e : adj_elems_[i]) h += static_cast<std::uint64_t>(e) * 0x9E3779B97F4A7C15ull + 1;
      for (Index v : adj_vars_[i]) h += static_cast<std::uint64_t>(v) * 0xC2B2AE3D27D4EB4Full + 7;
      keyed.emplace_back(h, i);
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t a = 0; a < keyed.size();) {
      std::size_t b = a;
      while (b < keyed.size() && keyed[b].first == keyed[a].first) ++b;
      for (std::size_t x = a; x < b; ++x) {
        const Index i = keyed[x].second;
        if (!live_variable(i)) continue;
        for (std::size_t y = x + 1; y < b; ++y) {
          const Index j = keyed[y].second;
          if (!live_variable(j)) continue;
          if (adj_elems_[i] == adj_elems_[j] && adj_vars_[i] == adj_vars_[j]) {
            weight_[i] += weight_[j];
            weight_[j] = 0;
            status_[j] = Status::Merged;
            members_[i].insert(members_[i].end(), members_[j].begin(), members_[j].end());
            members_[j] = {};
            adj_elems_[j] = {};
            adj_vars_[j] = {};
          }
        }
      }
      a = b;
    }
  }

  Index n_;
  Index eliminated_ = 0;
  std::vector<Status> status_;
  std::vector<Index> weight_;
  std::vector<Index> degree_;
  std::vector<Index> elem_weight_;
  std::vector<std::vector<Index>> adj_vars_;
  std::vector<std::vector<Index>> adj_elems_;
  std::vector<std::vector<Index>> elem_vars_;
  std::vector<std::vector<Index>> members_;
  std::set<std::pair<Index, Index>> queue_;
  std::vector<std::uint64_t> mark_;
  std::vector<Index> w_;
  std::vector<std::uint64_t> w_stamp_;
  std::uint64_t stamp_ = 0;
};

}  // namespace detail

inline OrderingResult amd(const EliminationGraph& g) {
  auto order = detail::AmdState(g).run();
  auto p = Permutation::from_order(std::move(order));
  Index fill = symbolic_fill(g, p);
  return {std::move(p), fill};
}

inline OrderingResult compute_ordering(const EliminationGraph& g, OrderingKind kind) {
  switch (kind) {
    case OrderingKind::Natural: return natural_ordering(g);
    case OrderingKind::ExactMinDegree: return exact_min_degree(g);
    case OrderingKind::Amd: return amd(g);
  }
  throw std::invalid_argument("unknown ordering kind");
}

}  // namespace fdfill

#endif  // FDFILL_ORDERING_HPP_
