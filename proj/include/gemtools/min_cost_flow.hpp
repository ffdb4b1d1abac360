#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "gemtools/error.hpp"

namespace gemtools {

/// Minimum-cost feasible flow with arc lower bounds and non-negative costs.
///
/// Lower bounds are removed by the usual demand transformation and a
/// return arc sink -> source closes the circulation; the transformed
/// problem is solved by successive shortest paths (Dijkstra with
/// potentials). Arcs are scanned in insertion order and ties resolve to
/// the smallest node index, so the solution is deterministic.
class MinCostFlow {
 public:
  static constexpr std::int64_t kInfinite = std::numeric_limits<std::int64_t>::max() / 4;

  explicit MinCostFlow(std::size_t nodes) : graph_(nodes + 2), excess_(nodes + 2, 0), user_nodes_(nodes) {}

  /// Adds u -> v carrying a flow in [lower, upper] at `cost` per unit.
  /// Returns an arc handle for flow().
  std::size_t add_arc(std::size_t u, std::size_t v, std::int64_t lower, std::int64_t upper, std::int64_t cost) {
    if (u >= user_nodes_ || v >= user_nodes_) throw argument_error("MinCostFlow: node out of range");
    if (lower < 0 || upper < lower) throw argument_error("MinCostFlow: invalid bounds");
    if (cost < 0) throw argument_error("MinCostFlow: negative cost");
    const std::size_t handle = handles_.size();
    handles_.push_back({u, graph_[u].size()});
    lower_.push_back(lower);
    push_edge(u, v, upper - lower, cost);
    excess_[v] += lower;
    excess_[u] -= lower;
    base_cost_ += lower * cost;
    return handle;
  }

  /// Solves; returns false when the lower bounds cannot be met.
  bool solve() {
    const std::size_t s = user_nodes_, t = user_nodes_ + 1;
    std::int64_t required = 0;
    for (std::size_t v = 0; v < user_nodes_; ++v) {
      if (excess_[v] > 0) {
        push_edge(s, v, excess_[v], 0);
        required += excess_[v];
      } else if (excess_[v] < 0) {
        push_edge(v, t, -excess_[v], 0);
      }
    }
    const std::size_t n = graph_.size();
    std::vector<std::int64_t> potential(n, 0), dist(n);
    std::vector<std::size_t> prev_node(n), prev_edge(n);
    std::int64_t flow = 0;
    cost_ = base_cost_;
    while (flow < required) {
      dist.assign(n, kInfinite);
      dist[s] = 0;
      using Item = std::pair<std::int64_t, std::size_t>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
      heap.push({0, s});
      while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (std::size_t e = 0; e < graph_[u].size(); ++e) {
          const Edge& edge = graph_[u][e];
          if (edge.capacity <= 0) continue;
          const std::int64_t nd = d + edge.cost + potential[u] - potential[edge.to];
          if (nd < dist[edge.to]) {
            dist[edge.to] = nd;
            prev_node[edge.to] = u;
            prev_edge[edge.to] = e;
            heap.push({nd, edge.to});
          }
        }
      }
      if (dist[t] == kInfinite) return false;
      for (std::size_t v = 0; v < n; ++v)
        if (dist[v] < kInfinite) potential[v] += dist[v];
      std::int64_t push = required - flow;
      for (std::size_t v = t; v != s; v = prev_node[v]) push = std::min(push, graph_[prev_node[v]][prev_edge[v]].capacity);
      for (std::size_t v = t; v != s; v = prev_node[v]) {
        Edge& edge = graph_[prev_node[v]][prev_edge[v]];
        edge.capacity -= push;
        graph_[v][edge.reverse].capacity += push;
        cost_ += push * edge.cost;
      }
      flow += push;
    }
    return true;
  }

  /// Flow on an arc returned by add_arc (valid after a successful solve).
  std::int64_t flow(std::size_t handle) const {
    const auto [u, e] = handles_.at(handle);
    const Edge& edge = graph_[u][e];
    return lower_[handle] + graph_[edge.to][edge.reverse].capacity;
  }

  std::int64_t total_cost() const noexcept { return cost_; }

 private:
  struct Edge {
    std::size_t to;
    std::size_t reverse;
    std::int64_t capacity;
    std::int64_t cost;
  };

  void push_edge(std::size_t u, std::size_t v, std::int64_t cap, std::int64_t cost) {
    graph_[u].push_back({v, graph_[v].size(), cap, cost});
    graph_[v].push_back({u, graph_[u].size() - 1, 0, -cost});
  }

  std::vector<std::vector<Edge>> graph_;
  std::vector<std::int64_t> excess_;
  std::vector<std::pair<std::size_t, std::size_t>> handles_;
  std::vector<std::int64_t> lower_;
  std::size_t user_nodes_;
  std::int64_t base_cost_ = 0;
  std::int64_t cost_ = 0;
};

}  // namespace gemtools
