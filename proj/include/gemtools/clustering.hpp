#pragma once

#include <Eigen/Dense>
#include <limits>
#include <numeric>
#include <vector>

#include "gemtools/error.hpp"
#include "gemtools/parallel.hpp"

namespace gemtools {

struct ClusterLabels {
  std::vector<std::size_t> labels;  ///< one per subject, in [0, k)
  std::size_t k = 0;
};

/// One agglomeration step. Clusters are named by their smallest member
/// index, so `a < b` and the merged cluster keeps the name `a`.
struct WardMerge {
  std::size_t a = 0;
  std::size_t b = 0;
  double distance = 0.0;  ///< Lance-Williams Ward dissimilarity at merge time
  std::size_t size = 0;   ///< members after the merge
};

/// Full Ward agglomeration on squared Euclidean distances between rows.
///
/// Each step merges the pair with minimum dissimilarity, ties going to the
/// lexicographically smallest (a, b). A per-row nearest-neighbour cache
/// (neighbour restricted to higher indices) keeps typical cost at O(N^2).
inline std::vector<WardMerge> ward_merges(const Eigen::MatrixXd& coords) {
  const std::size_t n = static_cast<std::size_t>(coords.rows());
  std::vector<double> d(n * n, 0.0);
  auto dist = [&](std::size_t i, std::size_t j) -> double& { return d[i * n + j]; };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (coords.row(i) - coords.row(j)).squaredNorm();
      dist(i, j) = v;
      dist(j, i) = v;
    }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, inf);

  auto rescan = [&](std::size_t i) {
    nn[i] = n;
    nn_dist[i] = inf;
    for (std::size_t j = i + 1; j < n; ++j)
      if (active[j] && dist(i, j) < nn_dist[i]) {
        nn_dist[i] = dist(i, j);
        nn[i] = j;
      }
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  std::vector<WardMerge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = n;
    double best = inf;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i] && nn[i] < n && nn_dist[i] < best) {
        best = nn_dist[i];
        a = i;
      }
    const std::size_t b = nn[a];
    const double dab = dist(a, b);
    const auto na = static_cast<double>(size[a]);
    const auto nb = static_cast<double>(size[b]);

    active[b] = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a) continue;
      const auto nk = static_cast<double>(size[k]);
      const double v = ((na + nk) * dist(a, k) + (nb + nk) * dist(b, k) - nk * dab) / (na + nb + nk);
      dist(a, k) = v;
      dist(k, a) = v;
    }
    size[a] += size[b];
    merges.push_back({a, b, dab, size[a]});

    rescan(a);
    for (std::size_t k = 0; k < a; ++k) {
      if (!active[k]) continue;
      if (nn[k] == a || nn[k] == b) {
        rescan(k);
      } else if (dist(k, a) < nn_dist[k] || (dist(k, a) == nn_dist[k] && a < nn[k])) {
        nn_dist[k] = dist(k, a);
        nn[k] = a;
      }
    }
    for (std::size_t k = a + 1; k < b; ++k)
      if (active[k] && nn[k] == b) rescan(k);
  }
  return merges;
}

namespace detail {

/// Labels 0..k-1 numbered by each group's smallest member index.
inline ClusterLabels relabel_by_first_member(const std::vector<std::size_t>& root) {
  ClusterLabels out;
  out.labels.resize(root.size());
  std::vector<std::size_t> id(root.size(), root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    auto& slot = id[root[i]];
    if (slot == root.size()) slot = out.k++;
    out.labels[i] = slot;
  }
  return out;
}

}  // namespace detail

/// Ward clustering cut at k groups. Labels are renumbered so that group 0
/// holds subject 0, the next new group holds the next unseen subject, etc.
inline ClusterLabels ward_cluster(const Eigen::MatrixXd& coords, std::size_t k) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (k == 0 || k > n)
    throw argument_error("ward_cluster: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  if (coords.cols() == 0 && k > 1) throw argument_error("ward_cluster: coordinates have no columns");
  std::vector<std::size_t> owner(n);
  std::iota(owner.begin(), owner.end(), 0);
  if (k < n) {
    const auto merges = ward_merges(coords);
    for (std::size_t s = 0; s < n - k; ++s)
      for (auto& o : owner)
        if (o == merges[s].b) o = merges[s].a;
  }
  return detail::relabel_by_first_member(owner);
}

/// Number of child clusters for a node with d significant dimensions.
constexpr std::size_t choose_k(std::size_t d) noexcept { return d + 1; }

/// Label of the Euclidean-nearest base row for each projected row; ties go
/// to the lowest base index.
inline std::vector<std::size_t> assign_nearest(const Eigen::MatrixXd& projected, const Eigen::MatrixXd& base_coords,
                                               const ClusterLabels& base_labels, unsigned threads = 1) {
  if (base_coords.rows() == 0) throw argument_error("assign_nearest: empty base");
  if (projected.cols() != base_coords.cols()) throw argument_error("assign_nearest: dimension mismatch");
  if (base_labels.labels.size() != static_cast<std::size_t>(base_coords.rows()))
    throw argument_error("assign_nearest: label count does not match base rows");
  std::vector<std::size_t> out(static_cast<std::size_t>(projected.rows()));
  parallel_for(out.size(), threads, [&](std::size_t p) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < base_coords.rows(); ++b) {
      const double dd = (projected.row(static_cast<Eigen::Index>(p)) - base_coords.row(b)).squaredNorm();
      if (dd < best_d) {
        best_d = dd;
        best = b;
      }
    }
    out[p] = base_labels.labels[static_cast<std::size_t>(best)];
  });
  return out;
}

}  // namespace gemtools
