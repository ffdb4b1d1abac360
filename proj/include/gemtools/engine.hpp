#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gemtools/clustering.hpp"
#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/parallel.hpp"
#include "gemtools/rng.hpp"
#include "gemtools/spectral.hpp"

namespace gemtools {

enum class EngineMode { DacGem, ClusterGem };

inline const char* to_string(EngineMode m) { return m == EngineMode::DacGem ? "dacgem" : "cluster"; }

struct EngineConfig {
  std::size_t base_size = 100;      ///< N
  std::size_t max_cluster = 50;     ///< B
  double alpha = 0.01;
  std::uint64_t seed = 1;
  double full_base_factor = 2.0;
  std::size_t min_split_size = 10;
  std::size_t max_depth = 32;
  EngineMode mode = EngineMode::DacGem;
  unsigned threads = 1;
  SpectralOptions spectral{};

  void validate() const {
    if (base_size < 2) throw argument_error("base size N must be at least 2");
    if (max_cluster < 1) throw argument_error("max cluster size B must be at least 1");
    if (!(alpha > 0.0 && alpha < 0.5)) throw argument_error("alpha must lie in (0, 0.5)");
    if (!(full_base_factor >= 1.0)) throw argument_error("full_base_factor must be >= 1");
    if (min_split_size < 1) throw argument_error("min_split_size must be positive");
  }

  /// Upper bound on the order of any kernel decomposed in DAC mode.
  std::size_t matrix_order_bound() const {
    const auto full = static_cast<std::size_t>(std::ceil(full_base_factor * static_cast<double>(base_size)));
    return std::max(full, max_cluster > 0 ? max_cluster - 1 : 0);
  }
};

enum class StopReason { None, Size, Homogeneous, MinSize, Depth, Degenerate };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::None: return "none";
    case StopReason::Size: return "size";
    case StopReason::Homogeneous: return "homogeneous";
    case StopReason::MinSize: return "min_size";
    case StopReason::Depth: return "depth";
    case StopReason::Degenerate: return "degenerate";
  }
  return "none";
}

inline StopReason stop_reason_from_string(const std::string& s) {
  for (auto r : {StopReason::None, StopReason::Size, StopReason::Homogeneous, StopReason::MinSize,
                 StopReason::Depth, StopReason::Degenerate})
    if (s == to_string(r)) return r;
  throw value_error("unknown stop reason '" + s + "'");
}

struct ClusterNode {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  std::size_t child_index = 0;  ///< position among the parent's children
  std::size_t depth = 0;
  std::vector<Index> subjects;  ///< ascending row indices
  std::vector<Index> base;      ///< ascending; empty when no split was attempted
  std::size_t D = 0;
  std::vector<double> eigenvalues;
  TwReport tw;
  std::size_t k = 0;
  std::vector<std::size_t> children;
  StopReason stop_reason = StopReason::None;
  std::string diagnostic;
  std::size_t matrix_order = 0;  ///< order of the decomposed kernel, 0 if none
  double seconds = 0.0;
  /// Node subjects x max(D, 1) coordinates (base rows exact, the rest
  /// projected); empty when no eigenmap was built.
  Eigen::MatrixXd coords;

  bool is_leaf() const noexcept { return children.empty(); }
  bool has_map() const noexcept { return matrix_order > 0; }
};

struct ClusterTree {
  std::vector<ClusterNode> nodes;
  EngineMode mode = EngineMode::DacGem;
  std::size_t peak_matrix_order = 0;

  const ClusterNode& root() const { return nodes.at(0); }

  std::vector<std::size_t> leaves() const {
    std::vector<std::size_t> out;
    for (const auto& n : nodes)
      if (n.is_leaf()) out.push_back(n.id);
    return out;
  }

  /// '/'-joined child indices from the root ("" for the root itself).
  std::string node_path(std::size_t id) const {
    std::vector<std::size_t> steps;
    for (auto cur = id; nodes.at(cur).parent; cur = *nodes.at(cur).parent) steps.push_back(nodes[cur].child_index);
    std::string path;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
      if (!path.empty()) path += '/';
      path += std::to_string(*it);
    }
    return path;
  }

  /// Leaf id per subject row (n = root size).
  std::vector<std::size_t> leaf_labels() const {
    std::vector<std::size_t> out(root().subjects.size(), 0);
    for (const auto& n : nodes)
      if (n.is_leaf())
        for (auto s : n.subjects) out.at(s) = n.id;
    return out;
  }

  std::vector<Assignment> assignments(const GenotypeMatrix& g) const {
    std::vector<Assignment> rows(g.n());
    for (const auto& n : nodes) {
      if (!n.is_leaf()) continue;
      const auto path = node_path(n.id);
      for (auto s : n.subjects) rows.at(s) = {g.subject_ids()[s], path, n.id};
    }
    return rows;
  }
};

struct BaseSelection {
  std::vector<Index> indices;  ///< ascending
  bool full = false;           ///< every subject is in the base; no projection needed
};

/// Uniform base sample of `n_base` subjects (partial Fisher-Yates over the
/// sorted list). Small sets, |subjects| <= factor * N, are taken whole.
inline BaseSelection select_base(std::vector<Index> subjects, std::size_t n_base, double full_base_factor, Rng& rng) {
  std::sort(subjects.begin(), subjects.end());
  if (static_cast<double>(subjects.size()) <= full_base_factor * static_cast<double>(n_base) ||
      n_base >= subjects.size())
    return {std::move(subjects), true};
  return {sample_without_replacement(std::move(subjects), n_base, rng), false};
}

struct SplitResult {
  BaseSelection base;
  std::size_t D = 0;
  std::size_t k = 1;
  std::vector<double> eigenvalues;
  TwReport tw;
  std::vector<std::size_t> labels;  ///< per node subject, in [0, k)
  Eigen::MatrixXd coords;           ///< node subjects x max(D, 1)
  std::size_t matrix_order = 0;
  bool degenerate = false;
  std::string diagnostic;
};

/// One dacGem step on a node: sample a base, build its eigenmap, Ward-cluster
/// the base on the D significant coordinates, project the remaining
/// subjects and attach each to its nearest base subject's cluster.
inline SplitResult split_node(const GenotypeMatrix& g, const std::vector<Index>& subjects, const EngineConfig& cfg,
                              Rng& rng) {
  SplitResult out;
  out.base = select_base(subjects, cfg.base_size, cfg.full_base_factor, rng);
  out.labels.assign(subjects.size(), 0);

  std::optional<Eigenmap> map;
  try {
    map = build_eigenmap(g, out.base.indices, cfg.alpha, cfg.spectral);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
    out.degenerate = true;
    out.diagnostic = e.what();
    out.matrix_order = out.base.indices.size();
    return out;
  }
  out.matrix_order = map->order();
  out.D = map->D;
  out.tw = map->tw;
  out.eigenvalues.assign(map->eigenvalues.data(), map->eigenvalues.data() + map->eigenvalues.size());

  // position of every node subject: base rows first map to their coords row
  std::vector<Index> unmarked;
  std::vector<std::ptrdiff_t> base_row(subjects.size(), -1);
  {
    std::size_t b = 0;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      if (b < out.base.indices.size() && out.base.indices[b] == subjects[i])
        base_row[i] = static_cast<std::ptrdiff_t>(b++);
      else
        unmarked.push_back(subjects[i]);
    }
  }
  const Eigen::MatrixXd projected = nystrom_project(*map, g, unmarked, cfg.spectral);

  const auto keep = static_cast<Eigen::Index>(std::min<std::size_t>(std::max<std::size_t>(out.D, 1), map->retained()));
  out.coords.resize(static_cast<Eigen::Index>(subjects.size()), keep);
  for (std::size_t i = 0, u = 0; i < subjects.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (base_row[i] >= 0)
      out.coords.row(r) = map->coords.row(base_row[i]).head(keep);
    else
      out.coords.row(r) = projected.row(static_cast<Eigen::Index>(u++)).head(keep);
  }

  if (out.D == 0) return out;

  const auto d = static_cast<Eigen::Index>(out.D);
  out.k = std::min(choose_k(out.D), out.base.indices.size());
  const Eigen::MatrixXd base_coords = map->coords.leftCols(d);
  const ClusterLabels base_labels = ward_cluster(base_coords, out.k);
  const auto unmarked_labels = assign_nearest(projected.leftCols(d), base_coords, base_labels);
  for (std::size_t i = 0, u = 0; i < subjects.size(); ++i)
    out.labels[i] = base_row[i] >= 0 ? base_labels.labels[static_cast<std::size_t>(base_row[i])] : unmarked_labels[u++];
  return out;
}

namespace detail {

inline StopReason expansion_block(const ClusterNode& node, const EngineConfig& cfg) {
  if (cfg.mode == EngineMode::DacGem && node.parent && node.subjects.size() < cfg.max_cluster) return StopReason::Size;
  if (node.subjects.size() < cfg.min_split_size || node.subjects.size() < 2) return StopReason::MinSize;
  if (node.depth >= cfg.max_depth) return StopReason::Depth;
  return StopReason::None;
}

inline ClusterTree run_engine(const GenotypeMatrix& g, EngineConfig cfg) {
  cfg.validate();
  if (g.n() < 2) throw argument_error("need at least 2 subjects");
  ClusterTree tree;
  tree.mode = cfg.mode;
  ClusterNode root;
  root.subjects.resize(g.n());
  std::iota(root.subjects.begin(), root.subjects.end(), Index{0});
  tree.nodes.push_back(std::move(root));

  // Splits run with single-threaded kernels when nodes are processed in
  // parallel; results are identical either way.
  EngineConfig node_cfg = cfg;
  std::vector<std::size_t> level{0};
  while (!level.empty()) {
    std::vector<std::optional<SplitResult>> results(level.size());
    std::vector<double> seconds(level.size(), 0.0);
    node_cfg.spectral.threads = level.size() > 1 ? 1 : cfg.threads;
    parallel_for(level.size(), level.size() > 1 ? cfg.threads : 1, [&](std::size_t slot) {
      const ClusterNode& node = tree.nodes[level[slot]];
      if (expansion_block(node, cfg) != StopReason::None) return;
      const auto start = std::chrono::steady_clock::now();
      Rng rng = Rng::stream(cfg.seed, node.id);
      results[slot] = split_node(g, node.subjects, node_cfg, rng);
      seconds[slot] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });

    std::vector<std::size_t> next;
    for (std::size_t slot = 0; slot < level.size(); ++slot) {
      const std::size_t id = level[slot];
      if (!results[slot]) {
        tree.nodes[id].stop_reason = expansion_block(tree.nodes[id], cfg);
        continue;
      }
      SplitResult& r = *results[slot];
      {
        ClusterNode& node = tree.nodes[id];
        node.base = std::move(r.base.indices);
        node.D = r.D;
        node.eigenvalues = std::move(r.eigenvalues);
        node.tw = std::move(r.tw);
        node.matrix_order = r.matrix_order;
        node.seconds = seconds[slot];
        node.coords = std::move(r.coords);
        node.diagnostic = std::move(r.diagnostic);
        tree.peak_matrix_order = std::max(tree.peak_matrix_order, r.matrix_order);
        if (r.degenerate) {
          node.stop_reason = StopReason::Degenerate;
          continue;
        }
        if (r.D == 0 || r.k < 2) {
          node.stop_reason = StopReason::Homogeneous;
          continue;
        }
        node.k = r.k;
      }
      // children in order of their smallest subject index
      const auto parent_subjects = tree.nodes[id].subjects;
      std::vector<std::size_t> slot_of_label(r.k, r.k);
      std::vector<std::vector<Index>> members;
      for (std::size_t i = 0; i < parent_subjects.size(); ++i) {
        auto& s = slot_of_label[r.labels[i]];
        if (s == r.k) {
          s = members.size();
          members.emplace_back();
        }
        members[s].push_back(parent_subjects[i]);
      }
      for (std::size_t c = 0; c < members.size(); ++c) {
        ClusterNode child;
        child.id = tree.nodes.size();
        child.parent = id;
        child.child_index = c;
        child.depth = tree.nodes[id].depth + 1;
        child.subjects = std::move(members[c]);
        tree.nodes[id].children.push_back(child.id);
        next.push_back(child.id);
        tree.nodes.push_back(std::move(child));
      }
      tree.nodes[id].k = members.size();
    }
    level = std::move(next);
  }
  return tree;
}

}  // namespace detail

/// dacGem: the root is always split; any other cluster is split again while
/// it holds B or more subjects and its eigenmap has D > 0.
inline ClusterTree dac_gem(const GenotypeMatrix& g, EngineConfig cfg) {
  cfg.mode = EngineMode::DacGem;
  return detail::run_engine(g, cfg);
}

/// clusterGem: split until every leaf has D = 0 (or a stop guard fires).
inline ClusterTree cluster_gem(const GenotypeMatrix& g, EngineConfig cfg) {
  cfg.mode = EngineMode::ClusterGem;
  return detail::run_engine(g, cfg);
}

}  // namespace gemtools
