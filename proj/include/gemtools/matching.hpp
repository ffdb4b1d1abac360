#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gemtools/engine.hpp"
#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/min_cost_flow.hpp"
#include "gemtools/parallel.hpp"
#include "gemtools/spectral.hpp"

namespace gemtools {

struct MatchConfig {
  std::size_t min_dim = 2;  ///< D*
  std::optional<std::size_t> max_controls_per_case;  ///< unbounded when empty
  std::optional<std::size_t> max_cases_per_control;  ///< unbounded when empty
  std::int64_t cost_scale = 1'000'000;

  void validate() const {
    if (max_controls_per_case && *max_controls_per_case < 1) throw argument_error("max_controls_per_case must be >= 1");
    if (max_cases_per_control && *max_cases_per_control < 1) throw argument_error("max_cases_per_control must be >= 1");
    if (cost_scale < 1) throw argument_error("cost_scale must be positive");
  }
};

struct MatchedSet {
  std::size_t set_id = 0;
  std::vector<std::string> cases;
  std::vector<std::string> controls;
  double distance = 0.0;  ///< sum of used case-control distances in the set
};

struct Unmatched {
  std::string subject_id;
  std::string reason;
};

struct MatchResult {
  std::vector<MatchedSet> sets;
  double total_cost = 0.0;         ///< unscaled sum of used-arc distances
  std::int64_t scaled_cost = 0;    ///< sum of rounded integer arc costs
  std::vector<Unmatched> unmatched;
};

/// d = max(D, D*), limited to the dimensions the cluster's map retains.
constexpr std::size_t match_dimension(std::size_t d_significant, const MatchConfig& cfg,
                                      std::size_t retained = std::numeric_limits<std::size_t>::max()) noexcept {
  return std::min(std::max(d_significant, cfg.min_dim), retained);
}

/// Integer arc cost: cost_scale * distance rounded half to even.
inline std::int64_t scaled_distance(double distance, std::int64_t cost_scale) {
  return static_cast<std::int64_t>(std::nearbyint(static_cast<double>(cost_scale) * distance));
}

namespace detail {

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

/// Groups subjects into sets from used case-control pairs; sets ordered by
/// their first member in input order.
inline std::vector<MatchedSet> sets_from_pairs(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                               const std::vector<double>& pair_distance,
                                               std::span<const Status> roles, std::span<const std::string> ids) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& [a, b] : pairs) {
    const auto ra = find_root(parent, a), rb = find_root(parent, b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::size_t> set_of(n, n);
  std::vector<MatchedSet> sets;
  std::vector<bool> touched(n, false);
  for (const auto& [a, b] : pairs) touched[a] = touched[b] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!touched[i]) continue;
    const auto r = find_root(parent, i);
    if (set_of[r] == n) {
      set_of[r] = sets.size();
      sets.push_back({sets.size(), {}, {}, 0.0});
    }
    auto& set = sets[set_of[r]];
    (roles[i] == Status::Case ? set.cases : set.controls).push_back(ids[i]);
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) sets[set_of[find_root(parent, pairs[p].first)]].distance += pair_distance[p];
  return sets;
}

/// All subjects equivalent: one set per member of the smaller arm, the
/// larger arm dealt round-robin by index.
inline MatchResult match_without_distance(std::span<const Status> roles, std::span<const std::string> ids,
                                          const MatchConfig& cfg) {
  std::vector<std::size_t> cases, controls;
  for (std::size_t i = 0; i < roles.size(); ++i) (roles[i] == Status::Case ? cases : controls).push_back(i);
  const bool by_case = cases.size() <= controls.size();
  const auto& hubs = by_case ? cases : controls;
  const auto& spokes = by_case ? controls : cases;
  const auto bound = by_case ? cfg.max_controls_per_case : cfg.max_cases_per_control;
  const std::size_t per_hub = (spokes.size() + hubs.size() - 1) / hubs.size();
  if (bound && per_hub > *bound)
    throw constraint_error(std::string("infeasible: ") + (by_case ? "max_controls_per_case" : "max_cases_per_control") +
                           " = " + std::to_string(*bound) + " too small to cover every subject");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s < spokes.size(); ++s) pairs.emplace_back(hubs[s % hubs.size()], spokes[s]);
  MatchResult out;
  out.sets = sets_from_pairs(roles.size(), pairs, std::vector<double>(pairs.size(), 0.0), roles, ids);
  return out;
}

}  // namespace detail

/// Optimal full matching of cases to controls in `coords` (one row per
/// subject) by minimum-cost flow:
///   source -> case     [1, max_controls_per_case]
///   case -> control    [0, 1] at round(cost_scale * distance)
///   control -> sink    [1, max_cases_per_control]
///   sink -> source     [0, inf)
/// Matched sets are the connected components of the used case-control arcs.
inline MatchResult cc_match(const Eigen::MatrixXd& coords, std::span<const Status> roles,
                            std::span<const std::string> ids, const MatchConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = roles.size();
  if (static_cast<std::size_t>(coords.rows()) != n || ids.size() != n)
    throw argument_error("cc_match: coords, roles and ids differ in length");
  std::vector<std::size_t> cases, controls;
  for (std::size_t i = 0; i < n; ++i) (roles[i] == Status::Case ? cases : controls).push_back(i);

  if (cases.empty() || controls.empty()) {
    MatchResult out;
    for (std::size_t i = 0; i < n; ++i) out.unmatched.push_back({ids[i], "single_arm"});
    return out;
  }
  const std::size_t nc = cases.size(), nt = controls.size();
  const std::size_t cap_case = cfg.max_controls_per_case.value_or(nt);
  const std::size_t cap_control = cfg.max_cases_per_control.value_or(nc);
  if (nt > nc * cap_case)
    throw constraint_error("infeasible: max_controls_per_case = " + std::to_string(cap_case) + " cannot cover " +
                           std::to_string(nt) + " controls with " + std::to_string(nc) + " cases");
  if (nc > nt * cap_control)
    throw constraint_error("infeasible: max_cases_per_control = " + std::to_string(cap_control) + " cannot cover " +
                           std::to_string(nc) + " cases with " + std::to_string(nt) + " controls");
  if (coords.cols() == 0) return detail::match_without_distance(roles, ids, cfg);

  const std::size_t source = 0, sink = 1;
  MinCostFlow flow(2 + nc + nt);
  for (std::size_t c = 0; c < nc; ++c)
    flow.add_arc(source, 2 + c, 1, static_cast<std::int64_t>(std::min(cap_case, nt)), 0);
  std::vector<std::size_t> pair_arc;
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  std::vector<double> candidate_distance;
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t t = 0; t < nt; ++t) {
      const double dist = (coords.row(static_cast<Eigen::Index>(cases[c])) -
                           coords.row(static_cast<Eigen::Index>(controls[t])))
                              .norm();
      pair_arc.push_back(flow.add_arc(2 + c, 2 + nc + t, 0, 1, scaled_distance(dist, cfg.cost_scale)));
      candidates.emplace_back(cases[c], controls[t]);
      candidate_distance.push_back(dist);
    }
  for (std::size_t t = 0; t < nt; ++t)
    flow.add_arc(2 + nc + t, sink, 1, static_cast<std::int64_t>(std::min(cap_control, nc)), 0);
  flow.add_arc(sink, source, 0, MinCostFlow::kInfinite, 0);
  if (!flow.solve()) throw constraint_error("infeasible matching constraints");

  std::vector<std::pair<std::size_t, std::size_t>> used;
  std::vector<double> used_distance;
  MatchResult out;
  for (std::size_t p = 0; p < pair_arc.size(); ++p) {
    if (flow.flow(pair_arc[p]) <= 0) continue;
    used.push_back(candidates[p]);
    used_distance.push_back(candidate_distance[p]);
    out.total_cost += candidate_distance[p];
    out.scaled_cost += scaled_distance(candidate_distance[p], cfg.cost_scale);
  }
  out.sets = detail::sets_from_pairs(n, used, used_distance, roles, ids);
  return out;
}

struct LeafMatch {
  std::size_t leaf_id = 0;
  std::size_t n_cases = 0;
  std::size_t n_controls = 0;
  std::size_t D = 0;
  std::size_t d = 0;
  MatchResult result;
  std::string error;  ///< non-empty when this leaf failed; other leaves are unaffected
};

/// Per leaf: eigenmap over all leaf members (no projection), d = max(D, D*),
/// then cc_match. Subjects without a phenotype are reported unmatched.
inline std::vector<LeafMatch> match_all_leaves(const ClusterTree& tree, const GenotypeMatrix& g,
                                               const PhenotypeTable& phenotypes, const MatchConfig& cfg, double alpha,
                                               const SpectralOptions& spectral = {}, unsigned threads = 1) {
  cfg.validate();
  const auto leaf_ids = tree.leaves();
  std::vector<LeafMatch> out(leaf_ids.size());
  parallel_for(leaf_ids.size(), threads, [&](std::size_t slot) {
    const ClusterNode& leaf = tree.nodes[leaf_ids[slot]];
    LeafMatch& lm = out[slot];
    lm.leaf_id = leaf.id;
    std::vector<Index> rows;
    std::vector<Status> roles;
    std::vector<std::string> ids;
    for (auto s : leaf.subjects) {
      const auto& id = g.subject_ids()[s];
      const Status* st = phenotypes.find(id);
      if (!st) {
        lm.result.unmatched.push_back({id, "no_phenotype"});
        continue;
      }
      rows.push_back(s);
      roles.push_back(*st);
      ids.push_back(id);
      (*st == Status::Case ? lm.n_cases : lm.n_controls)++;
    }
    try {
      if (lm.n_cases == 0 || lm.n_controls == 0) {
        for (const auto& id : ids) lm.result.unmatched.push_back({id, "single_arm"});
        return;
      }
      Eigen::MatrixXd coords(static_cast<Eigen::Index>(rows.size()), 0);
      try {
        const Eigenmap map = build_eigenmap(g, leaf.subjects, alpha, spectral);
        lm.D = map.D;
        lm.d = match_dimension(map.D, cfg, map.retained());
        std::vector<Eigen::Index> pos;
        for (std::size_t r = 0, i = 0; i < leaf.subjects.size() && r < rows.size(); ++i)
          if (leaf.subjects[i] == rows[r]) {
            pos.push_back(static_cast<Eigen::Index>(i));
            ++r;
          }
        coords.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(lm.d));
        for (std::size_t r = 0; r < rows.size(); ++r)
          coords.row(static_cast<Eigen::Index>(r)) = map.coords.row(pos[r]).head(static_cast<Eigen::Index>(lm.d));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate) throw;
        lm.D = 0;
        lm.d = 0;  // no polymorphic SNPs: every subject is equivalent
      }
      auto unmatched = std::move(lm.result.unmatched);
      lm.result = cc_match(coords, roles, ids, cfg);
      unmatched.insert(unmatched.end(), lm.result.unmatched.begin(), lm.result.unmatched.end());
      lm.result.unmatched = std::move(unmatched);
    } catch (const Error& e) {
      lm.error = e.what();
      for (const auto& id : ids) lm.result.unmatched.push_back({id, "error"});
    }
  });
  return out;
}

}  // namespace gemtools
