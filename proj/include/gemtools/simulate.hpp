#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/parallel.hpp"
#include "gemtools/rng.hpp"

namespace gemtools {

/// Balding-Nichols panel: each population draws its allele frequency from
/// Beta(p (1 - F) / F, (1 - p)(1 - F) / F) around an ancestral p.
struct SimConfig {
  std::size_t n_pops = 1;
  std::vector<std::size_t> subjects_per_pop{100};
  std::size_t m = 1000;
  std::vector<double> fst{0.0};  ///< one per population, or a single shared value
  double maf_low = 0.05;
  double maf_high = 0.5;
  double missing_rate = 0.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Two-level model: super-populations diverge from the ancestor, and
/// sub-populations diverge from their super-population.
struct NestedSimConfig {
  struct Group {
    double fst = 0.0;                       ///< super-population vs ancestor
    double sub_fst = 0.0;                   ///< sub-population vs super-population
    std::vector<std::size_t> sub_sizes;     ///< subjects per sub-population
  };
  std::vector<Group> groups;
  std::size_t m = 1000;
  double maf_low = 0.05;
  double maf_high = 0.5;
  double missing_rate = 0.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct SimPanel {
  GenotypeMatrix genotypes;
  std::vector<std::size_t> labels;        ///< finest population index per subject
  std::vector<std::size_t> group_labels;  ///< super-population index (equals labels for flat panels)
};

/// Beta draw around `p` with divergence `f`; f == 0 returns p.
inline double balding_nichols_frequency(double p, double f, Rng& rng) {
  if (f == 0.0) return p;
  if (!(f > 0.0 && f < 1.0)) throw argument_error("Balding-Nichols F must lie in [0, 1)");
  const double shape = (1.0 - f) / f;
  return std::clamp(rng.beta(p * shape, (1.0 - p) * shape), 0.0, 1.0);
}

namespace detail {

inline void check_sim_common(std::size_t m, double lo, double hi, double missing) {
  if (m == 0) throw argument_error("simulation needs at least one SNP");
  if (!(lo > 0.0 && lo <= hi && hi <= 0.5)) throw argument_error("ancestral MAF range must satisfy 0 < low <= high <= 0.5");
  if (!(missing >= 0.0 && missing < 1.0)) throw argument_error("missing rate must lie in [0, 1)");
}

inline std::string pad_id(const char* prefix, std::size_t i, std::size_t total) {
  std::string digits = std::to_string(i + 1);
  const std::size_t width = std::to_string(total).size();
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

/// Fills column `snp` given per-subject population frequencies.
inline void fill_column(std::vector<std::int8_t>& values, std::size_t m, std::size_t snp,
                        const std::vector<std::size_t>& pop_of, const std::vector<double>& freq, double missing,
                        Rng& rng) {
  for (std::size_t i = 0; i < pop_of.size(); ++i) {
    const double q = freq[pop_of[i]];
    const int count = static_cast<int>(rng.bernoulli(q)) + static_cast<int>(rng.bernoulli(q));
    const bool miss = missing > 0.0 && rng.bernoulli(missing);
    values[i * m + snp] = miss ? GenotypeMatrix::kMissing : static_cast<std::int8_t>(count);
  }
}

inline SimPanel assemble_panel(std::vector<std::int8_t> values, std::size_t m, std::vector<std::size_t> labels,
                               std::vector<std::size_t> group_labels) {
  std::vector<std::string> subjects, snps;
  for (std::size_t i = 0; i < labels.size(); ++i) subjects.push_back(pad_id("ind", i, labels.size()));
  for (std::size_t j = 0; j < m; ++j) snps.push_back(pad_id("snp", j, m));
  return {GenotypeMatrix(std::move(subjects), std::move(snps), std::move(values)), std::move(labels),
          std::move(group_labels)};
}

}  // namespace detail

/// Simulates a flat Balding-Nichols panel. Every SNP column uses its own
/// stream keyed by (seed, column), so output is independent of threads.
inline SimPanel balding_nichols(const SimConfig& cfg) {
  if (cfg.n_pops == 0 || cfg.subjects_per_pop.size() != cfg.n_pops)
    throw argument_error("subjects_per_pop must list one size per population");
  if (cfg.fst.size() != 1 && cfg.fst.size() != cfg.n_pops)
    throw argument_error("fst must hold one value or one value per population");
  for (double f : cfg.fst)
    if (!(f >= 0.0 && f < 1.0)) throw argument_error("fst must lie in [0, 1)");
  detail::check_sim_common(cfg.m, cfg.maf_low, cfg.maf_high, cfg.missing_rate);

  std::vector<std::size_t> pop_of;
  for (std::size_t p = 0; p < cfg.n_pops; ++p) pop_of.insert(pop_of.end(), cfg.subjects_per_pop[p], p);
  const std::size_t n = pop_of.size();
  std::vector<std::int8_t> values(n * cfg.m);

  parallel_for(cfg.m, cfg.threads, [&](std::size_t j) {
    Rng rng = Rng::stream(cfg.seed, j);
    const double anc = rng.uniform(cfg.maf_low, cfg.maf_high);
    std::vector<double> freq(cfg.n_pops);
    for (std::size_t p = 0; p < cfg.n_pops; ++p)
      freq[p] = balding_nichols_frequency(anc, cfg.fst.size() == 1 ? cfg.fst[0] : cfg.fst[p], rng);
    detail::fill_column(values, cfg.m, j, pop_of, freq, cfg.missing_rate, rng);
  });
  return detail::assemble_panel(std::move(values), cfg.m, pop_of, pop_of);
}

inline SimPanel balding_nichols_nested(const NestedSimConfig& cfg) {
  if (cfg.groups.empty()) throw argument_error("nested simulation needs at least one group");
  detail::check_sim_common(cfg.m, cfg.maf_low, cfg.maf_high, cfg.missing_rate);
  std::vector<std::size_t> pop_of, group_of;
  std::vector<std::size_t> sub_group;
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    const auto& grp = cfg.groups[g];
    if (!(grp.fst >= 0.0 && grp.fst < 1.0 && grp.sub_fst >= 0.0 && grp.sub_fst < 1.0))
      throw argument_error("fst must lie in [0, 1)");
    if (grp.sub_sizes.empty()) throw argument_error("every group needs at least one sub-population");
    for (auto size : grp.sub_sizes) {
      pop_of.insert(pop_of.end(), size, sub_group.size());
      group_of.insert(group_of.end(), size, g);
      sub_group.push_back(g);
    }
  }
  const std::size_t n = pop_of.size();
  std::vector<std::int8_t> values(n * cfg.m);

  parallel_for(cfg.m, cfg.threads, [&](std::size_t j) {
    Rng rng = Rng::stream(cfg.seed, j);
    const double anc = rng.uniform(cfg.maf_low, cfg.maf_high);
    std::vector<double> group_freq(cfg.groups.size());
    for (std::size_t g = 0; g < cfg.groups.size(); ++g)
      group_freq[g] = balding_nichols_frequency(anc, cfg.groups[g].fst, rng);
    std::vector<double> freq(sub_group.size());
    for (std::size_t s = 0; s < sub_group.size(); ++s)
      freq[s] = balding_nichols_frequency(group_freq[sub_group[s]], cfg.groups[sub_group[s]].sub_fst, rng);
    detail::fill_column(values, cfg.m, j, pop_of, freq, cfg.missing_rate, rng);
  });
  return detail::assemble_panel(std::move(values), cfg.m, std::move(pop_of), std::move(group_of));
}

/// Truth labels as `subject_id<TAB>pop_index`.
inline void save_truth_labels(const SimPanel& panel, const std::string& path) {
  auto out = gemtools::detail::open_output(path);
  for (std::size_t i = 0; i < panel.labels.size(); ++i)
    out << panel.genotypes.subject_ids()[i] << '\t' << panel.labels[i] << '\n';
}

}  // namespace gemtools
