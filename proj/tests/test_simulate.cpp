#include <gtest/gtest.h>

#include <cmath>

#include "gemtools/simulate.hpp"

using namespace gemtools;

namespace {

SimConfig flat(std::vector<std::size_t> sizes, std::size_t m, double fst, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_pops = sizes.size();
  cfg.subjects_per_pop = std::move(sizes);
  cfg.m = m;
  cfg.fst = {fst};
  cfg.seed = seed;
  return cfg;
}

// Sample allele frequency of population `pop` at SNP j.
double freq(const SimPanel& p, std::size_t pop, std::size_t j) {
  double s = 0;
  int c = 0;
  for (std::size_t i = 0; i < p.labels.size(); ++i)
    if (p.labels[i] == pop && !p.genotypes.missing(i, j)) {
      s += p.genotypes.at(i, j);
      c += 2;
    }
  return s / c;
}

// Moment estimate of F from two large populations, bias-corrected for
// binomial sampling of 2n alleles.
double estimate_f(const SimPanel& p, std::size_t n_per_pop) {
  double num = 0, den = 0;
  for (std::size_t j = 0; j < p.genotypes.m(); ++j) {
    const double a = freq(p, 0, j), b = freq(p, 1, j);
    const double bar = (a + b) / 2;
    const double h = bar * (1 - bar);
    num += (a - b) * (a - b) - 2.0 * h / (2.0 * static_cast<double>(n_per_pop));
    den += 2.0 * h;
  }
  return num / den;
}

}  // namespace

TEST(Simulate, ShapeAndIds) {
  const auto p = balding_nichols(flat({3, 4}, 12, 0.1, 1));
  EXPECT_EQ(p.genotypes.n(), 7u);
  EXPECT_EQ(p.genotypes.m(), 12u);
  EXPECT_EQ(p.genotypes.subject_ids().front(), "ind1");
  EXPECT_EQ(p.genotypes.snp_ids().front(), "snp01");
  EXPECT_EQ(p.labels, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 1}));
  const auto big = balding_nichols(flat({100, 126}, 1167, 0.1, 1));
  EXPECT_EQ(big.genotypes.subject_ids().front(), "ind001");
  EXPECT_EQ(big.genotypes.snp_ids().back(), "snp1167");
}

TEST(Simulate, ReproducibleAndThreadInvariant) {
  auto cfg = flat({30, 30}, 200, 0.1, 42);
  cfg.missing_rate = 0.05;
  const auto a = balding_nichols(cfg);
  const auto b = balding_nichols(cfg);
  cfg.threads = 4;
  const auto c = balding_nichols(cfg);
  EXPECT_EQ(a.genotypes, b.genotypes);
  EXPECT_EQ(a.genotypes, c.genotypes);
  cfg.seed = 43;
  EXPECT_FALSE(balding_nichols(cfg).genotypes == a.genotypes);
}

TEST(Simulate, ZeroFstKeepsAncestralFrequencies) {
  const std::size_t n = 2000;
  const auto p = balding_nichols(flat({n / 2, n / 2}, 50, 0.0, 3));
  const double se = std::sqrt(0.25 / (2.0 * n / 2));
  for (std::size_t j = 0; j < 50; ++j) {
    const double a = freq(p, 0, j), b = freq(p, 1, j);
    EXPECT_GT(a, 0.05 - 3 * se);
    EXPECT_LT(a, 0.5 + 3 * se);
    // both populations share one frequency: difference of two binomials
    const double bar = (a + b) / 2;
    EXPECT_LT(std::abs(a - b), 4.0 * std::sqrt(2.0 * bar * (1 - bar) / n));
  }
}

TEST(Simulate, GenotypesAreBinomialGivenFrequency) {
  // one population with F = 0: genotype counts follow Binomial(2, p)
  const auto p = balding_nichols(flat({4000}, 5, 0.0, 8));
  for (std::size_t j = 0; j < 5; ++j) {
    const double q = freq(p, 0, j);
    double het = 0;
    for (std::size_t i = 0; i < 4000; ++i) het += p.genotypes.at(i, j) == 1;
    const double expected = 2 * q * (1 - q);
    const double se = std::sqrt(expected * (1 - expected) / 4000);
    EXPECT_NEAR(het / 4000, expected, 3 * se + 1e-3) << j;
  }
}

TEST(Simulate, BetaFrequencyMoments) {
  Rng rng(5);
  const double p = 0.3, f = 0.1;
  const int draws = 20000;
  double s = 0, s2 = 0;
  for (int i = 0; i < draws; ++i) {
    const double x = balding_nichols_frequency(p, f, rng);
    s += x;
    s2 += x * x;
  }
  const double mean = s / draws, var = s2 / draws - mean * mean;
  const double target_var = f * p * (1 - p);
  EXPECT_NEAR(mean, p, 3 * std::sqrt(target_var / draws));
  EXPECT_NEAR(var, target_var, 0.05 * target_var);
  EXPECT_EQ(balding_nichols_frequency(p, 0.0, rng), p);
}

TEST(Simulate, DivergenceMatchesAndIsMonotone) {
  double prev = -1.0;
  for (double f : {0.01, 0.05, 0.1, 0.2}) {
    const auto p = balding_nichols(flat({500, 500}, 3000, f, 11));
    const double est = estimate_f(p, 500);
    EXPECT_NEAR(est, f, 0.15 * f + 0.003) << f;
    EXPECT_GT(est, prev);
    prev = est;
  }
}

TEST(Simulate, MissingRate) {
  auto cfg = flat({200}, 100, 0.0, 2);
  cfg.missing_rate = 0.1;
  const auto p = balding_nichols(cfg);
  double miss = 0;
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 100; ++j) miss += p.genotypes.missing(i, j);
  const double rate = miss / 20000, se = std::sqrt(0.09 / 20000);
  EXPECT_NEAR(rate, 0.1, 3 * se);
}

TEST(Simulate, NestedStructure) {
  NestedSimConfig cfg;
  cfg.groups = {{0.15, 0.03, {300, 300}}, {0.15, 0.03, {300}}};
  cfg.m = 2000;
  cfg.seed = 4;
  const auto p = balding_nichols_nested(cfg);
  ASSERT_EQ(p.genotypes.n(), 900u);
  EXPECT_EQ(p.labels[0], 0u);
  EXPECT_EQ(p.labels[300], 1u);
  EXPECT_EQ(p.labels[600], 2u);
  EXPECT_EQ(p.group_labels[300], 0u);
  EXPECT_EQ(p.group_labels[600], 1u);
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t j = 0; j < cfg.m; ++j) s += std::pow(freq(p, a, j) - freq(p, b, j), 2);
    return s / static_cast<double>(cfg.m);
  };
  // sister sub-populations are closer than sub-populations of different groups
  EXPECT_LT(2.0 * dist(0, 1), dist(0, 2));
  EXPECT_LT(2.0 * dist(0, 1), dist(1, 2));
}

TEST(Simulate, RejectsBadConfig) {
  auto cfg = flat({10}, 10, 1.0, 1);
  EXPECT_THROW(balding_nichols(cfg), Error);
  cfg = flat({10, 10}, 10, 0.1, 1);
  cfg.n_pops = 3;
  EXPECT_THROW(balding_nichols(cfg), Error);
  cfg = flat({10}, 0, 0.1, 1);
  EXPECT_THROW(balding_nichols(cfg), Error);
  cfg = flat({10}, 10, 0.1, 1);
  cfg.maf_low = 0.0;
  EXPECT_THROW(balding_nichols(cfg), Error);
}
