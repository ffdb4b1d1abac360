#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "gemtools/clustering.hpp"
#include "gemtools/rng.hpp"

using namespace gemtools;

namespace {

Eigen::MatrixXd random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

// Textbook Ward: merge the pair of clusters whose union raises the
// within-cluster sum of squares least, recomputed from centroids each step.
// Reported distance is 2 * increase, the scale Lance-Williams produces on
// squared Euclidean input.
std::vector<WardMerge> naive_ward(const Eigen::MatrixXd& x) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  auto centroid = [&](const std::vector<std::size_t>& members) {
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(x.cols());
    for (auto m : members) c += x.row(static_cast<Eigen::Index>(m));
    return Eigen::RowVectorXd(c / static_cast<double>(members.size()));
  };
  std::vector<WardMerge> out;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (auto ia = clusters.begin(); ia != clusters.end(); ++ia)
      for (auto ib = std::next(ia); ib != clusters.end(); ++ib) {
        const double na = static_cast<double>(ia->second.size()), nb = static_cast<double>(ib->second.size());
        const double v = 2.0 * na * nb / (na + nb) * (centroid(ia->second) - centroid(ib->second)).squaredNorm();
        if (v < best) {
          best = v;
          ba = ia->first;
          bb = ib->first;
        }
      }
    auto& a = clusters[ba];
    const auto& b = clusters[bb];
    a.insert(a.end(), b.begin(), b.end());
    out.push_back({ba, bb, best, a.size()});
    clusters.erase(bb);
  }
  return out;
}

std::set<std::set<std::size_t>> partition(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].insert(i);
  std::set<std::set<std::size_t>> out;
  for (auto& [_, g] : groups) out.insert(g);
  return out;
}

}  // namespace

TEST(Ward, OneDimensionalPairs) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 10, 11;
  const auto c = ward_cluster(x, 2);
  EXPECT_EQ(c.k, 2u);
  EXPECT_EQ(c.labels, (std::vector<std::size_t>{0, 0, 1, 1}));
}

TEST(Ward, TrivialCuts) {
  const auto x = random_points(6, 2, 1);
  const auto one = ward_cluster(x, 1);
  EXPECT_EQ(one.k, 1u);
  EXPECT_TRUE(std::all_of(one.labels.begin(), one.labels.end(), [](auto l) { return l == 0; }));
  const auto all = ward_cluster(x, 6);
  EXPECT_EQ(all.labels, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(Ward, RejectsBadK) {
  const auto x = random_points(5, 2, 2);
  EXPECT_THROW(ward_cluster(x, 6), Error);
  EXPECT_THROW(ward_cluster(x, 0), Error);
}

TEST(Ward, MatchesNaiveAgglomeration) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::size_t n = 5 + seed * 3;
    const auto x = random_points(n, 1 + seed % 4, seed);
    const auto fast = ward_merges(x);
    const auto slow = naive_ward(x);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t s = 0; s < fast.size(); ++s) {
      EXPECT_EQ(fast[s].a, slow[s].a) << "seed " << seed << " step " << s;
      EXPECT_EQ(fast[s].b, slow[s].b) << "seed " << seed << " step " << s;
      EXPECT_NEAR(fast[s].distance, slow[s].distance, 1e-9 * std::max(1.0, slow[s].distance));
      EXPECT_EQ(fast[s].size, slow[s].size);
    }
  }
}

TEST(Ward, MergeHeightsAreMonotone) {
  const auto merges = ward_merges(random_points(60, 3, 99));
  for (std::size_t s = 1; s < merges.size(); ++s) EXPECT_GE(merges[s].distance, merges[s - 1].distance - 1e-12);
}

TEST(Ward, PermutationEquivariant) {
  const std::size_t n = 25;
  const auto x = random_points(n, 2, 5);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(8);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
  Eigen::MatrixXd px(n, 2);
  for (std::size_t i = 0; i < n; ++i) px.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto base = ward_cluster(x, k).labels;
    const auto permuted = ward_cluster(px, k).labels;
    std::vector<std::size_t> back(n);
    for (std::size_t i = 0; i < n; ++i) back[perm[i]] = permuted[i];
    EXPECT_EQ(partition(base), partition(back)) << "k " << k;
  }
}

TEST(Ward, PointMassesAreRecovered) {
  Eigen::MatrixXd x(15, 2);
  for (int i = 0; i < 15; ++i) x.row(i) << (i % 3) * 10.0, (i % 3 == 2) ? 7.0 : 0.0;
  const auto c = ward_cluster(x, 3);
  for (int i = 0; i < 15; ++i) EXPECT_EQ(c.labels[static_cast<std::size_t>(i)], static_cast<std::size_t>(i % 3));
}

TEST(Ward, ChooseK) {
  static_assert(choose_k(0) == 1);
  static_assert(choose_k(2) == 3);
}

TEST(AssignNearest, TieGoesToLowestBaseIndex) {
  Eigen::MatrixXd base(2, 1), proj(1, 1);
  base << -1, 1;
  proj << 0;
  ClusterLabels labels{{1, 0}, 2};
  EXPECT_EQ(assign_nearest(proj, base, labels), std::vector<std::size_t>{1});
}

TEST(AssignNearest, MatchesBruteForce) {
  const auto base = random_points(40, 3, 11);
  const auto proj = random_points(70, 3, 12);
  const auto labels = ward_cluster(base, 4);
  const auto got = assign_nearest(proj, base, labels, 3);
  for (Eigen::Index p = 0; p < proj.rows(); ++p) {
    std::vector<double> d(40);
    for (Eigen::Index b = 0; b < 40; ++b) d[static_cast<std::size_t>(b)] = (proj.row(p) - base.row(b)).norm();
    const auto best = static_cast<std::size_t>(std::min_element(d.begin(), d.end()) - d.begin());
    EXPECT_EQ(got[static_cast<std::size_t>(p)], labels.labels[best]);
  }
  EXPECT_THROW(assign_nearest(random_points(2, 2, 1), base, labels), Error);
}
