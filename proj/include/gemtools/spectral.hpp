#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/parallel.hpp"
#include "gemtools/tracy_widom.hpp"

namespace gemtools {

using Index = std::size_t;

struct SpectralOptions {
  double eigenvalue_floor = 1e-10;  ///< relative to the largest eigenvalue
  std::size_t min_tw_n = 10;
  std::size_t max_dims = 20;
  std::size_t block = 64;  ///< kernel tile edge
  unsigned threads = 1;
};

// ---------------------------------------------------------------------------
// Normalisation
// ---------------------------------------------------------------------------

/// Column standardisation statistics taken from a node's base sample.
struct NormalizationStats {
  std::vector<double> snp_mean;   ///< mean allele count, 0 when unobserved
  std::vector<double> snp_scale;  ///< sqrt(p (1 - p)), p = mean / 2
  std::vector<Index> kept_snps;   ///< columns with snp_scale > 0
};

inline NormalizationStats compute_norm_stats(const GenotypeMatrix& g, std::span<const Index> rows) {
  if (rows.empty()) throw argument_error("compute_norm_stats: empty row set");
  NormalizationStats stats;
  stats.snp_mean.assign(g.m(), 0.0);
  stats.snp_scale.assign(g.m(), 0.0);
  for (Index j = 0; j < g.m(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto i : rows) {
      const auto v = g.at(i, j);
      if (v == GenotypeMatrix::kMissing) continue;
      sum += v;
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    const double p = mean / 2.0;
    stats.snp_mean[j] = mean;
    if (p > 0.0 && p < 1.0) {
      stats.snp_scale[j] = std::sqrt(p * (1.0 - p));
      stats.kept_snps.push_back(j);
    }
  }
  if (stats.kept_snps.empty()) throw degenerate_error("no polymorphic SNPs among the selected subjects");
  return stats;
}

/// (count - mean) / scale over kept SNPs; missing counts impute to the mean.
inline Eigen::MatrixXd normalize(const GenotypeMatrix& g, std::span<const Index> rows,
                                 const NormalizationStats& stats) {
  const auto& kept = stats.kept_snps;
  Eigen::MatrixXd x(rows.size(), kept.size());
  for (Index r = 0; r < rows.size(); ++r) {
    const auto geno = g.row(rows[r]);
    for (Index k = 0; k < kept.size(); ++k) {
      const Index j = kept[k];
      const auto v = geno[j];
      x(r, k) = v == GenotypeMatrix::kMissing ? 0.0 : (v - stats.snp_mean[j]) / stats.snp_scale[j];
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

namespace detail {

inline void check_kernel_inputs(const Eigen::MatrixXd& xa, const Eigen::MatrixXd& xb) {
  if (xa.cols() != xb.cols())
    throw argument_error("kernel_block: column counts differ (" + std::to_string(xa.cols()) + " vs " +
                         std::to_string(xb.cols()) + ")");
  if (xa.cols() == 0) throw degenerate_error("kernel_block: no kept SNPs");
}

}  // namespace detail

/// K = xa xb^T / m_kept, evaluated tile by tile. Each tile is an
/// independent product, so the result does not depend on `threads`.
inline Eigen::MatrixXd kernel_block(const Eigen::MatrixXd& xa, const Eigen::MatrixXd& xb,
                                    const SpectralOptions& opt = {}) {
  detail::check_kernel_inputs(xa, xb);
  const Eigen::Index na = xa.rows(), nb = xb.rows();
  const auto bs = static_cast<Eigen::Index>(opt.block);
  const double inv_m = 1.0 / static_cast<double>(xa.cols());
  Eigen::MatrixXd k(na, nb);
  const Eigen::Index row_tiles = (na + bs - 1) / bs;
  parallel_for(static_cast<std::size_t>(row_tiles), opt.threads, [&](std::size_t t) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(t) * bs;
    const Eigen::Index rn = std::min(bs, na - r0);
    for (Eigen::Index c0 = 0; c0 < nb; c0 += bs) {
      const Eigen::Index cn = std::min(bs, nb - c0);
      k.block(r0, c0, rn, cn).noalias() = xa.middleRows(r0, rn) * xb.middleRows(c0, cn).transpose();
      k.block(r0, c0, rn, cn) *= inv_m;
    }
  });
  return k;
}

/// Gram kernel x x^T / m_kept; the upper tiles are computed and mirrored
/// so the result is exactly symmetric.
inline Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& x, const SpectralOptions& opt = {}) {
  detail::check_kernel_inputs(x, x);
  const Eigen::Index n = x.rows();
  const auto bs = static_cast<Eigen::Index>(opt.block);
  const double inv_m = 1.0 / static_cast<double>(x.cols());
  Eigen::MatrixXd k(n, n);
  const Eigen::Index tiles = (n + bs - 1) / bs;
  parallel_for(static_cast<std::size_t>(tiles), opt.threads, [&](std::size_t t) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(t) * bs;
    const Eigen::Index rn = std::min(bs, n - r0);
    for (Eigen::Index c0 = r0; c0 < n; c0 += bs) {
      const Eigen::Index cn = std::min(bs, n - c0);
      k.block(r0, c0, rn, cn).noalias() = x.middleRows(r0, rn) * x.middleRows(c0, cn).transpose();
      k.block(r0, c0, rn, cn) *= inv_m;
    }
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i);
  return k;
}

// ---------------------------------------------------------------------------
// Eigendecomposition
// ---------------------------------------------------------------------------

struct EigenDecomposition {
  Eigen::VectorXd values;   ///< descending, all above the floor
  Eigen::MatrixXd vectors;  ///< one orthonormal column per value
};

/// Symmetric eigendecomposition keeping eigenvalues above
/// floor * lambda_max. Each eigenvector is signed so that its entry of
/// largest magnitude is non-negative (lowest index wins ties).
inline EigenDecomposition eigendecompose(const Eigen::MatrixXd& k, double relative_floor = 1e-10) {
  if (k.rows() != k.cols()) throw argument_error("eigendecompose: matrix is not square");
  if (k.rows() == 0) throw argument_error("eigendecompose: empty matrix");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw argument_error("eigendecompose: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k);
  if (solver.info() != Eigen::Success) throw degenerate_error("eigendecompose: solver did not converge");
  const Eigen::VectorXd& asc = solver.eigenvalues();
  const Eigen::Index n = asc.size();
  const double top = asc(n - 1);
  const double floor = relative_floor * std::max(top, 0.0);

  Eigen::Index kept = 0;
  while (kept < n && asc(n - 1 - kept) > floor && asc(n - 1 - kept) > 0.0) ++kept;

  EigenDecomposition out{Eigen::VectorXd(kept), Eigen::MatrixXd(n, kept)};
  for (Eigen::Index c = 0; c < kept; ++c) {
    out.values(c) = asc(n - 1 - c);
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0.0) v = -v;
    out.vectors.col(c) = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Significant dimensions
// ---------------------------------------------------------------------------

struct TwTest {
  double eigenvalue = 0.0;
  double n_eff = 0.0;
  double statistic = 0.0;
  bool significant = false;
};

struct TwReport {
  std::vector<TwTest> tests;
  double alpha = 0.0;
  double critical_value = 0.0;
  bool degenerate = false;   ///< spectrum too flat to test
  bool too_small = false;    ///< fewer than min_tw_n subjects; nothing tested
  bool capped = false;       ///< D hit max_dims
};

struct Significance {
  std::size_t D = 0;
  TwReport report;
};

/// Sequential Tracy-Widom test on a descending spectrum of a centred
/// kernel over `n_subjects` subjects. The leading remaining eigenvalue is
/// tested and removed while significant.
///
/// Centring removes one dimension, so with L eigenvalues left the
/// effective marker count is estimated with L + 1 as the sample count:
///   n_eff = (L + 2) S1^2 / (L S2 - S1^2).
inline Significance significant_dimensions(std::span<const double> eigenvalues, std::size_t n_subjects,
                                           double alpha, const SpectralOptions& opt = {}) {
  if (eigenvalues.empty()) throw argument_error("significant_dimensions: empty spectrum");
  Significance out;
  out.report.alpha = alpha;
  out.report.critical_value = tw::critical_value(alpha);
  if (n_subjects < opt.min_tw_n) {
    out.report.too_small = true;
    return out;
  }

  double s1 = 0.0, s2 = 0.0;
  for (double v : eigenvalues) {
    s1 += v;
    s2 += v * v;
  }
  for (std::size_t first = 0; first < eigenvalues.size(); ++first) {
    const auto remaining = static_cast<double>(eigenvalues.size() - first);
    if ((remaining - 1.0) * s2 - s1 * s1 <= 0.0) {
      out.report.degenerate = true;
      break;
    }
    const double n_eff = (remaining + 2.0) * s1 * s1 / (remaining * s2 - s1 * s1);
    if (!(n_eff > 1.0)) {
      out.report.degenerate = true;
      break;
    }
    const double lambda = eigenvalues[first];
    const double ell = remaining * lambda / s1;
    const double a = std::sqrt(n_eff - 1.0), b = std::sqrt(remaining);
    const double mu = (a + b) * (a + b) / n_eff;
    const double sigma = (a + b) / n_eff * std::cbrt(1.0 / a + 1.0 / b);
    const double x = (ell - mu) / sigma;
    const bool sig = x > out.report.critical_value;
    out.report.tests.push_back({lambda, n_eff, x, sig});
    if (!sig) break;
    ++out.D;
    if (out.D >= opt.max_dims) {
      out.report.capped = true;
      break;
    }
    s1 -= lambda;
    s2 -= lambda * lambda;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eigenmap and Nystrom extension
// ---------------------------------------------------------------------------

struct Eigenmap {
  std::vector<Index> base_index;
  Eigen::MatrixXd coords;       ///< base subjects x retained dimensions
  Eigen::VectorXd eigenvalues;  ///< descending
  std::size_t D = 0;
  NormalizationStats norm_stats;
  TwReport tw;

  std::size_t retained() const { return static_cast<std::size_t>(eigenvalues.size()); }
  /// Order of the kernel matrix that was decomposed.
  std::size_t order() const { return base_index.size(); }
};

inline Eigenmap build_eigenmap(const GenotypeMatrix& g, std::span<const Index> rows, double alpha,
                               const SpectralOptions& opt = {}) {
  if (rows.size() < 2) throw argument_error("build_eigenmap: need at least 2 subjects");
  Eigenmap map;
  map.base_index.assign(rows.begin(), rows.end());
  map.norm_stats = compute_norm_stats(g, rows);
  const Eigen::MatrixXd x = normalize(g, rows, map.norm_stats);
  const Eigen::MatrixXd k = kernel_gram(x, opt);
  auto eig = eigendecompose(k, opt.eigenvalue_floor);
  map.eigenvalues = std::move(eig.values);
  map.coords = std::move(eig.vectors);
  if (map.eigenvalues.size() == 0) {
    // every kept SNP is constant after centring, so there is no axis to test
    map.tw.alpha = alpha;
    map.tw.degenerate = true;
    return map;
  }
  auto sig = significant_dimensions(std::span<const double>(map.eigenvalues.data(), map.eigenvalues.size()),
                                    rows.size(), alpha, opt);
  map.D = sig.D;
  map.tw = std::move(sig.report);
  return map;
}

/// Out-of-sample coordinates C U Lambda^-1, with C the kernel between the
/// new rows and the base sample under the map's own normalisation.
inline Eigen::MatrixXd nystrom_project(const Eigenmap& map, const GenotypeMatrix& g, std::span<const Index> rows,
                                       const SpectralOptions& opt = {}, bool require_disjoint = true) {
  if (require_disjoint) {
    std::vector<Index> base(map.base_index);
    std::sort(base.begin(), base.end());
    for (auto r : rows)
      if (std::binary_search(base.begin(), base.end(), r))
        throw argument_error("nystrom_project: subject " + std::to_string(r) + " is in the base sample");
  }
  if (rows.empty()) return Eigen::MatrixXd(0, map.coords.cols());
  const Eigen::MatrixXd xa = normalize(g, rows, map.norm_stats);
  const Eigen::MatrixXd xb = normalize(g, map.base_index, map.norm_stats);
  const Eigen::MatrixXd c = kernel_block(xa, xb, opt);
  return (c * map.coords) * map.eigenvalues.cwiseInverse().asDiagonal();
}

}  // namespace gemtools
