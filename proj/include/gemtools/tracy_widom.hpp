#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/airy.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "gemtools/error.hpp"

namespace gemtools::tw {

namespace detail {

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre rule by Newton iteration on P_n.
inline GaussLegendre gauss_legendre(int n) {
  GaussLegendre rule{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace detail

/// CDF of the GOE Tracy-Widom law, F1(s) = det(I - B) on L2(s, inf) with
/// B(x, y) = Ai((x + y) / 2) / 2. The half-line is truncated to
/// [s, s + 16] where the Airy kernel is below double precision.
inline double cdf(double s, int quadrature_points = 64) {
  if (s > 12.0) return 1.0;
  if (s < -12.0) return 0.0;
  static const detail::GaussLegendre rule = detail::gauss_legendre(64);
  const auto& gl = quadrature_points == 64 ? rule : detail::gauss_legendre(quadrature_points);
  const int n = static_cast<int>(gl.nodes.size());
  constexpr double span = 16.0;
  std::vector<double> x(n), sw(n);
  for (int i = 0; i < n; ++i) {
    x[i] = s + (gl.nodes[i] + 1.0) * span / 2.0;
    sw[i] = std::sqrt(gl.weights[i] * span / 2.0);
  }
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - sw[i] * 0.5 * boost::math::airy_ai((x[i] + x[j]) / 2.0) * sw[j];
  return std::clamp(a.partialPivLu().determinant(), 0.0, 1.0);
}

/// Upper-tail critical value: the s with 1 - F1(s) = alpha.
inline double quantile_upper(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw argument_error("Tracy-Widom alpha must lie in (0, 1)");
  const double target = 1.0 - alpha;
  double lo = -10.0, hi = 10.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Critical value used by the significance test. The three conventional
/// levels use published TW1 percentiles; other levels are computed.
inline double critical_value(double alpha) {
  if (alpha == 0.05) return 0.9793;
  if (alpha == 0.01) return 2.0234;
  if (alpha == 0.001) return 3.2724;
  return quantile_upper(alpha);
}

}  // namespace gemtools::tw
