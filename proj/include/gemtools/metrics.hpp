#pragma once

#include <map>
#include <span>
#include <utility>

#include "gemtools/error.hpp"

namespace gemtools {

/// Hubert-Arabie adjusted Rand index between two labelings.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw argument_error("adjusted_rand_index: label vectors differ in length");
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, count] : joint) index += choose2(count);
  for (const auto& [key, count] : rows) sum_a += choose2(count);
  for (const auto& [key, count] : cols) sum_b += choose2(count);
  const double total = choose2(static_cast<double>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace gemtools
