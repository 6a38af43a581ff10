#pragma once

#include "foliatrace/model.hpp"

#include <random>

namespace foliatrace::testing {

inline FlatFoliatedModel product_model(const Vec& drift = Vec::Zero(2)) {
  Mat b(2, 1);
  b << 1, 0;
  return build_model(2, 1, b, Mat::Identity(2, 2), drift);
}

inline constexpr double kGolden = 0.6180339887498949;

inline FlatFoliatedModel kronecker_model(double alpha = kGolden) {
  Mat b(2, 1);
  b << 1, alpha;
  return build_model(2, 1, b, Mat::Identity(2, 2), Vec::Zero(2));
}

inline FlatFoliatedModel t3_model() {
  Mat b(3, 1);
  b << 1, 0, 0;
  return build_model(3, 1, b, Mat::Identity(3, 3), Vec::Zero(3));
}

/// Random SPD metric with condition number below ~10 and a leaf basis with
/// irrational-looking entries.
inline FlatFoliatedModel random_model(std::mt19937_64& rng, int n, int p) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = 0.3 * u(rng);
  const Mat g = Mat::Identity(n, n) + a * a.transpose();
  Mat b(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) b(i, j) = (i == j ? 1.0 : 0.0) + 0.5 * u(rng) * std::sqrt(2.0);
  return build_model(n, p, b, g, Vec::Zero(n));
}

}  // namespace foliatrace::testing
