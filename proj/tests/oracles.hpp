#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <vector>

#include "aoi/mfg.hpp"
#include "aoi/types.hpp"

namespace oracle {

// w(age) by explicit matrix powers.
inline double weight(int age, const aoi::Matrix& A, const aoi::Matrix& C_W) {
  double total = 0.0;
  for (int l = 1; l <= age; ++l) {
    aoi::Matrix P = aoi::Matrix::Identity(A.rows(), A.cols());
    for (int j = 1; j < l; ++j) P = P * A;
    total += (P.transpose() * P * C_W).trace();
  }
  return total;
}

inline double cost(int age, const aoi::Matrix& A, const aoi::Matrix& C_W) { return weight(age, A, C_W) * age; }

// Truncated sum_{r < terms} c(x + r) p^r, scalar A only (uses the geometric form of w).
inline double tail_sum(int x, double A, double C_W, double p, int terms = 4000) {
  const double a = A * A;
  double sum = 0.0;
  double weight_p = 1.0;
  for (int r = 0; r < terms; ++r) {
    const int age = x + r;
    const double w = a == 1.0 ? C_W * age : C_W * (1.0 - std::pow(a, age)) / (1.0 - a);
    sum += w * age * weight_p;
    weight_p *= p;
    if (weight_p == 0.0) break;
  }
  return sum;
}

// Average cost of the threshold policy by renewal-reward with an explicit tail.
inline double threshold_cost(int kappa, double A, double C_W, double p, double price) {
  double head = 0.0;
  for (int i = 0; i < kappa; ++i) {
    const double a = A * A;
    const double w = a == 1.0 ? C_W * i : C_W * (1.0 - std::pow(a, i)) / (1.0 - a);
    head += w * i;
  }
  // Ages kappa, kappa+1, ... are visited until success; expected visits at kappa + r is p^r.
  const double tail = tail_sum(kappa, A, C_W, p);
  const double attempts = 1.0 / (1.0 - p);
  return (head + tail + price * attempts) / (kappa + attempts);
}

// Literal double sum for the mean of one type, scalar case, with the infinite inner sum truncated.
inline double double_sum_mean(int k, double a_cl, double bk2, double q, double x0, const aoi::Trajectory& mu, int terms) {
  double value = std::pow(a_cl, k) * x0;
  for (int j = 0; j < k; ++j) {
    double inner = 0.0;
    for (int r = j + 1; r < j + 1 + terms; ++r) inner += std::pow(a_cl, r - j - 1) * q * mu.at(r)(0);
    value += std::pow(a_cl, k - j - 1) * bk2 * inner;
  }
  return value;
}

}  // namespace oracle
