#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rwre {

/// A Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Fixed-order pairwise summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> xs);

/// Sample mean and standard error of the mean (n - 1 variance).
Estimate mean_and_se(std::span<const double> xs);

/// Ratio of sums sum(num) / sum(den) with its delete-one jackknife standard
/// error over the replicas (blocks) that produced each (num_i, den_i) pair.
Estimate jackknife_ratio(std::span<const double> num, std::span<const double> den);

/// Ordinary (or weighted, when weights are given) least squares y = a + b x.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y,
                        std::span<const double> weights = {});

}  // namespace rwre
