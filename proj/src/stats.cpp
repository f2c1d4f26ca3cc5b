#include "rwre/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace rwre {

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

Estimate mean_and_se(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_and_se: empty sample");
  const double n = static_cast<double>(xs.size());
  const double mean = pairwise_sum(xs) / n;
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

Estimate jackknife_ratio(std::span<const double> num, std::span<const double> den) {
  if (num.size() != den.size() || num.empty()) {
    throw std::invalid_argument("jackknife_ratio: mismatched or empty replica vectors");
  }
  const double total_num = pairwise_sum(num);
  const double total_den = pairwise_sum(den);
  if (total_den == 0.0) throw std::domain_error("jackknife_ratio: zero denominator");
  const double full = total_num / total_den;
  const std::size_t n = num.size();
  if (n == 1) return {full, 0.0};
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) loo[i] = (total_num - num[i]) / (total_den - den[i]);
  const double loo_mean = pairwise_sum(loo) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  return {full, std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n))};
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y, std::span<const double> weights) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("least_squares: need >= 2 matched points");
  if (!weights.empty() && weights.size() != n) throw std::invalid_argument("least_squares: weight size mismatch");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    sxx += w * (x[i] - mx) * (x[i] - mx);
    sxy += w * (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::domain_error("least_squares: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (!weights.empty()) {
    // Weights are inverse variances: the slope error follows directly.
    fit.slope_se = std::sqrt(1.0 / sxx);
  } else if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

}  // namespace rwre
