#include "mstr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mstr {

double sample_mean(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("sample_mean: empty trace");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile: empty trace");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double m = sample_mean(x);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - m;
  const double c0 = std::inner_product(c.begin(), c.end(), c.begin(), 0.0) / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  // Sums of adjacent autocovariance pairs, truncated at the first non-positive
  // pair and forced to be non-increasing.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = (2.0 * sum - c0) / c0;
  return static_cast<double>(n) / std::max(tau, 1.0 / static_cast<double>(n));
}

double batch_means_se(const std::vector<double>& x, int batches) {
  const std::size_t n = x.size();
  if (n < 4) return std::sqrt(sample_variance(x) / static_cast<double>(std::max<std::size_t>(n, 1)));
  const std::size_t b = batches > 1 ? static_cast<std::size_t>(batches)
                                    : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / b;
  std::vector<double> means(b);
  for (std::size_t k = 0; k < b; ++k) {
    means[k] = std::accumulate(x.begin() + static_cast<long>(k * size), x.begin() + static_cast<long>((k + 1) * size),
                               0.0) /
               static_cast<double>(size);
  }
  return std::sqrt(sample_variance(means) / static_cast<double>(b));
}

}  // namespace mstr
