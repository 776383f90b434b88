#pragma once

// Scalar-trace summaries: moments, quantiles, effective sample size and
// batch-means standard errors.

#include <vector>

namespace mstr {

double sample_mean(const std::vector<double>& x);
/// Unbiased (n - 1) sample variance.
double sample_variance(const std::vector<double>& x);
/// Linear-interpolation quantile (type 7), 0 <= q <= 1.
double quantile(std::vector<double> x, double q);

/// Geyer's initial monotone sequence estimator of the effective sample size.
double effective_sample_size(const std::vector<double>& x);

/// Standard error of the mean from non-overlapping batch means.  The default
/// uses floor(sqrt(n)) batches.
double batch_means_se(const std::vector<double>& x, int batches = 0);

}  // namespace mstr
