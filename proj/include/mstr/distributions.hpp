#pragma once

// Random-variate generators and density kernels used by the Gibbs sampler.

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>

#include "mstr/rng.hpp"

namespace mstr {

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double sample_normal(RngStream& rng);
double sample_exponential(RngStream& rng);

/// Gamma in shape-rate form, E = shape / rate.
double sample_gamma(double shape, double rate, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, RngStream& rng);
bool sample_bernoulli(double p, RngStream& rng);
/// Index drawn with probability proportional to `weights` (non-negative, not all zero).
Eigen::Index sample_categorical(const Eigen::VectorXd& weights, RngStream& rng);
/// Same, with weights given on the log scale; -inf entries have zero mass.
Eigen::Index sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng);

// Polya-Gamma PG(1, c).  Exact alternating-series rejection sampler (the
// Devroye-type scheme for J*(1, c/2), returned scaled by 1/4).
double sample_pg1(double c, RngStream& rng);
double pg1_mean(double c);
/// log density of PG(1, 0) at x > 0, summed from its alternating series.
double pg1_log_density(double x);

/// Generalised inverse Gaussian: density proportional to
/// x^(p-1) exp(-(a x + b / x) / 2) on x > 0.
struct GigParams {
  double a;
  double b;
  double p;
};

/// Throws ArgumentError unless (a, b, p) defines a proper distribution:
/// a, b >= 0 and finite; b == 0 needs p > 0 (Gamma limit) and a == 0 needs p < 0
/// (inverse-Gamma limit).
void validate(const GigParams& g);
double gig_log_kernel(double x, const GigParams& g);
double sample_gig(const GigParams& g, RngStream& rng);

/// Draw from N(P^-1 b, P^-1) given precision P and linear term b.  The
/// factorisation is retried with diagonal jitter 1e-10 .. 1e-6 (relative to the
/// mean diagonal); NumericalError when that is not enough.
Eigen::VectorXd sample_gaussian_canonical(const Eigen::MatrixXd& precision,
                                          const Eigen::VectorXd& linear, RngStream& rng);
/// -x'Px/2 + b'x, the log kernel of the canonical-form Gaussian.
double gaussian_canonical_log_kernel(const Eigen::VectorXd& x, const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& linear);

struct HmcResult {
  double value;
  bool accepted;
  /// The trajectory produced a non-finite gradient or energy; value is unchanged.
  bool flagged;
  /// H(proposal) - H(current).
  double energy_error;
};

/// One scalar HMC transition with unit mass, `nleap` leapfrog steps of size
/// `step` and a Metropolis correction.
HmcResult hmc_update(const std::function<double(double)>& log_density,
                     const std::function<double(double)>& gradient, double current, double step,
                     int nleap, RngStream& rng);

}  // namespace mstr
