#pragma once

// Synthetic panels from the generative model, and the Geweke joint-distribution
// check of the sampler.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "mstr/gibbs.hpp"
#include "mstr/model.hpp"

namespace mstr {

struct PanelDims {
  Index I = 1, J = 1, K = 1, T = 2, Q = 1;
  void validate() const;
};

/// Law of s_1.  The sampler assumes Uniform; Stationary uses the stationary
/// distribution of the transition matrix.
enum class InitialLaw { Stationary, Uniform };

struct SimTruth {
  RegimeParams params;
  ShrinkageState shrink;
  std::vector<int> s;
  std::vector<std::uint8_t> d;
  std::uint64_t seed = 0;
};

struct Simulation {
  NetworkPanel panel;
  SimTruth truth;
};

/// Intercept column of ones followed by Q - 1 standard normal columns.
Eigen::MatrixXd simulate_covariates(Index T, Index Q, RngStream& rng);

/// pi with pi' Xi = pi' and sum(pi) = 1.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& xi);

struct PriorDraw {
  RegimeParams params;
  ShrinkageState shrink;
};
/// theta from the hierarchical prior, relabeled so rho is descending.
PriorDraw draw_from_prior(const PanelDims& dims, const PriorConfig& cfg, RngStream& rng);

std::vector<int> simulate_path(const Eigen::MatrixXd& xi, Index T, InitialLaw law, RngStream& rng);

/// Redraws panel.x given theta and s: d ~ Bernoulli(rho_{s_t}), x = 0 where
/// d = 1 and x ~ Bernoulli(logistic(z_t'g)) otherwise.  Returns d.
std::vector<std::uint8_t> simulate_edges(NetworkPanel& panel, const RegimeParams& params, const std::vector<int>& s,
                                         RngStream& rng);
/// Same, from precomputed predictors eta[l] (edges x T).
std::vector<std::uint8_t> simulate_edges(NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                                         const Eigen::VectorXd& rho, const std::vector<int>& s, RngStream& rng);

/// Panel with theta drawn from the prior.
Simulation simulate_panel(const PanelDims& dims, const PriorConfig& cfg, std::uint64_t seed,
                          InitialLaw law = InitialLaw::Stationary);
/// Panel from an explicit truth; `shrink` is carried into SimTruth unchanged.
Simulation simulate_panel(const PanelDims& dims, const RegimeParams& truth, const ShrinkageState& shrink,
                          std::uint64_t seed, InitialLaw law = InitialLaw::Stationary);

struct GewekeConfig {
  long sweeps = 20000;
  /// Independent prior draws on the marginal-conditional side; 0 means `sweeps`.
  long marginal_draws = 0;
  /// Successive-conditional sweeps discarded before recording.
  long warmup = 200;
  std::uint64_t seed = 1;
  double hmc_step = 0.3;
  int hmc_nleap = 10;
  int threads = 1;
  Mutation mutation = Mutation::None;
};

struct GewekeStat {
  std::string name;
  double marginal_mean = 0.0;
  double marginal_se = 0.0;
  double successive_mean = 0.0;
  double successive_se = 0.0;
  /// (marginal - successive) / sqrt(se_m^2 + se_s^2)
  double z = 0.0;
};

struct GewekeReport {
  std::vector<GewekeStat> stats;
  double max_abs_z() const;
  const GewekeStat& find(const std::string& name) const;
};

/// Compares the two collections statistic by statistic; the successive side
/// uses batch-means standard errors.
GewekeReport compare_geweke(const std::vector<std::string>& names, const std::vector<std::vector<double>>& marginal,
                            const std::vector<std::vector<double>>& successive);

/// Test functions: tau, rho_l, lambda_l, four gamma entries and the
/// regime-0 occupancy rate, each with its square.
std::vector<std::string> geweke_statistic_names(Index regimes);
std::vector<double> geweke_statistics(const RegimeParams& params, const ShrinkageState& shrink,
                                      const std::vector<int>& s);

/// Marginal-conditional draws (theta, s) from the prior against the
/// successive-conditional chain that alternates data simulation with one
/// Gibbs sweep.  Covariates are drawn once and held fixed.
GewekeReport geweke_pair(const PanelDims& dims, const PriorConfig& cfg, const GewekeConfig& gc);

}  // namespace mstr
