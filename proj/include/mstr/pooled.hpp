#pragma once

// Pooled benchmark: one coefficient vector per regime shared by every edge.

#include <Eigen/Core>

#include <vector>

#include "mstr/gibbs.hpp"
#include "mstr/simulate.hpp"

namespace mstr {

/// g_l in R^Q with prior N(mean, tau w_l I), w_l ~ Exp(lambda_l^2 / 2),
/// lambda_l ~ Gamma, tau ~ Gamma(cfg.a_tau(), cfg.b_tau).
struct PooledParams {
  /// Q x L; column l is g_l.
  Eigen::MatrixXd g;
  Eigen::VectorXd w;
  double tau = 1.0;
  Eigen::VectorXd lambda;
  Eigen::VectorXd rho;
  Eigen::MatrixXd xi;

  Index regimes() const { return g.cols(); }
};

/// eta[l] = 1_E (Z g_l)', the same predictor for every edge.
std::vector<Eigen::MatrixXd> pooled_predictors(const PooledParams& p, const NetworkPanel& panel);

/// The I x J x K x Q coefficient tensor H x_5 g_l with H_{ijkqp} = 1{q = p}.
Tensor expand_pooled(const Eigen::VectorXd& g, Index I, Index J, Index K);

double pooled_log_prior(const PooledParams& p, const PriorConfig& cfg);
double pooled_complete_data_loglik(const NetworkPanel& panel, const AugmentedState& aug, const PooledParams& p,
                                   bool include_omega_prior = false);

GaussianConditional pooled_g_conditional(const NetworkPanel& panel, const AugmentedWeights& weights,
                                         const std::vector<Index>& times, double prior_variance, double prior_mean);
GigParams pooled_tau_conditional(const PooledParams& p, const PriorConfig& cfg);
GigParams pooled_w_conditional(const PooledParams& p, const PriorConfig& cfg, Index l);
LambdaTarget pooled_lambda_target(const PooledParams& p, const PriorConfig& cfg, Index l);

/// tau, then every w_l, then one HMC move per lambda_l given w_l.
void sample_variances_pooled(PooledParams& p, const PriorConfig& cfg, const Eigen::VectorXd& step, int nleap,
                             RngStream& rng, SweepStats* stats = nullptr,
                             std::vector<HmcResult>* moves = nullptr);
void sample_g_pooled(const NetworkPanel& panel, const AugmentedState& aug, PooledParams& p, const PriorConfig& cfg,
                     RngStream& rng, double jitter = 0.0);

bool relabel(PooledParams& p, std::vector<int>& s, std::vector<Eigen::MatrixXd>* eta = nullptr);

struct PooledState {
  PooledParams params;
  AugmentedState aug;
  std::vector<Eigen::MatrixXd> eta;
  Eigen::VectorXd hmc_step;
  double loglik = 0.0;

  void refresh_predictors(const NetworkPanel& panel) { eta = pooled_predictors(params, panel); }
};

struct PooledDraw {
  long iteration = 0;
  PooledParams params;
  std::vector<int> s;
  double loglik = 0.0;
};

struct PooledResult {
  std::vector<PooledDraw> draws;
  ChainDiagnostics diagnostics;
  PooledState final_state;
};

/// Same start rules as the unrestricted sampler, with g_l ~ N(0, 0.01 I).
PooledState pooled_initial_state(const NetworkPanel& panel, const PriorConfig& cfg, RngStream& rng);
void pooled_sweep(const NetworkPanel& panel, const PriorConfig& cfg, PooledState& state, const SweepOptions& opt,
                  const RngStream& rng, SweepStats* stats = nullptr);

using PooledDrawCallback = std::function<void(const PooledDraw&)>;
PooledResult run_pooled_chain(const NetworkPanel& panel, const PriorConfig& cfg, const ChainConfig& chain,
                              const PooledDrawCallback& on_draw = {});

PooledParams draw_pooled_from_prior(Index Q, const PriorConfig& cfg, RngStream& rng);
Simulation simulate_pooled_panel(const PanelDims& dims, const PooledParams& truth, std::uint64_t seed,
                                 InitialLaw law = InitialLaw::Stationary);

/// Test functions: tau, rho_l, lambda_l, w_l, g_{1,1}, g_{Q,L} and the
/// regime-0 occupancy, each with its square.
std::vector<std::string> pooled_geweke_statistic_names(Index regimes);
GewekeReport pooled_geweke_pair(const PanelDims& dims, const PriorConfig& cfg, const GewekeConfig& gc);

}  // namespace mstr
