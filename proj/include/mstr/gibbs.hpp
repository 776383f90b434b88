#pragma once

// Four-block Gibbs sampler for the Markov-switching zero-inflated tensor logit.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mstr/distributions.hpp"
#include "mstr/model.hpp"

namespace mstr {

struct ChainConfig {
  long iterations = 1000;
  long burn_in = 500;
  long thin = 1;
  std::uint64_t seed = 1;
  double hmc_step = 0.1;
  int hmc_nleap = 10;
  /// Added to the precision diagonal, relative to its mean, before factorising.
  double jitter = 0.0;
  int threads = 1;
  /// Step-size adaptation of the lambda move during burn-in.
  bool adapt_hmc = true;

  long stored_draws() const { return iterations <= burn_in ? 0 : (iterations - burn_in + thin - 1) / thin; }
  void validate() const;
};

/// Deliberate sampler defects used to check that the Geweke harness has power.
enum class Mutation {
  None,
  /// An extra block that consumes no randomness and changes nothing.
  NoOpBlock,
  /// tau drawn from a GiG with order p + 1.
  TauOrderPlusOne,
};

struct Draw {
  long iteration = 0;
  RegimeParams params;
  ShrinkageState shrink;
  std::vector<int> s;
  /// log p(X | theta) at the stored parameters, regime path summed out.
  double loglik = 0.0;
};

enum Block : int { kBlockStates = 0, kBlockVariances, kBlockMarginals, kBlockSparsity, kBlockRelabel, kBlockCount };
const char* block_name(int block);

struct ChainState {
  RegimeParams params;
  ShrinkageState shrink;
  AugmentedState aug;
  /// eta[l] = vec(G_l x_4 z_t) stacked over t, kept in sync with params.
  std::vector<Eigen::MatrixXd> eta;
  /// Per-regime-label HMC step size for the lambda move.
  Eigen::VectorXd hmc_step;
  double loglik = 0.0;

  void refresh_predictors(const NetworkPanel& panel);
};

struct SweepOptions {
  int hmc_nleap = 10;
  bool adapt_hmc = false;
  /// Adaptation round, 0-based; drives the Robbins-Monro gain.
  long adapt_round = 0;
  double jitter = 0.0;
  int threads = 1;
  Mutation mutation = Mutation::None;
};

struct SweepStats {
  std::array<double, kBlockCount> seconds{};
  long hmc_proposals = 0;
  long hmc_accepts = 0;
  long hmc_flagged = 0;
};

// Block (I)

struct FfbsResult {
  std::vector<int> s;
  /// T x L; row t is p(s_t | X_1..X_t).
  Eigen::MatrixXd filtered;
  double loglik = 0.0;
};

/// Forward pass only; `s` is left empty.
FfbsResult forward_filter(const Eigen::MatrixXd& log_emission, const Eigen::MatrixXd& xi);
/// log p(X | theta) with the regime path summed out.
double observed_loglik(const NetworkPanel& panel, const RegimeParams& params, int threads = 1);

/// Forward filter over log emissions (T x L) with a uniform initial law, then
/// a backward draw of s_T, ..., s_1.  NumericalError names the first t at which
/// every regime has zero probability.
FfbsResult ffbs(const Eigen::MatrixXd& log_emission, const Eigen::MatrixXd& xi, RngStream& rng);
std::vector<int> ffbs_states(const NetworkPanel& panel, const RegimeParams& params, RngStream& rng, int threads = 1);

/// P(d = 1 | x = 0, rho, eta) = rho / (rho + (1 - rho) / (1 + exp(eta))).
double allocation_probability(double rho, double eta);

/// d for every edge given s; time slice t uses rng.derive({t}).
std::vector<std::uint8_t> sample_d(const NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                                   const Eigen::VectorXd& rho, const std::vector<int>& s, const RngStream& rng,
                                   int threads = 1);
/// omega_{e,t} ~ PG(1, eta_{e,s_t}) for every edge; time slice t uses rng.derive({t}).
Eigen::MatrixXd sample_omega(const NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                             const std::vector<int>& s, const RngStream& rng, int threads = 1);

// Block (II)

/// Sum over (h, l) of |gamma_{h,l}^(r) - mean|^2 / w_{h,r,l}.
double level_scale(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, Index r);
GigParams psi_conditional(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, Index r);
GigParams tau_conditional(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg);
GigParams w_conditional(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, Index h,
                        Index r, Index l);

/// Draws psi and sets phi = psi / sum(psi).
void sample_level_variances(const RegimeParams& params, ShrinkageState& shrink, const PriorConfig& cfg,
                            RngStream& rng);
double sample_tau(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, RngStream& rng);
void sample_w(const RegimeParams& params, ShrinkageState& shrink, const PriorConfig& cfg, RngStream& rng);

/// Conditional of eta = log(lambda) given the local variances: a Gamma(shape,
/// rate) prior on lambda times prod exp(-lambda^2 w / 2) lambda^2, with the
/// Jacobian folded into `shape`.
struct LambdaTarget {
  double shape;
  double rate;
  double sum_w;

  double log_density(double eta) const;
  double gradient(double eta) const;
};
LambdaTarget lambda_target(const ShrinkageState& shrink, const PriorConfig& cfg, Index l);
HmcResult sample_lambda(ShrinkageState& shrink, const PriorConfig& cfg, Index l, double step, int nleap,
                        RngStream& rng);

/// Robbins-Monro update of log(step) toward a Metropolis acceptance of 0.75.
double adapted_step(double step, const HmcResult& move, long round);

// Block (III)

/// Canonical-form Gaussian N(P^-1 b, P^-1).  When `diagonal` is set only the
/// diagonal of P is populated off the prior and the draw is coordinatewise.
struct GaussianConditional {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
  bool diagonal = false;

  Eigen::VectorXd mean() const;
  double log_density_difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};
Eigen::VectorXd sample(const GaussianConditional& g, RngStream& rng, double jitter = 0.0);

/// Per-edge quantities of the augmented likelihood: kappa = (1 - d)(x - 1/2)
/// and the allocation-masked omega, both edges x T.
struct AugmentedWeights {
  Eigen::MatrixXd kappa;
  Eigen::MatrixXd omega;
};
AugmentedWeights augmented_weights(const NetworkPanel& panel, const AugmentedState& aug);

/// Times assigned to regime l.
std::vector<Index> regime_times(const std::vector<int>& s, Index l);

/// Full conditional of gamma_{h,l}^(r) given everything else.  eta_l must match
/// the current marginals of regime l.  Modes 0-2 use the diagonal structure of
/// A'Omega A; mode 3 reduces to Z_l' diag(c'Omega_t c) Z_l.
GaussianConditional gamma_conditional(const NetworkPanel& panel, const AugmentedWeights& weights,
                                      const std::vector<Index>& times, const Marginals& m,
                                      const Eigen::MatrixXd& eta_l, double prior_variance, double prior_mean,
                                      Index h, Index r);
double gamma_prior_variance(const ShrinkageState& shrink, Index h, Index r, Index l);

/// Updates every gamma of regime l in order r, then h, keeping eta_l in sync.
void sample_regime_marginals(const NetworkPanel& panel, const AugmentedWeights& weights, ChainState& state,
                             const PriorConfig& cfg, Index l, RngStream& rng, double jitter = 0.0);

// Block (IV)

struct AllocationCounts {
  Eigen::VectorXd ones;
  Eigen::VectorXd zeros;
};
AllocationCounts allocation_counts(const NetworkPanel& panel, const AugmentedState& aug, Index regimes);
Eigen::VectorXd sample_rho(const NetworkPanel& panel, const AugmentedState& aug, const PriorConfig& cfg,
                           RngStream& rng);
Eigen::MatrixXd sample_xi(const std::vector<int>& s, const PriorConfig& cfg, RngStream& rng);

// Identification

/// Permutation sorting rho in descending order; ties keep regime order.
std::vector<Index> relabel_permutation(const Eigen::VectorXd& rho);
/// Applies the rho-sorting permutation to every regime-indexed quantity.
/// Returns true when the labels changed.  Predictors in `eta` are permuted too.
bool relabel(RegimeParams& params, ShrinkageState& shrink, std::vector<int>& s,
             std::vector<Eigen::MatrixXd>* eta = nullptr);

// Orchestration

/// s_t from network-density quantiles: the sparsest times go to regime 0.
std::vector<int> density_split(const NetworkPanel& panel, Index regimes);
/// Prior means of rho sorted descending, ties spread apart by a factor 0.9.
Eigen::VectorXd initial_rho(const PriorConfig& cfg);

/// Starting state: s split by network-density quantiles (sparsest times to
/// regime 0), gamma ~ N(0, 0.01), variance components and lambda at prior
/// means, rho at prior means spread to a strict descending order, xi at
/// Dirichlet means.
ChainState initial_state(const NetworkPanel& panel, const PriorConfig& cfg, RngStream& rng);

/// One systematic scan of blocks (I)-(IV) followed by relabeling.  All
/// randomness comes from `rng`; results do not depend on `threads`.
void gibbs_sweep(const NetworkPanel& panel, const PriorConfig& cfg, ChainState& state, const SweepOptions& opt,
                 const RngStream& rng, SweepStats* stats = nullptr);

struct ChainDiagnostics {
  long sweeps = 0;
  std::array<double, kBlockCount> block_seconds{};
  double total_seconds = 0.0;
  /// Acceptance of the lambda move after burn-in (over all sweeps if there is no burn-in).
  double hmc_acceptance = 0.0;
  double hmc_acceptance_burn_in = 0.0;
  long hmc_flagged = 0;
  Eigen::VectorXd hmc_step;
};

struct ChainResult {
  std::vector<Draw> draws;
  ChainDiagnostics diagnostics;
  ChainState final_state;
};

struct SamplerError : std::runtime_error {
  SamplerError(const std::string& what, long iteration, int block)
      : std::runtime_error(what), iteration(iteration), block(block) {}
  long iteration;
  int block;
};

using DrawCallback = std::function<void(const Draw&)>;

/// Runs the chain; post-burn-in draws with (iteration - burn_in) % thin == 0
/// are stored (and passed to `on_draw` when given).  Failures inside a sweep
/// are rethrown as SamplerError carrying the iteration and block.
ChainResult run_chain(const NetworkPanel& panel, const PriorConfig& cfg, const ChainConfig& chain,
                      const DrawCallback& on_draw = {});
ChainResult run_chain(const NetworkPanel& panel, const PriorConfig& cfg, const ChainConfig& chain, ChainState start,
                      const DrawCallback& on_draw = {});

/// Randomness of sweep `iteration` of a chain seeded with `seed`.
RngStream sweep_stream(std::uint64_t seed, long iteration);

}  // namespace mstr
