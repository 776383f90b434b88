#pragma once

// Model state, prior configuration and every density the sampler and its
// correctness checks evaluate.

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mstr/tensor.hpp"

namespace mstr {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Binary tensor series x_{ijk,t} with shared covariates z_t.
///
/// Edges are linearised column-major (i fastest, then j, k) and time is the
/// slowest index, so slice t is the contiguous vec(X_t).
struct NetworkPanel {
  Index I = 0, J = 0, K = 0, T = 0, Q = 0;
  std::vector<std::uint8_t> x;
  /// T x Q; the intercept is an explicit column supplied by the caller.
  Eigen::MatrixXd z;

  NetworkPanel() = default;
  NetworkPanel(Index i, Index j, Index k, Index t, Index q);

  Index edges() const { return I * J * K; }
  Index edge_index(Index i, Index j, Index k) const { return i + I * (j + J * k); }
  std::uint8_t operator()(Index i, Index j, Index k, Index t) const {
    return x[static_cast<std::size_t>(edge_index(i, j, k) + edges() * t)];
  }
  std::uint8_t& operator()(Index i, Index j, Index k, Index t) {
    return x[static_cast<std::size_t>(edge_index(i, j, k) + edges() * t)];
  }
  const std::uint8_t* slice(Index t) const { return x.data() + edges() * t; }
  Eigen::Index edge_count(Index t) const;

  /// Throws ValidationError on any violated invariant (binary entries,
  /// finite covariates, T >= 2, Q >= 1, consistent sizes).
  void validate() const;
};

/// Hyperparameters.  Per-regime vectors have length L; row l of `c_xi` is the
/// Dirichlet concentration of transition row l.
struct PriorConfig {
  Index rank = 1;
  Index regimes = 2;
  double alpha = 1.0;
  double b_tau = 1.0;
  Eigen::VectorXd a_lambda, b_lambda;
  Eigen::VectorXd a_rho, b_rho;
  Eigen::MatrixXd c_xi;
  /// Common prior mean of every marginal entry (zero in the model; a
  /// non-zero value is supported by all conditionals).
  double gamma_prior_mean = 0.0;

  double a_tau() const { return alpha * static_cast<double>(rank); }

  /// Exchangeable defaults: identical per-regime hyperparameters and a
  /// transition prior with constant diagonal / off-diagonal concentration.
  static PriorConfig defaults(Index regimes, Index rank);
  void validate() const;
};

struct RegimeParams {
  std::vector<Marginals> marginals;
  Eigen::VectorXd rho;
  Eigen::MatrixXd xi;

  Index regimes() const { return static_cast<Index>(marginals.size()); }
  Index rank() const { return marginals.empty() ? 0 : marginals.front().rank(); }
  /// Entries g_{ijkq,l}: the I x J x K x Q coefficient tensor of regime l.
  Tensor coefficient_tensor(Index l) const { return parafac_reconstruct(marginals.at(static_cast<std::size_t>(l))); }
};

struct ShrinkageState {
  double tau = 1.0;
  Eigen::VectorXd psi;
  Eigen::VectorXd phi;
  /// w[l](h, r) is the local variance of gamma_{h,l}^(r).
  std::vector<Eigen::MatrixXd> w;
  Eigen::VectorXd lambda;
};

struct AugmentedState {
  /// Regime labels in 0..L-1.
  std::vector<int> s;
  std::vector<std::uint8_t> d;
  /// edges x T
  Eigen::MatrixXd omega;

  static AugmentedState zeros(const NetworkPanel& panel);
};

/// kappa = (1 - d)(x - 1/2), computed from the current allocation.
inline double kappa(std::uint8_t x, std::uint8_t d) { return d ? 0.0 : (x ? 0.5 : -0.5); }

double logistic(double eta);
double log_logistic(double eta);

/// p(x | rho, eta) with eta = z'g.
double edge_prob(int x, double rho, double eta);
double edge_prob(int x, double rho, const Eigen::VectorXd& g, const Eigen::VectorXd& z);
double log_edge_prob(int x, double rho, double eta);

/// vec(G_l x_4 z_t) for every t: an edges x T matrix, computed as
/// KhatriRao(gamma_3, gamma_2, gamma_1) * (Z gamma_4)'.
Eigen::MatrixXd linear_predictor(const Marginals& m, const Eigen::MatrixXd& z);
std::vector<Eigen::MatrixXd> linear_predictors(const RegimeParams& params, const NetworkPanel& panel);

double log_emission(const NetworkPanel& panel, Index t, Index l, const RegimeParams& params);
/// T x L matrix of log p(X_t | s_t = l); rows are computed independently and
/// may be spread over `threads`.
Eigen::MatrixXd log_emissions(const NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                              const Eigen::VectorXd& rho, int threads = 1);

/// N(s)_{g,l}: number of t in 1..T-1 with s_{t-1} = g and s_t = l.
Eigen::MatrixXd transition_counts(const std::vector<int>& s, Index regimes);

/// log L(X, D, Omega, s | theta) under the Polya-Gamma augmented zero-inflated
/// logit.  An edge with d = 1 contributes log rho_l (x is then zero); an edge
/// with d = 0 contributes log((1 - rho_l) / 2) + kappa eta - omega eta^2 / 2.
/// The initial regime is uniform, so s contributes -log L plus the transition
/// terms.  The PG(1, 0) density of omega is added when `include_omega_prior`.
double complete_data_loglik(const NetworkPanel& panel, const AugmentedState& aug,
                            const std::vector<Eigen::MatrixXd>& eta, const Eigen::VectorXd& rho,
                            const Eigen::MatrixXd& xi, bool include_omega_prior = false);
double complete_data_loglik(const NetworkPanel& panel, const AugmentedState& aug, const RegimeParams& params,
                            bool include_omega_prior = false);

struct LogPriorTerms {
  double marginals = 0.0;
  double tau = 0.0;
  double phi = 0.0;
  double w = 0.0;
  double lambda = 0.0;
  double rho = 0.0;
  double xi = 0.0;
  double total() const { return marginals + tau + phi + w + lambda + rho + xi; }
};

LogPriorTerms log_prior_terms(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg);
/// Sum of the hierarchical prior log densities; -inf outside the support.
/// The ordering of rho is an identification device and is not part of the density.
double log_prior(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg);

// Reference log densities, shape-rate parameterisation for the Gamma.
double log_gamma_density(double x, double shape, double rate);
double log_beta_density(double x, double a, double b);
double log_dirichlet_density(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha);

}  // namespace mstr
