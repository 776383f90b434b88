#include "mstr/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mstr/distributions.hpp"
#include "mstr/parallel.hpp"

namespace mstr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

NetworkPanel::NetworkPanel(Index i, Index j, Index k, Index t, Index q)
    : I(i), J(j), K(k), T(t), Q(q), x(static_cast<std::size_t>(i * j * k * t), 0), z(Eigen::MatrixXd::Zero(t, q)) {}

Eigen::Index NetworkPanel::edge_count(Index t) const {
  Eigen::Index n = 0;
  const auto* p = slice(t);
  for (Index e = 0; e < edges(); ++e) n += p[e];
  return n;
}

void NetworkPanel::validate() const {
  require(I > 0 && J > 0 && K > 0, "panel: I, J, K must be positive");
  require(T >= 2, "panel: need T >= 2 time points, got " + std::to_string(T));
  require(Q >= 1, "panel: need Q >= 1 covariates");
  require(static_cast<Index>(x.size()) == edges() * T,
          "panel: tensor holds " + std::to_string(x.size()) + " entries, shape implies " +
              std::to_string(edges() * T));
  require(z.rows() == T && z.cols() == Q,
          "panel: covariates are " + std::to_string(z.rows()) + "x" + std::to_string(z.cols()) +
              ", expected " + std::to_string(T) + "x" + std::to_string(Q));
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (x[n] <= 1) continue;
    Index r = static_cast<Index>(n);
    const Index i = r % I, j = (r / I) % J, k = (r / (I * J)) % K, t = r / edges();
    throw ValidationError("panel: non-binary entry " + std::to_string(x[n]) + " at (i,j,k,t) = (" +
                          std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + std::to_string(k + 1) +
                          "," + std::to_string(t + 1) + ")");
  }
  for (Index t = 0; t < T; ++t) {
    require(z.row(t).allFinite(), "panel: non-finite covariate in row " + std::to_string(t + 1));
  }
}

PriorConfig PriorConfig::defaults(Index regimes, Index rank) {
  PriorConfig cfg;
  cfg.regimes = regimes;
  cfg.rank = rank;
  cfg.alpha = 1.0;
  cfg.b_tau = 1.0;
  cfg.a_lambda = Eigen::VectorXd::Constant(regimes, 3.0);
  cfg.b_lambda = Eigen::VectorXd::Constant(regimes, 2.0);
  cfg.a_rho = Eigen::VectorXd::Constant(regimes, 1.0);
  cfg.b_rho = Eigen::VectorXd::Constant(regimes, 1.0);
  cfg.c_xi = Eigen::MatrixXd::Constant(regimes, regimes, 2.0);
  cfg.c_xi.diagonal().setConstant(8.0);
  return cfg;
}

void PriorConfig::validate() const {
  require(rank >= 1, "prior: rank must be >= 1");
  require(regimes >= 1, "prior: need at least one regime");
  require(alpha > 0.0 && b_tau > 0.0, "prior: alpha and b_tau must be positive");
  auto positive = [&](const Eigen::VectorXd& v, const char* name) {
    require(v.size() == regimes, std::string("prior: ") + name + " must have one entry per regime");
    require((v.array() > 0.0).all(), std::string("prior: ") + name + " must be positive");
  };
  positive(a_lambda, "a_lambda");
  positive(b_lambda, "b_lambda");
  positive(a_rho, "a_rho");
  positive(b_rho, "b_rho");
  require(c_xi.rows() == regimes && c_xi.cols() == regimes, "prior: c_xi must be L x L");
  require((c_xi.array() > 0.0).all(), "prior: c_xi must be positive");
  require(std::isfinite(gamma_prior_mean), "prior: gamma_prior_mean must be finite");
}

AugmentedState AugmentedState::zeros(const NetworkPanel& panel) {
  AugmentedState aug;
  aug.s.assign(static_cast<std::size_t>(panel.T), 0);
  aug.d.assign(panel.x.size(), 0);
  aug.omega = Eigen::MatrixXd::Constant(panel.edges(), panel.T, 0.25);
  return aug;
}

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double log_logistic(double eta) {
  if (eta >= 0.0) return -std::log1p(std::exp(-eta));
  return eta - std::log1p(std::exp(eta));
}

double edge_prob(int x, double rho, double eta) {
  const double p1 = (1.0 - rho) * logistic(eta);
  return x ? p1 : 1.0 - p1;
}

double edge_prob(int x, double rho, const Eigen::VectorXd& g, const Eigen::VectorXd& z) {
  if (g.size() != z.size()) throw DimensionError("edge_prob: coefficient and covariate lengths differ");
  return edge_prob(x, rho, z.dot(g));
}

double log_edge_prob(int x, double rho, double eta) {
  if (x) return (rho >= 1.0) ? kNegInf : std::log1p(-rho) + log_logistic(eta);
  const double log_rho = rho > 0.0 ? std::log(rho) : kNegInf;
  const double log_slab = rho < 1.0 ? std::log1p(-rho) + log_logistic(-eta) : kNegInf;
  return log_add_exp(log_rho, log_slab);
}

Eigen::MatrixXd linear_predictor(const Marginals& m, const Eigen::MatrixXd& z) {
  if (m.order() != 4) throw DimensionError("linear_predictor: marginals must have order 4");
  if (z.cols() != m.dim(3)) throw DimensionError("linear_predictor: covariate count mismatch");
  const Eigen::MatrixXd edge_cols = rank_one_columns(m, 0, 3);
  return edge_cols * (z * m.factor(3)).transpose();
}

std::vector<Eigen::MatrixXd> linear_predictors(const RegimeParams& params, const NetworkPanel& panel) {
  std::vector<Eigen::MatrixXd> eta;
  eta.reserve(params.marginals.size());
  for (const auto& m : params.marginals) eta.push_back(linear_predictor(m, panel.z));
  return eta;
}

double log_emission(const NetworkPanel& panel, Index t, Index l, const RegimeParams& params) {
  const auto& m = params.marginals.at(static_cast<std::size_t>(l));
  const Eigen::VectorXd loadings = m.factor(3).transpose() * panel.z.row(t).transpose();
  const Eigen::VectorXd eta = rank_one_columns(m, 0, 3) * loadings;
  const double rho = params.rho[l];
  const auto* x = panel.slice(t);
  double total = 0.0;
  for (Index e = 0; e < panel.edges(); ++e) total += log_edge_prob(x[e], rho, eta[e]);
  return total;
}

Eigen::MatrixXd log_emissions(const NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                              const Eigen::VectorXd& rho, int threads) {
  const Index L = static_cast<Index>(eta.size());
  Eigen::MatrixXd out(panel.T, L);
  parallel_for(0, panel.T, threads, [&](long t) {
    const auto* x = panel.slice(t);
    for (Index l = 0; l < L; ++l) {
      const double r = rho[l];
      const double* col = eta[static_cast<std::size_t>(l)].col(t).data();
      double total = 0.0;
      for (Index e = 0; e < panel.edges(); ++e) total += log_edge_prob(x[e], r, col[e]);
      out(t, l) = total;
    }
  });
  return out;
}

Eigen::MatrixXd transition_counts(const std::vector<int>& s, Index regimes) {
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(regimes, regimes);
  for (std::size_t t = 1; t < s.size(); ++t) n(s[t - 1], s[t]) += 1.0;
  return n;
}

double complete_data_loglik(const NetworkPanel& panel, const AugmentedState& aug,
                            const std::vector<Eigen::MatrixXd>& eta, const Eigen::VectorXd& rho,
                            const Eigen::MatrixXd& xi, bool include_omega_prior) {
  const Index L = static_cast<Index>(eta.size());
  if (static_cast<Index>(aug.s.size()) != panel.T || aug.d.size() != panel.x.size() ||
      aug.omega.rows() != panel.edges() || aug.omega.cols() != panel.T) {
    throw DimensionError("complete_data_loglik: augmented state does not match panel");
  }
  double total = -static_cast<double>(std::log(static_cast<double>(L)));
  const Eigen::MatrixXd counts = transition_counts(aug.s, L);
  for (Index g = 0; g < L; ++g) {
    for (Index l = 0; l < L; ++l) {
      if (counts(g, l) > 0.0) total += counts(g, l) * std::log(xi(g, l));
    }
  }
  const double log_half = std::log(0.5);
  for (Index t = 0; t < panel.T; ++t) {
    const Index l = aug.s[static_cast<std::size_t>(t)];
    const double log_rho = std::log(rho[l]);
    const double log_slab = std::log1p(-rho[l]) + log_half;
    const auto* x = panel.slice(t);
    const auto* d = aug.d.data() + panel.edges() * t;
    for (Index e = 0; e < panel.edges(); ++e) {
      if (d[e]) {
        if (x[e]) {
          throw InvariantError("complete_data_loglik: d = 1 with x = 1 at t=" + std::to_string(t + 1) +
                               ", edge " + std::to_string(e));
        }
        total += log_rho;
      } else {
        const double h = eta[static_cast<std::size_t>(l)](e, t);
        const double w = aug.omega(e, t);
        total += log_slab + kappa(x[e], 0) * h - 0.5 * w * h * h;
      }
      if (include_omega_prior) total += pg1_log_density(aug.omega(e, t));
    }
  }
  return total;
}

double complete_data_loglik(const NetworkPanel& panel, const AugmentedState& aug, const RegimeParams& params,
                            bool include_omega_prior) {
  return complete_data_loglik(panel, aug, linear_predictors(params, panel), params.rho, params.xi,
                              include_omega_prior);
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_beta_density(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

double log_dirichlet_density(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
  if (x.size() != alpha.size()) throw DimensionError("log_dirichlet_density: size mismatch");
  if ((x.array() <= 0.0).any()) return kNegInf;
  double out = std::lgamma(alpha.sum());
  for (Index k = 0; k < x.size(); ++k) out += (alpha[k] - 1.0) * std::log(x[k]) - std::lgamma(alpha[k]);
  return out;
}

LogPriorTerms log_prior_terms(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg) {
  LogPriorTerms terms;
  const Index L = params.regimes();
  const Index R = params.rank();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const bool variances_ok = shrink.tau > 0.0 && (shrink.phi.array() > 0.0).all();

  for (Index l = 0; l < L; ++l) {
    const auto& m = params.marginals[static_cast<std::size_t>(l)];
    const auto& w = shrink.w[static_cast<std::size_t>(l)];
    for (Index r = 0; r < R; ++r) {
      for (Index h = 0; h < m.order(); ++h) {
        const double var = shrink.tau * shrink.phi[r] * w(h, r);
        if (!(var > 0.0) || !variances_ok) {
          terms.marginals = kNegInf;
          continue;
        }
        const double n = static_cast<double>(m.dim(h));
        const double ss = (m.marginal(h, r).array() - cfg.gamma_prior_mean).matrix().squaredNorm();
        terms.marginals += -0.5 * n * (log_2pi + std::log(var)) - 0.5 * ss / var;
      }
    }
  }

  terms.tau = log_gamma_density(shrink.tau, cfg.a_tau(), cfg.b_tau);
  if (R > 1) {
    terms.phi = log_dirichlet_density(shrink.phi, Eigen::VectorXd::Constant(R, cfg.alpha));
  } else if (!(shrink.phi.size() == 1 && shrink.phi[0] == 1.0)) {
    terms.phi = kNegInf;
  }

  for (Index l = 0; l < L; ++l) {
    const double lam = shrink.lambda[l];
    const double rate = 0.5 * lam * lam;
    const auto& w = shrink.w[static_cast<std::size_t>(l)];
    for (Index r = 0; r < R; ++r) {
      for (Index h = 0; h < w.rows(); ++h) {
        terms.w += (w(h, r) > 0.0 && rate > 0.0) ? std::log(rate) - rate * w(h, r) : kNegInf;
      }
    }
    terms.lambda += log_gamma_density(lam, cfg.a_lambda[l], cfg.b_lambda[l]);
    terms.rho += log_beta_density(params.rho[l], cfg.a_rho[l], cfg.b_rho[l]);
    terms.xi += log_dirichlet_density(params.xi.row(l).transpose(), cfg.c_xi.row(l).transpose());
  }
  return terms;
}

double log_prior(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg) {
  return log_prior_terms(params, shrink, cfg).total();
}

}  // namespace mstr
