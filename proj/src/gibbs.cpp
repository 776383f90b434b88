#include "mstr/gibbs.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mstr/parallel.hpp"

namespace mstr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double marginal_deviation(const Marginals& m, Index h, Index r, double mean) {
  return (m.marginal(h, r).array() - mean).matrix().squaredNorm();
}

}  // namespace

void ChainConfig::validate() const {
  if (iterations < 1) throw ValidationError("chain: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw ValidationError("chain: need 0 <= burn_in < iterations");
  if (thin < 1) throw ValidationError("chain: thin must be >= 1");
  if (!(hmc_step > 0.0)) throw ValidationError("chain: hmc_step must be positive");
  if (hmc_nleap < 1) throw ValidationError("chain: hmc_nleap must be >= 1");
  if (!(jitter >= 0.0)) throw ValidationError("chain: jitter must be non-negative");
  if (threads < 1) throw ValidationError("chain: threads must be >= 1");
}

const char* block_name(int block) {
  switch (block) {
    case kBlockStates: return "states";
    case kBlockVariances: return "variances";
    case kBlockMarginals: return "marginals";
    case kBlockSparsity: return "sparsity";
    case kBlockRelabel: return "relabel";
    default: return "unknown";
  }
}

void ChainState::refresh_predictors(const NetworkPanel& panel) { eta = linear_predictors(params, panel); }

// ---------------------------------------------------------------------------
// Block (I)

FfbsResult forward_filter(const Eigen::MatrixXd& log_emission, const Eigen::MatrixXd& xi) {
  const Index T = log_emission.rows();
  const Index L = log_emission.cols();
  if (xi.rows() != L || xi.cols() != L) throw DimensionError("forward_filter: transition matrix must be L x L");
  FfbsResult out;
  out.filtered.resize(T, L);
  Eigen::RowVectorXd predicted = Eigen::RowVectorXd::Constant(L, 1.0 / static_cast<double>(L));
  Eigen::RowVectorXd logp(L);
  for (Index t = 0; t < T; ++t) {
    for (Index l = 0; l < L; ++l) {
      logp[l] = predicted[l] > 0.0 ? std::log(predicted[l]) + log_emission(t, l)
                                   : -std::numeric_limits<double>::infinity();
    }
    const double top = logp.maxCoeff();
    if (!std::isfinite(top)) {
      throw NumericalError("ffbs: every regime has zero probability at t=" + std::to_string(t + 1));
    }
    const Eigen::RowVectorXd p = (logp.array() - top).exp().matrix();
    const double total = p.sum();
    out.filtered.row(t) = p / total;
    out.loglik += top + std::log(total);
    predicted = out.filtered.row(t) * xi;
  }
  return out;
}

FfbsResult ffbs(const Eigen::MatrixXd& log_emission, const Eigen::MatrixXd& xi, RngStream& rng) {
  FfbsResult out = forward_filter(log_emission, xi);
  const Index T = log_emission.rows();
  out.s.assign(static_cast<std::size_t>(T), 0);
  out.s[T - 1] = static_cast<int>(sample_categorical(out.filtered.row(T - 1).transpose(), rng));
  for (Index t = T - 2; t >= 0; --t) {
    const Eigen::VectorXd w = out.filtered.row(t).transpose().cwiseProduct(xi.col(out.s[t + 1]));
    out.s[t] = static_cast<int>(sample_categorical(w, rng));
  }
  return out;
}

double observed_loglik(const NetworkPanel& panel, const RegimeParams& params, int threads) {
  const auto eta = linear_predictors(params, panel);
  return forward_filter(log_emissions(panel, eta, params.rho, threads), params.xi).loglik;
}

std::vector<int> ffbs_states(const NetworkPanel& panel, const RegimeParams& params, RngStream& rng, int threads) {
  const auto eta = linear_predictors(params, panel);
  return ffbs(log_emissions(panel, eta, params.rho, threads), params.xi, rng).s;
}

double allocation_probability(double rho, double eta) {
  if (rho <= 0.0) return 0.0;
  return rho / (rho + (1.0 - rho) * logistic(-eta));
}

std::vector<std::uint8_t> sample_d(const NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                                   const Eigen::VectorXd& rho, const std::vector<int>& s, const RngStream& rng,
                                   int threads) {
  std::vector<std::uint8_t> d(panel.x.size(), 0);
  const Index E = panel.edges();
  parallel_for(0, panel.T, threads, [&](long t) {
    RngStream local = rng.derive({static_cast<std::uint64_t>(t)});
    const int l = s[static_cast<std::size_t>(t)];
    const double r = rho[l];
    const double* col = eta[static_cast<std::size_t>(l)].col(t).data();
    const auto* x = panel.slice(t);
    auto* out = d.data() + E * t;
    for (Index e = 0; e < E; ++e) {
      if (x[e]) continue;
      out[e] = local.uniform() < allocation_probability(r, col[e]) ? 1 : 0;
    }
  });
  return d;
}

Eigen::MatrixXd sample_omega(const NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                             const std::vector<int>& s, const RngStream& rng, int threads) {
  const Index E = panel.edges();
  Eigen::MatrixXd omega(E, panel.T);
  parallel_for(0, panel.T, threads, [&](long t) {
    RngStream local = rng.derive({static_cast<std::uint64_t>(t)});
    const double* col = eta[static_cast<std::size_t>(s[static_cast<std::size_t>(t)])].col(t).data();
    for (Index e = 0; e < E; ++e) omega(e, t) = sample_pg1(col[e], local);
  });
  return omega;
}

// ---------------------------------------------------------------------------
// Block (II)

double level_scale(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, Index r) {
  double total = 0.0;
  for (Index l = 0; l < params.regimes(); ++l) {
    const auto& m = params.marginals[static_cast<std::size_t>(l)];
    const auto& w = shrink.w[static_cast<std::size_t>(l)];
    for (Index h = 0; h < m.order(); ++h) total += marginal_deviation(m, h, r, cfg.gamma_prior_mean) / w(h, r);
  }
  return total;
}

namespace {

double total_dim(const RegimeParams& params) {
  const auto dims = params.marginals.front().dims();
  return static_cast<double>(std::accumulate(dims.begin(), dims.end(), Index{0}));
}

}  // namespace

GigParams psi_conditional(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, Index r) {
  const double n = total_dim(params);
  const double L = static_cast<double>(params.regimes());
  return {2.0 * cfg.b_tau, level_scale(params, shrink, cfg, r), cfg.alpha - 0.5 * n * L};
}

GigParams tau_conditional(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg) {
  const double n = total_dim(params);
  const double L = static_cast<double>(params.regimes());
  const double R = static_cast<double>(params.rank());
  double b = 0.0;
  for (Index r = 0; r < params.rank(); ++r) b += level_scale(params, shrink, cfg, r) / shrink.phi[r];
  return {2.0 * cfg.b_tau, b, cfg.a_tau() - 0.5 * n * L * R};
}

GigParams w_conditional(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, Index h,
                        Index r, Index l) {
  const auto& m = params.marginals.at(static_cast<std::size_t>(l));
  const double lam = shrink.lambda[l];
  const double ss = marginal_deviation(m, h, r, cfg.gamma_prior_mean);
  return {lam * lam, ss / (shrink.tau * shrink.phi[r]), 1.0 - 0.5 * static_cast<double>(m.dim(h))};
}

void sample_level_variances(const RegimeParams& params, ShrinkageState& shrink, const PriorConfig& cfg,
                            RngStream& rng) {
  const Index R = params.rank();
  shrink.psi.resize(R);
  for (Index r = 0; r < R; ++r) shrink.psi[r] = sample_gig(psi_conditional(params, shrink, cfg, r), rng);
  shrink.phi = shrink.psi / shrink.psi.sum();
}

double sample_tau(const RegimeParams& params, const ShrinkageState& shrink, const PriorConfig& cfg, RngStream& rng) {
  return sample_gig(tau_conditional(params, shrink, cfg), rng);
}

void sample_w(const RegimeParams& params, ShrinkageState& shrink, const PriorConfig& cfg, RngStream& rng) {
  for (Index l = 0; l < params.regimes(); ++l) {
    auto& w = shrink.w[static_cast<std::size_t>(l)];
    for (Index r = 0; r < params.rank(); ++r) {
      for (Index h = 0; h < w.rows(); ++h) w(h, r) = sample_gig(w_conditional(params, shrink, cfg, h, r, l), rng);
    }
  }
}

double LambdaTarget::log_density(double eta) const {
  const double lam = std::exp(eta);
  return shape * eta - rate * lam - 0.5 * lam * lam * sum_w;
}

double LambdaTarget::gradient(double eta) const {
  const double lam = std::exp(eta);
  return shape - rate * lam - lam * lam * sum_w;
}

LambdaTarget lambda_target(const ShrinkageState& shrink, const PriorConfig& cfg, Index l) {
  const auto& w = shrink.w.at(static_cast<std::size_t>(l));
  return {cfg.a_lambda[l] + 2.0 * static_cast<double>(w.size()), cfg.b_lambda[l], w.sum()};
}

HmcResult sample_lambda(ShrinkageState& shrink, const PriorConfig& cfg, Index l, double step, int nleap,
                        RngStream& rng) {
  const LambdaTarget target = lambda_target(shrink, cfg, l);
  HmcResult res = hmc_update([&](double e) { return target.log_density(e); },
                             [&](double e) { return target.gradient(e); }, std::log(shrink.lambda[l]), step, nleap,
                             rng);
  shrink.lambda[l] = std::exp(res.value);
  return res;
}

double adapted_step(double step, const HmcResult& move, long round) {
  const double accept = move.flagged ? 0.0 : std::min(1.0, std::exp(-move.energy_error));
  const double gain = std::pow(static_cast<double>(round) + 10.0, -0.6);
  return std::clamp(step * std::exp(gain * (accept - 0.75)), 1e-4, 5.0);
}

// ---------------------------------------------------------------------------
// Block (III)

Eigen::VectorXd GaussianConditional::mean() const {
  if (diagonal) return linear.cwiseQuotient(precision.diagonal());
  return precision.llt().solve(linear);
}

double GaussianConditional::log_density_difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  return gaussian_canonical_log_kernel(a, precision, linear) - gaussian_canonical_log_kernel(b, precision, linear);
}

Eigen::VectorXd sample(const GaussianConditional& g, RngStream& rng, double jitter) {
  if (g.diagonal) {
    const Index n = g.linear.size();
    Eigen::VectorXd out(n);
    for (Index i = 0; i < n; ++i) {
      const double p = g.precision(i, i);
      if (!(p > 0.0) || !std::isfinite(p)) throw NumericalError("gamma draw: non-positive precision entry");
      out[i] = g.linear[i] / p + sample_normal(rng) / std::sqrt(p);
    }
    return out;
  }
  if (jitter > 0.0) {
    Eigen::MatrixXd p = g.precision;
    p.diagonal().array() += jitter * p.diagonal().mean();
    return sample_gaussian_canonical(p, g.linear, rng);
  }
  return sample_gaussian_canonical(g.precision, g.linear, rng);
}

AugmentedWeights augmented_weights(const NetworkPanel& panel, const AugmentedState& aug) {
  const Index E = panel.edges();
  AugmentedWeights w;
  w.kappa.resize(E, panel.T);
  w.omega.resize(E, panel.T);
  for (Index t = 0; t < panel.T; ++t) {
    const auto* x = panel.slice(t);
    const auto* d = aug.d.data() + E * t;
    for (Index e = 0; e < E; ++e) {
      w.kappa(e, t) = kappa(x[e], d[e]);
      w.omega(e, t) = d[e] ? 0.0 : aug.omega(e, t);
    }
  }
  return w;
}

std::vector<Index> regime_times(const std::vector<int>& s, Index l) {
  std::vector<Index> out;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t] == l) out.push_back(static_cast<Index>(t));
  }
  return out;
}

double gamma_prior_variance(const ShrinkageState& shrink, Index h, Index r, Index l) {
  return shrink.tau * shrink.phi[r] * shrink.w.at(static_cast<std::size_t>(l))(h, r);
}

GaussianConditional gamma_conditional(const NetworkPanel& panel, const AugmentedWeights& weights,
                                      const std::vector<Index>& times, const Marginals& m,
                                      const Eigen::MatrixXd& eta_l, double prior_variance, double prior_mean,
                                      Index h, Index r) {
  if (h < 0 || h >= 4 || r < 0 || r >= m.rank()) throw DimensionError("gamma_conditional: invalid mode or rank");
  const Index n = m.dim(h);
  GaussianConditional g;
  g.precision = Eigen::MatrixXd::Identity(n, n) / prior_variance;
  g.linear = Eigen::VectorXd::Constant(n, prior_mean / prior_variance);

  const auto g1 = m.marginal(0, r);
  const auto g2 = m.marginal(1, r);
  const auto g3 = m.marginal(2, r);
  const Eigen::VectorXd loadings = panel.z * m.marginal(3, r);
  const Index I = panel.I, J = panel.J, K = panel.K;

  if (h < 3) {
    g.diagonal = true;
    Eigen::VectorXd prec = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(n);
    for (Index t : times) {
      const double et = loadings[t];
      if (et == 0.0) continue;
      const double* om = weights.omega.col(t).data();
      const double* ka = weights.kappa.col(t).data();
      const double* eta = eta_l.col(t).data();
      Index e = 0;
      for (Index k = 0; k < K; ++k) {
        for (Index j = 0; j < J; ++j) {
          const double jk = g2[j] * g3[k];
          for (Index i = 0; i < I; ++i, ++e) {
            const double c = g1[i] * jk;
            const double resid = ka[e] - om[e] * (eta[e] - c * et);
            const double u = h == 0 ? jk : (h == 1 ? g1[i] * g3[k] : g1[i] * g2[j]);
            const Index idx = h == 0 ? i : (h == 1 ? j : k);
            const double a = et * u;
            prec[idx] += om[e] * a * a;
            lin[idx] += a * resid;
          }
        }
      }
    }
    g.precision.diagonal() += prec;
    g.linear += lin;
    return g;
  }

  const Eigen::VectorXd c = rank_one_columns(m, 0, 3).col(r);
  const Index Q = panel.Q;
  Eigen::MatrixXd zw(static_cast<Index>(times.size()), Q);
  Eigen::VectorXd scale(static_cast<Index>(times.size()));
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(Q);
  for (std::size_t n_t = 0; n_t < times.size(); ++n_t) {
    const Index t = times[n_t];
    const double et = loadings[t];
    const double* om = weights.omega.col(t).data();
    const double* ka = weights.kappa.col(t).data();
    const double* eta = eta_l.col(t).data();
    double quad = 0.0, proj = 0.0;
    for (Index e = 0; e < c.size(); ++e) {
      quad += om[e] * c[e] * c[e];
      proj += c[e] * (ka[e] - om[e] * (eta[e] - c[e] * et));
    }
    zw.row(static_cast<Index>(n_t)) = panel.z.row(t);
    scale[static_cast<Index>(n_t)] = quad;
    lin += proj * panel.z.row(t).transpose();
  }
  g.precision.noalias() += zw.transpose() * scale.asDiagonal() * zw;
  g.linear += lin;
  return g;
}

void sample_regime_marginals(const NetworkPanel& panel, const AugmentedWeights& weights, ChainState& state,
                             const PriorConfig& cfg, Index l, RngStream& rng, double jitter) {
  const auto times = regime_times(state.aug.s, l);
  auto& m = state.params.marginals[static_cast<std::size_t>(l)];
  auto& eta = state.eta[static_cast<std::size_t>(l)];
  for (Index r = 0; r < m.rank(); ++r) {
    for (Index h = 0; h < m.order(); ++h) {
      const double v = gamma_prior_variance(state.shrink, h, r, l);
      const auto cond = gamma_conditional(panel, weights, times, m, eta, v, cfg.gamma_prior_mean, h, r);
      m.marginal(h, r) = sample(cond, rng, jitter);
      eta = linear_predictor(m, panel.z);
    }
  }
}

// ---------------------------------------------------------------------------
// Block (IV)

AllocationCounts allocation_counts(const NetworkPanel& panel, const AugmentedState& aug, Index regimes) {
  AllocationCounts n{Eigen::VectorXd::Zero(regimes), Eigen::VectorXd::Zero(regimes)};
  const Index E = panel.edges();
  for (Index t = 0; t < panel.T; ++t) {
    const int l = aug.s[static_cast<std::size_t>(t)];
    const auto* d = aug.d.data() + E * t;
    Index ones = 0;
    for (Index e = 0; e < E; ++e) ones += d[e];
    n.ones[l] += static_cast<double>(ones);
    n.zeros[l] += static_cast<double>(E - ones);
  }
  return n;
}

Eigen::VectorXd sample_rho(const NetworkPanel& panel, const AugmentedState& aug, const PriorConfig& cfg,
                           RngStream& rng) {
  const auto n = allocation_counts(panel, aug, cfg.regimes);
  Eigen::VectorXd rho(cfg.regimes);
  for (Index l = 0; l < cfg.regimes; ++l) rho[l] = sample_beta(n.ones[l] + cfg.a_rho[l], n.zeros[l] + cfg.b_rho[l], rng);
  return rho;
}

Eigen::MatrixXd sample_xi(const std::vector<int>& s, const PriorConfig& cfg, RngStream& rng) {
  const Eigen::MatrixXd n = transition_counts(s, cfg.regimes);
  Eigen::MatrixXd xi(cfg.regimes, cfg.regimes);
  for (Index l = 0; l < cfg.regimes; ++l) {
    xi.row(l) = sample_dirichlet((cfg.c_xi.row(l) + n.row(l)).transpose(), rng).transpose();
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Identification

std::vector<Index> relabel_permutation(const Eigen::VectorXd& rho) {
  std::vector<Index> perm(static_cast<std::size_t>(rho.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) { return rho[a] > rho[b]; });
  return perm;
}

bool relabel(RegimeParams& params, ShrinkageState& shrink, std::vector<int>& s, std::vector<Eigen::MatrixXd>* eta) {
  const auto perm = relabel_permutation(params.rho);
  bool identity = true;
  for (std::size_t l = 0; l < perm.size(); ++l) identity = identity && perm[l] == static_cast<Index>(l);
  if (identity) return false;

  const Index L = params.regimes();
  auto permute = [&](auto& v) {
    auto copy = v;
    for (Index l = 0; l < L; ++l) v[static_cast<std::size_t>(l)] = copy[static_cast<std::size_t>(perm[l])];
  };
  permute(params.marginals);
  permute(shrink.w);
  if (eta) permute(*eta);

  Eigen::VectorXd rho(L), lambda(L);
  Eigen::MatrixXd xi(L, L);
  std::vector<int> inverse(static_cast<std::size_t>(L));
  for (Index a = 0; a < L; ++a) {
    rho[a] = params.rho[perm[a]];
    lambda[a] = shrink.lambda[perm[a]];
    inverse[static_cast<std::size_t>(perm[a])] = static_cast<int>(a);
    for (Index b = 0; b < L; ++b) xi(a, b) = params.xi(perm[a], perm[b]);
  }
  params.rho = rho;
  params.xi = xi;
  shrink.lambda = lambda;
  for (auto& st : s) st = inverse[static_cast<std::size_t>(st)];
  return true;
}

// ---------------------------------------------------------------------------
// Orchestration

std::vector<int> density_split(const NetworkPanel& panel, Index regimes) {
  std::vector<Index> order(static_cast<std::size_t>(panel.T));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<Index> counts(order.size());
  for (Index t = 0; t < panel.T; ++t) counts[static_cast<std::size_t>(t)] = panel.edge_count(t);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return counts[a] < counts[b]; });
  std::vector<int> s(order.size());
  for (Index p = 0; p < panel.T; ++p) {
    s[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = static_cast<int>(p * regimes / panel.T);
  }
  return s;
}

Eigen::VectorXd initial_rho(const PriorConfig& cfg) {
  const Index L = cfg.regimes;
  std::vector<double> means(static_cast<std::size_t>(L));
  for (Index l = 0; l < L; ++l) means[static_cast<std::size_t>(l)] = cfg.a_rho[l] / (cfg.a_rho[l] + cfg.b_rho[l]);
  std::sort(means.begin(), means.end(), std::greater<>());
  Eigen::VectorXd rho(L);
  for (Index l = 0; l < L; ++l) {
    double v = means[static_cast<std::size_t>(l)];
    if (l > 0 && v >= rho[l - 1]) v = 0.9 * rho[l - 1];
    rho[l] = v;
  }
  return rho;
}

ChainState initial_state(const NetworkPanel& panel, const PriorConfig& cfg, RngStream& rng) {
  panel.validate();
  cfg.validate();
  const Index L = cfg.regimes;
  const Index R = cfg.rank;
  ChainState st;
  st.aug = AugmentedState::zeros(panel);
  st.aug.s = density_split(panel, L);

  const Shape dims{panel.I, panel.J, panel.K, panel.Q};
  for (Index l = 0; l < L; ++l) {
    Marginals m(dims, R);
    for (Index h = 0; h < 4; ++h) {
      for (Index r = 0; r < R; ++r) {
        for (Index i = 0; i < dims[static_cast<std::size_t>(h)]; ++i) m.factor(h)(i, r) = 0.1 * sample_normal(rng);
      }
    }
    st.params.marginals.push_back(std::move(m));
  }

  st.params.rho = initial_rho(cfg);
  st.params.xi = cfg.c_xi.array().colwise() / cfg.c_xi.rowwise().sum().array();

  st.shrink.tau = cfg.a_tau() / cfg.b_tau;
  st.shrink.psi = Eigen::VectorXd::Constant(R, cfg.alpha / cfg.b_tau);
  st.shrink.phi = Eigen::VectorXd::Constant(R, 1.0 / static_cast<double>(R));
  st.shrink.lambda = cfg.a_lambda.cwiseQuotient(cfg.b_lambda);
  for (Index l = 0; l < L; ++l) {
    const double lam = st.shrink.lambda[l];
    st.shrink.w.push_back(Eigen::MatrixXd::Constant(4, R, 2.0 / (lam * lam)));
  }
  st.hmc_step = Eigen::VectorXd::Constant(L, ChainConfig{}.hmc_step);
  st.refresh_predictors(panel);
  return st;
}

void gibbs_sweep(const NetworkPanel& panel, const PriorConfig& cfg, ChainState& state, const SweepOptions& opt,
                 const RngStream& rng, SweepStats* stats) {
  int block = kBlockStates;
  auto tick = Clock::now();
  auto lap = [&](int next) {
    if (stats) stats->seconds[static_cast<std::size_t>(block)] += seconds_since(tick);
    tick = Clock::now();
    block = next;
  };
  const Index L = cfg.regimes;
  try {
    {
      const Eigen::MatrixXd emis = log_emissions(panel, state.eta, state.params.rho, opt.threads);
      RngStream r = rng.derive({0});
      FfbsResult path = ffbs(emis, state.params.xi, r);
      state.aug.s = std::move(path.s);
      state.loglik = path.loglik;
      state.aug.d = sample_d(panel, state.eta, state.params.rho, state.aug.s, rng.derive({1}), opt.threads);
      state.aug.omega = sample_omega(panel, state.eta, state.aug.s, rng.derive({2}), opt.threads);
    }
    lap(kBlockVariances);
    {
      RngStream r = rng.derive({3});
      sample_level_variances(state.params, state.shrink, cfg, r);
      GigParams tp = tau_conditional(state.params, state.shrink, cfg);
      if (opt.mutation == Mutation::TauOrderPlusOne) tp.p += 1.0;
      state.shrink.tau = sample_gig(tp, r);
      sample_w(state.params, state.shrink, cfg, r);
      for (Index l = 0; l < L; ++l) {
        RngStream rl = rng.derive({4, static_cast<std::uint64_t>(l)});
        const HmcResult res = sample_lambda(state.shrink, cfg, l, state.hmc_step[l], opt.hmc_nleap, rl);
        if (stats) {
          ++stats->hmc_proposals;
          stats->hmc_accepts += res.accepted ? 1 : 0;
          stats->hmc_flagged += res.flagged ? 1 : 0;
        }
        if (opt.adapt_hmc) state.hmc_step[l] = adapted_step(state.hmc_step[l], res, opt.adapt_round);
      }
    }
    lap(kBlockMarginals);
    {
      const AugmentedWeights weights = augmented_weights(panel, state.aug);
      for (Index l = 0; l < L; ++l) {
        RngStream r = rng.derive({5, static_cast<std::uint64_t>(l)});
        sample_regime_marginals(panel, weights, state, cfg, l, r, opt.jitter);
      }
    }
    lap(kBlockSparsity);
    {
      RngStream r = rng.derive({6});
      state.params.rho = sample_rho(panel, state.aug, cfg, r);
      state.params.xi = sample_xi(state.aug.s, cfg, r);
    }
    lap(kBlockRelabel);
    relabel(state.params, state.shrink, state.aug.s, &state.eta);
    lap(kBlockCount);
  } catch (const SamplerError&) {
    throw;
  } catch (const std::exception& e) {
    throw SamplerError(e.what(), -1, block);
  }
}

RngStream sweep_stream(std::uint64_t seed, long iteration) {
  return RngStream(seed).derive({static_cast<std::uint64_t>(iteration)});
}

ChainResult run_chain(const NetworkPanel& panel, const PriorConfig& cfg, const ChainConfig& chain,
                      const DrawCallback& on_draw) {
  RngStream init = RngStream(chain.seed).derive({~std::uint64_t{0}});
  ChainState start = initial_state(panel, cfg, init);
  start.hmc_step.setConstant(chain.hmc_step);
  return run_chain(panel, cfg, chain, std::move(start), on_draw);
}

ChainResult run_chain(const NetworkPanel& panel, const PriorConfig& cfg, const ChainConfig& chain, ChainState start,
                      const DrawCallback& on_draw) {
  chain.validate();
  panel.validate();
  cfg.validate();
  if (start.params.regimes() != cfg.regimes || start.params.rank() != cfg.rank) {
    throw ValidationError("run_chain: starting state does not match the prior's L and R");
  }
  ChainResult out;
  out.final_state = std::move(start);
  ChainState& state = out.final_state;
  if (state.hmc_step.size() != cfg.regimes) state.hmc_step = Eigen::VectorXd::Constant(cfg.regimes, chain.hmc_step);
  if (static_cast<Index>(state.eta.size()) != cfg.regimes) state.refresh_predictors(panel);
  out.draws.reserve(static_cast<std::size_t>(chain.stored_draws()));

  SweepOptions opt;
  opt.hmc_nleap = chain.hmc_nleap;
  opt.jitter = chain.jitter;
  opt.threads = chain.threads;
  SweepStats burn, post;
  const auto start_time = Clock::now();
  for (long it = 0; it < chain.iterations; ++it) {
    const bool burning = it < chain.burn_in;
    opt.adapt_hmc = chain.adapt_hmc && burning;
    opt.adapt_round = it;
    try {
      gibbs_sweep(panel, cfg, state, opt, sweep_stream(chain.seed, it), burning ? &burn : &post);
    } catch (const SamplerError& e) {
      throw SamplerError("iteration " + std::to_string(it) + ", block " + block_name(e.block) + ": " + e.what(), it,
                         e.block);
    }
    if (!burning && (it - chain.burn_in) % chain.thin == 0) {
      Draw d{it, state.params, state.shrink, state.aug.s, observed_loglik(panel, state.params, chain.threads)};
      if (on_draw) on_draw(d);
      out.draws.push_back(std::move(d));
    }
  }
  auto& diag = out.diagnostics;
  diag.sweeps = chain.iterations;
  diag.total_seconds = seconds_since(start_time);
  for (std::size_t b = 0; b < diag.block_seconds.size(); ++b) diag.block_seconds[b] = burn.seconds[b] + post.seconds[b];
  auto rate = [](const SweepStats& s) {
    return s.hmc_proposals ? static_cast<double>(s.hmc_accepts) / static_cast<double>(s.hmc_proposals) : 0.0;
  };
  diag.hmc_acceptance_burn_in = rate(burn);
  diag.hmc_acceptance = post.hmc_proposals ? rate(post) : rate(burn);
  diag.hmc_flagged = burn.hmc_flagged + post.hmc_flagged;
  diag.hmc_step = state.hmc_step;
  return out;
}

}  // namespace mstr
