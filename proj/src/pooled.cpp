#include "mstr/pooled.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "mstr/diagnostics.hpp"

namespace mstr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double deviation(const PooledParams& p, const PriorConfig& cfg, Index l) {
  return (p.g.col(l).array() - cfg.gamma_prior_mean).matrix().squaredNorm();
}

}  // namespace

std::vector<Eigen::MatrixXd> pooled_predictors(const PooledParams& p, const NetworkPanel& panel) {
  std::vector<Eigen::MatrixXd> eta;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(panel.edges());
  for (Index l = 0; l < p.regimes(); ++l) eta.push_back(ones * (panel.z * p.g.col(l)).transpose());
  return eta;
}

Tensor expand_pooled(const Eigen::VectorXd& g, Index I, Index J, Index K) {
  const Index Q = g.size();
  Tensor h = Tensor::Zero({I, J, K, Q, Q});
  for (Index q = 0; q < Q; ++q) {
    for (Index k = 0; k < K; ++k) {
      for (Index j = 0; j < J; ++j) {
        for (Index i = 0; i < I; ++i) h.at(i, j, k, q, q) = 1.0;
      }
    }
  }
  return mode_n_vec_product(h, g, 4);
}

double pooled_log_prior(const PooledParams& p, const PriorConfig& cfg) {
  const Index L = p.regimes();
  const double Q = static_cast<double>(p.g.rows());
  double total = log_gamma_density(p.tau, cfg.a_tau(), cfg.b_tau);
  for (Index l = 0; l < L; ++l) {
    const double var = p.tau * p.w[l];
    if (!(var > 0.0)) return -std::numeric_limits<double>::infinity();
    total += -0.5 * Q * std::log(2.0 * std::numbers::pi * var) - 0.5 * deviation(p, cfg, l) / var;
    const double rate = 0.5 * p.lambda[l] * p.lambda[l];
    total += rate > 0.0 ? std::log(rate) - rate * p.w[l] : -std::numeric_limits<double>::infinity();
    total += log_gamma_density(p.lambda[l], cfg.a_lambda[l], cfg.b_lambda[l]);
    total += log_beta_density(p.rho[l], cfg.a_rho[l], cfg.b_rho[l]);
    total += log_dirichlet_density(p.xi.row(l).transpose(), cfg.c_xi.row(l).transpose());
  }
  return total;
}

double pooled_complete_data_loglik(const NetworkPanel& panel, const AugmentedState& aug, const PooledParams& p,
                                   bool include_omega_prior) {
  return complete_data_loglik(panel, aug, pooled_predictors(p, panel), p.rho, p.xi, include_omega_prior);
}

GaussianConditional pooled_g_conditional(const NetworkPanel& panel, const AugmentedWeights& weights,
                                         const std::vector<Index>& times, double prior_variance, double prior_mean) {
  const Index Q = panel.Q;
  GaussianConditional g;
  g.precision = Eigen::MatrixXd::Identity(Q, Q) / prior_variance;
  g.linear = Eigen::VectorXd::Constant(Q, prior_mean / prior_variance);
  for (Index t : times) {
    const Eigen::VectorXd zt = panel.z.row(t).transpose();
    g.precision.noalias() += weights.omega.col(t).sum() * (zt * zt.transpose());
    g.linear += weights.kappa.col(t).sum() * zt;
  }
  return g;
}

GigParams pooled_tau_conditional(const PooledParams& p, const PriorConfig& cfg) {
  double b = 0.0;
  for (Index l = 0; l < p.regimes(); ++l) b += deviation(p, cfg, l) / p.w[l];
  const double QL = static_cast<double>(p.g.rows() * p.regimes());
  return {2.0 * cfg.b_tau, b, cfg.a_tau() - 0.5 * QL};
}

GigParams pooled_w_conditional(const PooledParams& p, const PriorConfig& cfg, Index l) {
  const double lam = p.lambda[l];
  return {lam * lam, deviation(p, cfg, l) / p.tau, 1.0 - 0.5 * static_cast<double>(p.g.rows())};
}

LambdaTarget pooled_lambda_target(const PooledParams& p, const PriorConfig& cfg, Index l) {
  return {cfg.a_lambda[l] + 2.0, cfg.b_lambda[l], p.w[l]};
}

void sample_variances_pooled(PooledParams& p, const PriorConfig& cfg, const Eigen::VectorXd& step, int nleap,
                             RngStream& rng, SweepStats* stats, std::vector<HmcResult>* moves) {
  p.tau = sample_gig(pooled_tau_conditional(p, cfg), rng);
  for (Index l = 0; l < p.regimes(); ++l) p.w[l] = sample_gig(pooled_w_conditional(p, cfg, l), rng);
  for (Index l = 0; l < p.regimes(); ++l) {
    const LambdaTarget target = pooled_lambda_target(p, cfg, l);
    const HmcResult res = hmc_update([&](double e) { return target.log_density(e); },
                                     [&](double e) { return target.gradient(e); }, std::log(p.lambda[l]), step[l],
                                     nleap, rng);
    p.lambda[l] = std::exp(res.value);
    if (stats) {
      ++stats->hmc_proposals;
      stats->hmc_accepts += res.accepted ? 1 : 0;
      stats->hmc_flagged += res.flagged ? 1 : 0;
    }
    if (moves) moves->push_back(res);
  }
}

void sample_g_pooled(const NetworkPanel& panel, const AugmentedState& aug, PooledParams& p, const PriorConfig& cfg,
                     RngStream& rng, double jitter) {
  const AugmentedWeights weights = augmented_weights(panel, aug);
  for (Index l = 0; l < p.regimes(); ++l) {
    const auto cond = pooled_g_conditional(panel, weights, regime_times(aug.s, l), p.tau * p.w[l],
                                           cfg.gamma_prior_mean);
    p.g.col(l) = sample(cond, rng, jitter);
  }
}

bool relabel(PooledParams& p, std::vector<int>& s, std::vector<Eigen::MatrixXd>* eta) {
  const auto perm = relabel_permutation(p.rho);
  bool identity = true;
  for (std::size_t l = 0; l < perm.size(); ++l) identity = identity && perm[l] == static_cast<Index>(l);
  if (identity) return false;
  const Index L = p.regimes();
  PooledParams old = p;
  std::vector<int> inverse(static_cast<std::size_t>(L));
  for (Index a = 0; a < L; ++a) {
    p.g.col(a) = old.g.col(perm[a]);
    p.w[a] = old.w[perm[a]];
    p.lambda[a] = old.lambda[perm[a]];
    p.rho[a] = old.rho[perm[a]];
    for (Index b = 0; b < L; ++b) p.xi(a, b) = old.xi(perm[a], perm[b]);
    inverse[static_cast<std::size_t>(perm[a])] = static_cast<int>(a);
  }
  if (eta) {
    auto copy = *eta;
    for (Index a = 0; a < L; ++a) (*eta)[static_cast<std::size_t>(a)] = copy[static_cast<std::size_t>(perm[a])];
  }
  for (auto& st : s) st = inverse[static_cast<std::size_t>(st)];
  return true;
}

PooledState pooled_initial_state(const NetworkPanel& panel, const PriorConfig& cfg, RngStream& rng) {
  panel.validate();
  cfg.validate();
  const Index L = cfg.regimes;
  PooledState st;
  st.aug = AugmentedState::zeros(panel);
  st.aug.s = density_split(panel, L);
  auto& p = st.params;
  p.g.resize(panel.Q, L);
  for (Index l = 0; l < L; ++l) {
    for (Index q = 0; q < panel.Q; ++q) p.g(q, l) = 0.1 * sample_normal(rng);
  }
  p.tau = cfg.a_tau() / cfg.b_tau;
  p.lambda = cfg.a_lambda.cwiseQuotient(cfg.b_lambda);
  p.w = (2.0 / p.lambda.array().square()).matrix();
  p.rho = initial_rho(cfg);
  p.xi = cfg.c_xi.array().colwise() / cfg.c_xi.rowwise().sum().array();
  st.refresh_predictors(panel);
  return st;
}

void pooled_sweep(const NetworkPanel& panel, const PriorConfig& cfg, PooledState& state, const SweepOptions& opt,
                  const RngStream& rng, SweepStats* stats) {
  int block = kBlockStates;
  auto tick = Clock::now();
  auto lap = [&](int next) {
    if (stats) stats->seconds[static_cast<std::size_t>(block)] += seconds_since(tick);
    tick = Clock::now();
    block = next;
  };
  auto& p = state.params;
  try {
    {
      const Eigen::MatrixXd emis = log_emissions(panel, state.eta, p.rho, opt.threads);
      RngStream r = rng.derive({0});
      FfbsResult path = ffbs(emis, p.xi, r);
      state.aug.s = std::move(path.s);
      state.loglik = path.loglik;
      state.aug.d = sample_d(panel, state.eta, p.rho, state.aug.s, rng.derive({1}), opt.threads);
      state.aug.omega = sample_omega(panel, state.eta, state.aug.s, rng.derive({2}), opt.threads);
    }
    lap(kBlockVariances);
    {
      RngStream r = rng.derive({3});
      std::vector<HmcResult> moves;
      sample_variances_pooled(p, cfg, state.hmc_step, opt.hmc_nleap, r, stats, &moves);
      if (opt.mutation == Mutation::TauOrderPlusOne) {
        GigParams tp = pooled_tau_conditional(p, cfg);
        tp.p += 1.0;
        p.tau = sample_gig(tp, r);
      }
      if (opt.adapt_hmc) {
        for (Index l = 0; l < p.regimes(); ++l) {
          state.hmc_step[l] = adapted_step(state.hmc_step[l], moves[static_cast<std::size_t>(l)], opt.adapt_round);
        }
      }
    }
    lap(kBlockMarginals);
    {
      RngStream r = rng.derive({5});
      sample_g_pooled(panel, state.aug, p, cfg, r, opt.jitter);
      state.refresh_predictors(panel);
    }
    lap(kBlockSparsity);
    {
      RngStream r = rng.derive({6});
      p.rho = sample_rho(panel, state.aug, cfg, r);
      p.xi = sample_xi(state.aug.s, cfg, r);
    }
    lap(kBlockRelabel);
    relabel(p, state.aug.s, &state.eta);
    lap(kBlockCount);
  } catch (const SamplerError&) {
    throw;
  } catch (const std::exception& e) {
    throw SamplerError(e.what(), -1, block);
  }
}

PooledResult run_pooled_chain(const NetworkPanel& panel, const PriorConfig& cfg, const ChainConfig& chain,
                              const PooledDrawCallback& on_draw) {
  chain.validate();
  panel.validate();
  cfg.validate();
  PooledResult out;
  RngStream init = RngStream(chain.seed).derive({~std::uint64_t{0}});
  out.final_state = pooled_initial_state(panel, cfg, init);
  PooledState& state = out.final_state;
  state.hmc_step = Eigen::VectorXd::Constant(cfg.regimes, chain.hmc_step);
  out.draws.reserve(static_cast<std::size_t>(chain.stored_draws()));

  SweepOptions opt;
  opt.hmc_nleap = chain.hmc_nleap;
  opt.jitter = chain.jitter;
  opt.threads = chain.threads;
  SweepStats burn, post;
  const auto start = Clock::now();
  for (long it = 0; it < chain.iterations; ++it) {
    const bool burning = it < chain.burn_in;
    opt.adapt_hmc = chain.adapt_hmc && burning;
    opt.adapt_round = it;
    try {
      pooled_sweep(panel, cfg, state, opt, sweep_stream(chain.seed, it), burning ? &burn : &post);
    } catch (const SamplerError& e) {
      throw SamplerError("iteration " + std::to_string(it) + ", block " + block_name(e.block) + ": " + e.what(), it,
                         e.block);
    }
    if (!burning && (it - chain.burn_in) % chain.thin == 0) {
      const auto eta = pooled_predictors(state.params, panel);
      const double ll = forward_filter(log_emissions(panel, eta, state.params.rho, chain.threads), state.params.xi).loglik;
      PooledDraw d{it, state.params, state.aug.s, ll};
      if (on_draw) on_draw(d);
      out.draws.push_back(std::move(d));
    }
  }
  auto& diag = out.diagnostics;
  diag.sweeps = chain.iterations;
  diag.total_seconds = seconds_since(start);
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

PooledParams draw_pooled_from_prior(Index Q, const PriorConfig& cfg, RngStream& rng) {
  cfg.validate();
  const Index L = cfg.regimes;
  PooledParams p;
  p.tau = sample_gamma(cfg.a_tau(), cfg.b_tau, rng);
  p.g.resize(Q, L);
  p.w.resize(L);
  p.lambda.resize(L);
  p.rho.resize(L);
  p.xi.resize(L, L);
  for (Index l = 0; l < L; ++l) {
    p.lambda[l] = sample_gamma(cfg.a_lambda[l], cfg.b_lambda[l], rng);
    p.w[l] = sample_gamma(1.0, 0.5 * p.lambda[l] * p.lambda[l], rng);
    const double sd = std::sqrt(p.tau * p.w[l]);
    for (Index q = 0; q < Q; ++q) p.g(q, l) = cfg.gamma_prior_mean + sd * sample_normal(rng);
    p.rho[l] = sample_beta(cfg.a_rho[l], cfg.b_rho[l], rng);
    p.xi.row(l) = sample_dirichlet(cfg.c_xi.row(l).transpose(), rng).transpose();
  }
  std::vector<int> no_path;
  relabel(p, no_path);
  return p;
}

Simulation simulate_pooled_panel(const PanelDims& dims, const PooledParams& truth, std::uint64_t seed,
                                 InitialLaw law) {
  dims.validate();
  if (truth.g.rows() != dims.Q) throw DimensionError("simulate_pooled_panel: g has the wrong number of covariates");
  RngStream base(seed);
  RngStream zr = base.derive({1});
  Simulation sim;
  sim.panel = NetworkPanel(dims.I, dims.J, dims.K, dims.T, dims.Q);
  sim.panel.z = simulate_covariates(dims.T, dims.Q, zr);
  RngStream path_rng = base.derive({3});
  RngStream edge_rng = base.derive({4});
  sim.truth.s = simulate_path(truth.xi, dims.T, law, path_rng);
  sim.truth.d = simulate_edges(sim.panel, pooled_predictors(truth, sim.panel), truth.rho, sim.truth.s, edge_rng);
  sim.truth.params.rho = truth.rho;
  sim.truth.params.xi = truth.xi;
  sim.truth.seed = seed;
  return sim;
}

std::vector<std::string> pooled_geweke_statistic_names(Index regimes) {
  std::vector<std::string> base{"tau"};
  for (Index l = 0; l < regimes; ++l) base.push_back("rho_" + std::to_string(l + 1));
  for (Index l = 0; l < regimes; ++l) base.push_back("lambda_" + std::to_string(l + 1));
  for (Index l = 0; l < regimes; ++l) base.push_back("w_" + std::to_string(l + 1));
  base.push_back("g_first");
  base.push_back("g_last");
  base.push_back("occupancy_1");
  std::vector<std::string> names = base;
  for (const auto& b : base) names.push_back(b + "^2");
  return names;
}

namespace {

std::vector<double> pooled_statistics(const PooledParams& p, const std::vector<int>& s) {
  std::vector<double> v{p.tau};
  for (Index l = 0; l < p.regimes(); ++l) v.push_back(p.rho[l]);
  for (Index l = 0; l < p.regimes(); ++l) v.push_back(p.lambda[l]);
  for (Index l = 0; l < p.regimes(); ++l) v.push_back(p.w[l]);
  v.push_back(p.g(0, 0));
  v.push_back(p.g(p.g.rows() - 1, p.regimes() - 1));
  v.push_back(static_cast<double>(std::count(s.begin(), s.end(), 0)) / static_cast<double>(s.size()));
  const std::size_t n = v.size();
  for (std::size_t k = 0; k < n; ++k) v.push_back(v[k] * v[k]);
  return v;
}

}  // namespace

GewekeReport pooled_geweke_pair(const PanelDims& dims, const PriorConfig& cfg, const GewekeConfig& gc) {
  dims.validate();
  cfg.validate();
  const RngStream base(gc.seed);
  RngStream zr = base.derive({1});
  NetworkPanel panel(dims.I, dims.J, dims.K, dims.T, dims.Q);
  panel.z = simulate_covariates(dims.T, dims.Q, zr);
  const auto names = pooled_geweke_statistic_names(cfg.regimes);
  std::vector<std::vector<double>> mc(names.size()), sc(names.size());

  const long n_marginal = gc.marginal_draws > 0 ? gc.marginal_draws : gc.sweeps;
  RngStream mr = base.derive({2});
  for (long m = 0; m < n_marginal; ++m) {
    const PooledParams p = draw_pooled_from_prior(dims.Q, cfg, mr);
    const auto v = pooled_statistics(p, simulate_path(p.xi, dims.T, InitialLaw::Uniform, mr));
    for (std::size_t k = 0; k < names.size(); ++k) mc[k].push_back(v[k]);
  }

  RngStream sr = base.derive({3});
  PooledState state;
  state.params = draw_pooled_from_prior(dims.Q, cfg, sr);
  state.aug = AugmentedState::zeros(panel);
  state.aug.s = simulate_path(state.params.xi, dims.T, InitialLaw::Uniform, sr);
  state.refresh_predictors(panel);
  state.aug.d = simulate_edges(panel, state.eta, state.params.rho, state.aug.s, sr);
  state.hmc_step = Eigen::VectorXd::Constant(cfg.regimes, gc.hmc_step);
  SweepOptions opt;
  opt.hmc_nleap = gc.hmc_nleap;
  opt.threads = gc.threads;
  opt.mutation = gc.mutation;
  const RngStream sweeps = base.derive({4});
  for (long it = 0; it < gc.warmup + gc.sweeps; ++it) {
    pooled_sweep(panel, cfg, state, opt, sweeps.derive({static_cast<std::uint64_t>(it)}));
    if (it >= gc.warmup) {
      const auto v = pooled_statistics(state.params, state.aug.s);
      for (std::size_t k = 0; k < names.size(); ++k) sc[k].push_back(v[k]);
    }
    RngStream dr = sweeps.derive({static_cast<std::uint64_t>(it), 1});
    state.aug.s = simulate_path(state.params.xi, dims.T, InitialLaw::Uniform, dr);
    state.aug.d = simulate_edges(panel, state.eta, state.params.rho, state.aug.s, dr);
  }
  return compare_geweke(names, mc, sc);
}

}  // namespace mstr
