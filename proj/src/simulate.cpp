#include "mstr/simulate.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mstr/diagnostics.hpp"

namespace mstr {

void PanelDims::validate() const {
  if (I < 1 || J < 1 || K < 1 || Q < 1) throw ValidationError("dims: I, J, K, Q must be positive");
  if (T < 2) throw ValidationError("dims: need T >= 2");
}

Eigen::MatrixXd simulate_covariates(Index T, Index Q, RngStream& rng) {
  Eigen::MatrixXd z(T, Q);
  for (Index t = 0; t < T; ++t) {
    z(t, 0) = 1.0;
    for (Index q = 1; q < Q; ++q) z(t, q) = sample_normal(rng);
  }
  return z;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& xi) {
  const Index L = xi.rows();
  if (xi.cols() != L) throw DimensionError("stationary_distribution: matrix must be square");
  Eigen::MatrixXd a = xi.transpose() - Eigen::MatrixXd::Identity(L, L);
  a.row(L - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L);
  rhs[L - 1] = 1.0;
  return a.colPivHouseholderQr().solve(rhs);
}

PriorDraw draw_from_prior(const PanelDims& dims, const PriorConfig& cfg, RngStream& rng) {
  dims.validate();
  cfg.validate();
  const Index L = cfg.regimes;
  const Index R = cfg.rank;
  PriorDraw out;
  auto& sh = out.shrink;
  sh.tau = sample_gamma(cfg.a_tau(), cfg.b_tau, rng);
  sh.phi = R > 1 ? sample_dirichlet(Eigen::VectorXd::Constant(R, cfg.alpha), rng) : Eigen::VectorXd::Ones(1);
  sh.psi = sh.tau * sh.phi;
  sh.lambda.resize(L);
  const Shape shape{dims.I, dims.J, dims.K, dims.Q};
  for (Index l = 0; l < L; ++l) {
    const double lam = sample_gamma(cfg.a_lambda[l], cfg.b_lambda[l], rng);
    sh.lambda[l] = lam;
    Eigen::MatrixXd w(4, R);
    for (Index r = 0; r < R; ++r) {
      for (Index h = 0; h < 4; ++h) w(h, r) = sample_gamma(1.0, 0.5 * lam * lam, rng);
    }
    Marginals m(shape, R);
    for (Index r = 0; r < R; ++r) {
      for (Index h = 0; h < 4; ++h) {
        const double sd = std::sqrt(sh.tau * sh.phi[r] * w(h, r));
        for (Index i = 0; i < m.dim(h); ++i) m.factor(h)(i, r) = cfg.gamma_prior_mean + sd * sample_normal(rng);
      }
    }
    sh.w.push_back(std::move(w));
    out.params.marginals.push_back(std::move(m));
  }
  out.params.rho.resize(L);
  out.params.xi.resize(L, L);
  for (Index l = 0; l < L; ++l) {
    out.params.rho[l] = sample_beta(cfg.a_rho[l], cfg.b_rho[l], rng);
    out.params.xi.row(l) = sample_dirichlet(cfg.c_xi.row(l).transpose(), rng).transpose();
  }
  std::vector<int> no_path;
  relabel(out.params, out.shrink, no_path);
  return out;
}

std::vector<int> simulate_path(const Eigen::MatrixXd& xi, Index T, InitialLaw law, RngStream& rng) {
  const Index L = xi.rows();
  std::vector<int> s(static_cast<std::size_t>(T));
  const Eigen::VectorXd init = law == InitialLaw::Stationary
                                   ? stationary_distribution(xi).cwiseMax(0.0).eval()
                                   : Eigen::VectorXd::Constant(L, 1.0 / static_cast<double>(L)).eval();
  s[0] = static_cast<int>(sample_categorical(init, rng));
  for (Index t = 1; t < T; ++t) {
    s[static_cast<std::size_t>(t)] = static_cast<int>(sample_categorical(xi.row(s[t - 1]).transpose(), rng));
  }
  return s;
}

std::vector<std::uint8_t> simulate_edges(NetworkPanel& panel, const RegimeParams& params, const std::vector<int>& s,
                                         RngStream& rng) {
  return simulate_edges(panel, linear_predictors(params, panel), params.rho, s, rng);
}

std::vector<std::uint8_t> simulate_edges(NetworkPanel& panel, const std::vector<Eigen::MatrixXd>& eta,
                                         const Eigen::VectorXd& rho_l, const std::vector<int>& s, RngStream& rng) {
  const Index E = panel.edges();
  std::vector<std::uint8_t> d(panel.x.size(), 0);
  panel.x.assign(panel.x.size(), 0);
  for (Index t = 0; t < panel.T; ++t) {
    const int l = s[static_cast<std::size_t>(t)];
    const double rho = rho_l[l];
    for (Index e = 0; e < E; ++e) {
      const auto n = static_cast<std::size_t>(e + E * t);
      if (rng.uniform() < rho) {
        d[n] = 1;
      } else {
        panel.x[n] = rng.uniform() < logistic(eta[static_cast<std::size_t>(l)](e, t)) ? 1 : 0;
      }
    }
  }
  return d;
}

namespace {

Simulation finish(const PanelDims& dims, RegimeParams params, ShrinkageState shrink, RngStream& rng,
                  std::uint64_t seed, InitialLaw law, const Eigen::MatrixXd& z) {
  Simulation sim;
  sim.panel = NetworkPanel(dims.I, dims.J, dims.K, dims.T, dims.Q);
  sim.panel.z = z;
  RngStream path_rng = rng.derive({3});
  RngStream edge_rng = rng.derive({4});
  sim.truth.s = simulate_path(params.xi, dims.T, law, path_rng);
  sim.truth.d = simulate_edges(sim.panel, params, sim.truth.s, edge_rng);
  sim.truth.params = std::move(params);
  sim.truth.shrink = std::move(shrink);
  sim.truth.seed = seed;
  return sim;
}

}  // namespace

Simulation simulate_panel(const PanelDims& dims, const PriorConfig& cfg, std::uint64_t seed, InitialLaw law) {
  dims.validate();
  RngStream base(seed);
  RngStream zr = base.derive({1});
  RngStream pr = base.derive({2});
  const Eigen::MatrixXd z = simulate_covariates(dims.T, dims.Q, zr);
  PriorDraw theta = draw_from_prior(dims, cfg, pr);
  return finish(dims, std::move(theta.params), std::move(theta.shrink), base, seed, law, z);
}

Simulation simulate_panel(const PanelDims& dims, const RegimeParams& truth, const ShrinkageState& shrink,
                          std::uint64_t seed, InitialLaw law) {
  dims.validate();
  for (const auto& m : truth.marginals) {
    if (m.order() != 4 || m.dim(0) != dims.I || m.dim(1) != dims.J || m.dim(2) != dims.K || m.dim(3) != dims.Q) {
      throw DimensionError("simulate_panel: truth marginals do not match the panel dimensions");
    }
  }
  if (truth.rho.size() != truth.regimes() || truth.xi.rows() != truth.regimes() || truth.xi.cols() != truth.regimes()) {
    throw DimensionError("simulate_panel: rho / xi sizes do not match the number of regimes");
  }
  RngStream base(seed);
  RngStream zr = base.derive({1});
  const Eigen::MatrixXd z = simulate_covariates(dims.T, dims.Q, zr);
  return finish(dims, truth, shrink, base, seed, law, z);
}

// ---------------------------------------------------------------------------
// Geweke

double GewekeReport::max_abs_z() const {
  double m = 0.0;
  for (const auto& s : stats) m = std::max(m, std::fabs(s.z));
  return m;
}

const GewekeStat& GewekeReport::find(const std::string& name) const {
  for (const auto& s : stats) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("GewekeReport: no statistic named " + name);
}

namespace {

struct GammaProbe {
  Index l, h, r;
  bool last;
};

std::vector<GammaProbe> gamma_probes(Index regimes) {
  const Index l2 = regimes > 1 ? 1 : 0;
  return {{0, 0, 0, false}, {0, 3, 0, false}, {l2, 1, 1, false}, {l2, 3, 1, true}};
}

}  // namespace

std::vector<std::string> geweke_statistic_names(Index regimes) {
  std::vector<std::string> base{"tau"};
  for (Index l = 0; l < regimes; ++l) base.push_back("rho_" + std::to_string(l + 1));
  for (Index l = 0; l < regimes; ++l) base.push_back("lambda_" + std::to_string(l + 1));
  for (const auto& p : gamma_probes(regimes)) {
    base.push_back("gamma_l" + std::to_string(p.l + 1) + "_h" + std::to_string(p.h + 1) + "_r" +
                   std::to_string(p.r + 1) + (p.last ? "_last" : "_first"));
  }
  base.push_back("occupancy_1");
  std::vector<std::string> names;
  for (const auto& b : base) names.push_back(b);
  for (const auto& b : base) names.push_back(b + "^2");
  return names;
}

std::vector<double> geweke_statistics(const RegimeParams& params, const ShrinkageState& shrink,
                                      const std::vector<int>& s) {
  const Index L = params.regimes();
  std::vector<double> v{shrink.tau};
  for (Index l = 0; l < L; ++l) v.push_back(params.rho[l]);
  for (Index l = 0; l < L; ++l) v.push_back(shrink.lambda[l]);
  for (const auto& p : gamma_probes(L)) {
    const auto& m = params.marginals[static_cast<std::size_t>(p.l)];
    const Index r = std::min(p.r, m.rank() - 1);
    const Index i = p.last ? m.dim(p.h) - 1 : 0;
    v.push_back(m.factor(p.h)(i, r));
  }
  const double occ = static_cast<double>(std::count(s.begin(), s.end(), 0)) / static_cast<double>(s.size());
  v.push_back(occ);
  const std::size_t n = v.size();
  for (std::size_t k = 0; k < n; ++k) v.push_back(v[k] * v[k]);
  return v;
}

GewekeReport geweke_pair(const PanelDims& dims, const PriorConfig& cfg, const GewekeConfig& gc) {
  dims.validate();
  cfg.validate();
  const RngStream base(gc.seed);
  RngStream zr = base.derive({1});
  const Eigen::MatrixXd z = simulate_covariates(dims.T, dims.Q, zr);
  const auto names = geweke_statistic_names(cfg.regimes);
  const std::size_t n_stats = names.size();
  std::vector<std::vector<double>> mc(n_stats), sc(n_stats);

  const long n_marginal = gc.marginal_draws > 0 ? gc.marginal_draws : gc.sweeps;
  RngStream mr = base.derive({2});
  for (long m = 0; m < n_marginal; ++m) {
    PriorDraw theta = draw_from_prior(dims, cfg, mr);
    const auto s = simulate_path(theta.params.xi, dims.T, InitialLaw::Uniform, mr);
    const auto v = geweke_statistics(theta.params, theta.shrink, s);
    for (std::size_t k = 0; k < n_stats; ++k) mc[k].push_back(v[k]);
  }

  RngStream sr = base.derive({3});
  NetworkPanel panel(dims.I, dims.J, dims.K, dims.T, dims.Q);
  panel.z = z;
  ChainState state;
  {
    PriorDraw theta = draw_from_prior(dims, cfg, sr);
    state.params = std::move(theta.params);
    state.shrink = std::move(theta.shrink);
    state.aug = AugmentedState::zeros(panel);
    state.aug.s = simulate_path(state.params.xi, dims.T, InitialLaw::Uniform, sr);
    state.aug.d = simulate_edges(panel, state.params, state.aug.s, sr);
    state.refresh_predictors(panel);
    state.hmc_step = Eigen::VectorXd::Constant(cfg.regimes, gc.hmc_step);
  }
  SweepOptions opt;
  opt.hmc_nleap = gc.hmc_nleap;
  opt.threads = gc.threads;
  opt.mutation = gc.mutation;
  const RngStream sweeps = base.derive({4});
  for (long it = 0; it < gc.warmup + gc.sweeps; ++it) {
    gibbs_sweep(panel, cfg, state, opt, sweeps.derive({static_cast<std::uint64_t>(it)}));
    if (it >= gc.warmup) {
      const auto v = geweke_statistics(state.params, state.shrink, state.aug.s);
      for (std::size_t k = 0; k < n_stats; ++k) sc[k].push_back(v[k]);
    }
    RngStream dr = sweeps.derive({static_cast<std::uint64_t>(it), 1});
    state.aug.s = simulate_path(state.params.xi, dims.T, InitialLaw::Uniform, dr);
    state.aug.d = simulate_edges(panel, state.params, state.aug.s, dr);
  }

  return compare_geweke(names, mc, sc);
}

GewekeReport compare_geweke(const std::vector<std::string>& names, const std::vector<std::vector<double>>& mc,
                            const std::vector<std::vector<double>>& sc) {
  GewekeReport report;
  for (std::size_t k = 0; k < names.size(); ++k) {
    GewekeStat st;
    st.name = names[k];
    st.marginal_mean = sample_mean(mc[k]);
    st.marginal_se = std::sqrt(sample_variance(mc[k]) / static_cast<double>(mc[k].size()));
    st.successive_mean = sample_mean(sc[k]);
    st.successive_se = batch_means_se(sc[k]);
    const double se = std::hypot(st.marginal_se, st.successive_se);
    st.z = se > 0.0 ? (st.marginal_mean - st.successive_mean) / se : 0.0;
    report.stats.push_back(std::move(st));
  }
  return report;
}

}  // namespace mstr
