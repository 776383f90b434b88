#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mstr/diagnostics.hpp"
#include "mstr/pooled.hpp"
#include "support/fixtures.hpp"

using namespace mstr;

namespace {

struct Setup {
  NetworkPanel panel;
  PriorConfig cfg;
  PooledParams params;
  AugmentedState aug;
};

Setup make_setup(Index Q = 2, std::uint64_t seed = 51) {
  Setup s;
  s.panel = fixture::random_panel(3, 3, 2, 8, Q, seed);
  s.cfg = PriorConfig::defaults(2, 1);
  s.cfg.alpha = 1.4;
  s.cfg.b_tau = 0.7;
  RngStream rng(seed + 1);
  s.params.g.resize(Q, 2);
  for (Index l = 0; l < 2; ++l) {
    for (Index q = 0; q < Q; ++q) s.params.g(q, l) = 0.8 * sample_normal(rng);
  }
  s.params.w = Eigen::Vector2d(0.4 + rng.uniform(), 0.4 + rng.uniform());
  s.params.tau = 0.5 + rng.uniform();
  s.params.lambda = Eigen::Vector2d(0.5 + rng.uniform(), 0.5 + rng.uniform());
  s.params.rho = Eigen::Vector2d(0.7, 0.3);
  s.params.xi.resize(2, 2);
  s.params.xi << 0.8, 0.2, 0.35, 0.65;
  s.aug = fixture::random_augmentation(s.panel, 2, rng);
  return s;
}

double joint(const Setup& s) {
  return pooled_complete_data_loglik(s.panel, s.aug, s.params) + pooled_log_prior(s.params, s.cfg);
}

}  // namespace

TEST_CASE("pooled predictor is constant across edges") {
  const auto st = make_setup();
  const auto eta = pooled_predictors(st.params, st.panel);
  for (Index l = 0; l < 2; ++l) {
    for (Index t = 0; t < st.panel.T; ++t) {
      const double expected = st.panel.z.row(t).dot(st.params.g.col(l));
      CHECK((eta[l].col(t).array() - expected).abs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("expanded coefficient tensor reproduces the pooled predictor") {
  const auto st = make_setup(3);
  const auto eta = pooled_predictors(st.params, st.panel);
  for (Index l = 0; l < 2; ++l) {
    const Tensor G = expand_pooled(st.params.g.col(l), 3, 3, 2);
    CHECK(G.dim(3) == 3);
    for (Index t = 0; t < st.panel.T; ++t) {
      for (Index k = 0; k < 2; ++k) {
        for (Index j = 0; j < 3; ++j) {
          for (Index i = 0; i < 3; ++i) {
            double acc = 0.0;
            for (Index q = 0; q < 3; ++q) acc += G.at(i, j, k, q) * st.panel.z(t, q);
            CHECK(std::abs(acc - eta[l](st.panel.edge_index(i, j, k), t)) <= 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("pooled coefficient conditional against the joint density") {
  for (Index Q : {1, 2, 4}) {
    auto st = make_setup(Q, 60 + static_cast<std::uint64_t>(Q));
    st.cfg.gamma_prior_mean = 0.1;
    RngStream rng(61);
    const auto weights = augmented_weights(st.panel, st.aug);
    for (Index l = 0; l < 2; ++l) {
      const auto times = regime_times(st.aug.s, l);
      const auto cond = pooled_g_conditional(st.panel, weights, times, st.params.tau * st.params.w[l], 0.1);
      Eigen::VectorXd a(Q), b(Q);
      for (Index q = 0; q < Q; ++q) {
        a[q] = sample_normal(rng);
        b[q] = sample_normal(rng);
      }
      auto s1 = st, s2 = st;
      s1.params.g.col(l) = a;
      s2.params.g.col(l) = b;
      CHECK(std::abs(cond.log_density_difference(a, b) - (joint(s1) - joint(s2))) <= 1e-8);
    }
  }
}

TEST_CASE("single covariate gives a scalar precision") {
  auto st = make_setup(1, 62);
  const auto weights = augmented_weights(st.panel, st.aug);
  const auto times = regime_times(st.aug.s, 0);
  const double v = st.params.tau * st.params.w[0];
  const auto cond = pooled_g_conditional(st.panel, weights, times, v, 0.0);
  double prec = 1.0 / v, lin = 0.0;
  for (Index t : times) {
    const double z = st.panel.z(t, 0);
    for (Index e = 0; e < st.panel.edges(); ++e) {
      const std::size_t n = static_cast<std::size_t>(e + st.panel.edges() * t);
      if (st.aug.d[n]) continue;
      prec += st.aug.omega(e, t) * z * z;
      lin += (st.panel.x[n] - 0.5) * z;
    }
  }
  CHECK(std::abs(cond.precision(0, 0) - prec) <= 1e-12 * prec);
  CHECK(std::abs(cond.linear[0] - lin) <= 1e-12 * std::max(1.0, std::abs(lin)));
}

TEST_CASE("pooled variance conditionals against the joint density") {
  auto st = make_setup(3, 63);
  SUBCASE("tau") {
    const GigParams g = pooled_tau_conditional(st.params, st.cfg);
    CHECK(std::abs(g.p - (st.cfg.a_tau() - 3.0 * 2 / 2)) < 1e-15);
    for (auto [a, b] : {std::pair{0.4, 2.1}, std::pair{1.7, 0.8}}) {
      auto s1 = st, s2 = st;
      s1.params.tau = a;
      s2.params.tau = b;
      CHECK(std::abs((gig_log_kernel(a, g) - gig_log_kernel(b, g)) - (joint(s1) - joint(s2))) <= 1e-8);
    }
  }
  SUBCASE("w") {
    for (Index l = 0; l < 2; ++l) {
      const GigParams g = pooled_w_conditional(st.params, st.cfg, l);
      for (auto [a, b] : {std::pair{0.3, 1.9}, std::pair{2.4, 0.5}}) {
        auto s1 = st, s2 = st;
        s1.params.w[l] = a;
        s2.params.w[l] = b;
        CHECK(std::abs((gig_log_kernel(a, g) - gig_log_kernel(b, g)) - (joint(s1) - joint(s2))) <= 1e-8);
      }
    }
  }
  SUBCASE("lambda on the log scale") {
    for (Index l = 0; l < 2; ++l) {
      const LambdaTarget target = pooled_lambda_target(st.params, st.cfg, l);
      for (auto [a, b] : {std::pair{0.6, 1.8}, std::pair{1.2, 0.3}}) {
        auto s1 = st, s2 = st;
        s1.params.lambda[l] = a;
        s2.params.lambda[l] = b;
        const double lhs = target.log_density(std::log(a)) - target.log_density(std::log(b));
        CHECK(std::abs(lhs - (joint(s1) - joint(s2) + std::log(a / b))) <= 1e-8);
      }
    }
  }
  SUBCASE("zero coefficients give the Gamma law for tau") {
    st.params.g.setZero();
    st.cfg.alpha = 10.0;
    const GigParams g = pooled_tau_conditional(st.params, st.cfg);
    CHECK(g.b == 0.0);
    RngStream rng(64);
    std::vector<double> x;
    for (int k = 0; k < 100000; ++k) x.push_back(sample_gig(g, rng));
    CHECK(std::abs(sample_mean(x) / (g.p / st.cfg.b_tau) - 1.0) < 0.01);
  }
}

TEST_CASE("pooled relabeling") {
  auto st = make_setup(2, 65);
  st.params.rho = Eigen::Vector2d(0.2, 0.6);
  auto p = st.params;
  auto s = st.aug.s;
  CHECK(relabel(p, s));
  CHECK(p.g.col(0) == st.params.g.col(1));
  CHECK(p.w[0] == st.params.w[1]);
  CHECK(p.xi(0, 1) == st.params.xi(1, 0));
  AugmentedState aug = st.aug;
  aug.s = s;
  CHECK(std::abs(pooled_complete_data_loglik(st.panel, aug, p, true) -
                 pooled_complete_data_loglik(st.panel, st.aug, st.params, true)) <= 1e-10);
  CHECK_FALSE(relabel(p, s));
}

TEST_CASE("pooled chain is reproducible and thread-invariant") {
  const auto panel = fixture::random_panel(5, 4, 1, 12, 2, 66);
  const auto cfg = PriorConfig::defaults(2, 1);
  ChainConfig cc;
  cc.iterations = 100;
  cc.burn_in = 50;
  cc.thin = 5;
  cc.seed = 3;
  const auto a = run_pooled_chain(panel, cfg, cc);
  cc.threads = 4;
  const auto b = run_pooled_chain(panel, cfg, cc);
  REQUIRE(a.draws.size() == 10);
  REQUIRE(b.draws.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(a.draws[k].params.g == b.draws[k].params.g);
    CHECK(a.draws[k].params.lambda == b.draws[k].params.lambda);
    CHECK(a.draws[k].s == b.draws[k].s);
    CHECK(a.draws[k].loglik == b.draws[k].loglik);
    CHECK(a.draws[k].params.rho[0] >= a.draws[k].params.rho[1]);
  }
}

TEST_CASE("pooled sampler recovers a pooled truth") {
  const PanelDims dims{12, 12, 1, 80, 2};
  PooledParams truth;
  truth.g.resize(2, 2);
  truth.g << -0.5, 1.0, 1.0, -1.0;
  truth.rho = Eigen::Vector2d(0.6, 0.1);
  truth.xi.resize(2, 2);
  truth.xi << 0.9, 0.1, 0.1, 0.9;
  truth.w = Eigen::Vector2d::Ones();
  truth.lambda = Eigen::Vector2d::Ones();
  const auto sim = simulate_pooled_panel(dims, truth, 70);
  ChainConfig cc;
  cc.iterations = 1500;
  cc.burn_in = 500;
  cc.seed = 71;
  const auto res = run_pooled_chain(sim.panel, PriorConfig::defaults(2, 1), cc);
  for (Index l = 0; l < 2; ++l) {
    std::vector<double> rho;
    for (const auto& d : res.draws) rho.push_back(d.params.rho[l]);
    CHECK(quantile(rho, 0.005) <= truth.rho[l]);
    CHECK(quantile(rho, 0.995) >= truth.rho[l]);
    for (Index q = 0; q < 2; ++q) {
      std::vector<double> g;
      for (const auto& d : res.draws) g.push_back(d.params.g(q, l));
      CHECK(quantile(g, 0.005) <= truth.g(q, l));
      CHECK(quantile(g, 0.995) >= truth.g(q, l));
    }
  }
  // Modal path accuracy.
  std::vector<double> hits(static_cast<std::size_t>(dims.T), 0.0);
  for (const auto& d : res.draws) {
    for (Index t = 0; t < dims.T; ++t) hits[static_cast<std::size_t>(t)] += d.s[static_cast<std::size_t>(t)] == 0;
  }
  int correct = 0;
  for (Index t = 0; t < dims.T; ++t) {
    const int modal = hits[static_cast<std::size_t>(t)] * 2 >= static_cast<double>(res.draws.size()) ? 0 : 1;
    correct += modal == sim.truth.s[static_cast<std::size_t>(t)];
  }
  CHECK(correct >= 76);
}

TEST_CASE("pooled Geweke check") {
  const PanelDims dims{3, 3, 1, 10, 2};
  const auto cfg = PriorConfig::defaults(2, 1);
  GewekeConfig gc;
  gc.sweeps = 100000;
  gc.seed = 7;
  const auto ok = pooled_geweke_pair(dims, cfg, gc);
  CHECK(ok.stats.size() == pooled_geweke_statistic_names(2).size());
  CHECK(ok.max_abs_z() < 4.0);
  gc.mutation = Mutation::TauOrderPlusOne;
  gc.sweeps = 20000;
  const auto bad = pooled_geweke_pair(dims, cfg, gc);
  CHECK(std::abs(bad.find("tau").z) >= 5.0);
}

namespace {

PooledParams pooled_truth() {
  PooledParams truth;
  truth.g.resize(2, 2);
  truth.g << -0.5, 1.0, 1.0, -1.0;
  truth.rho = Eigen::Vector2d(0.6, 0.1);
  truth.xi.resize(2, 2);
  truth.xi << 0.9, 0.1, 0.1, 0.9;
  truth.w = Eigen::Vector2d::Ones();
  truth.lambda = Eigen::Vector2d::Ones();
  return truth;
}

// Mean over draws of P(x = 1) at every (edge, t), given per-draw predictors.
template <typename DrawT, typename EtaFn>
Eigen::MatrixXd predictive_probability(const NetworkPanel& panel, const std::vector<DrawT>& draws, EtaFn eta_of) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(panel.edges(), panel.T);
  for (const auto& d : draws) {
    const auto eta = eta_of(d);
    for (Index t = 0; t < panel.T; ++t) {
      const int l = d.s[static_cast<std::size_t>(t)];
      for (Index e = 0; e < panel.edges(); ++e) p(e, t) += edge_prob(1, d.params.rho[l], eta[l](e, t));
    }
  }
  return p / static_cast<double>(draws.size());
}

}  // namespace

TEST_CASE("pooled credible intervals cover the truth across replications") {
  const PanelDims dims{10, 10, 1, 60, 2};
  const auto truth = pooled_truth();
  int covered = 0, total = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto sim = simulate_pooled_panel(dims, truth, 200 + static_cast<std::uint64_t>(rep));
    ChainConfig cc;
    cc.iterations = 1500;
    cc.burn_in = 500;
    cc.seed = 300 + static_cast<std::uint64_t>(rep);
    const auto res = run_pooled_chain(sim.panel, PriorConfig::defaults(2, 1), cc);
    for (Index l = 0; l < 2; ++l) {
      for (Index q = 0; q < 2; ++q) {
        std::vector<double> g;
        for (const auto& d : res.draws) g.push_back(d.params.g(q, l));
        covered += quantile(g, 0.05) <= truth.g(q, l) && truth.g(q, l) <= quantile(g, 0.95);
        ++total;
      }
    }
  }
  CHECK(covered >= 0.8 * total);
}

TEST_CASE("pooled model predicts pooled data better than the unrestricted model") {
  const PanelDims dims{8, 8, 1, 60, 2};
  const auto truth = pooled_truth();
  const auto sim = simulate_pooled_panel(dims, truth, 400);
  const auto true_eta = pooled_predictors(truth, sim.panel);
  Eigen::MatrixXd p_true(sim.panel.edges(), dims.T);
  for (Index t = 0; t < dims.T; ++t) {
    const int l = sim.truth.s[static_cast<std::size_t>(t)];
    for (Index e = 0; e < sim.panel.edges(); ++e) p_true(e, t) = edge_prob(1, truth.rho[l], true_eta[l](e, t));
  }
  ChainConfig cc;
  cc.iterations = 1500;
  cc.burn_in = 500;
  cc.thin = 2;
  cc.seed = 401;
  const auto pooled = run_pooled_chain(sim.panel, PriorConfig::defaults(2, 1), cc);
  const auto full = run_chain(sim.panel, PriorConfig::defaults(2, 2), cc);
  const Eigen::MatrixXd pp = predictive_probability(sim.panel, pooled.draws,
                                                    [&](const PooledDraw& d) { return pooled_predictors(d.params, sim.panel); });
  const Eigen::MatrixXd pf = predictive_probability(sim.panel, full.draws,
                                                    [&](const Draw& d) { return linear_predictors(d.params, sim.panel); });
  const double n = static_cast<double>(p_true.size());
  const double rmse_pooled = std::sqrt((pp - p_true).squaredNorm() / n);
  const double rmse_full = std::sqrt((pf - p_true).squaredNorm() / n);
  MESSAGE("predictive RMSE pooled " << rmse_pooled << ", unrestricted " << rmse_full);
  CHECK(rmse_pooled < rmse_full);
}
