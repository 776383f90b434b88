#pragma once

// Small random panels and model states for the unit tests.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "mstr/distributions.hpp"
#include "mstr/gibbs.hpp"
#include "mstr/model.hpp"
#include "mstr/pooled.hpp"

namespace fixture {

using mstr::Index;

inline mstr::NetworkPanel random_panel(Index I, Index J, Index K, Index T, Index Q, std::uint64_t seed,
                                       double density = 0.4) {
  mstr::RngStream rng(seed);
  mstr::NetworkPanel p(I, J, K, T, Q);
  for (auto& v : p.x) v = rng.uniform() < density ? 1 : 0;
  for (Index t = 0; t < T; ++t) {
    p.z(t, 0) = 1.0;
    for (Index q = 1; q < Q; ++q) p.z(t, q) = mstr::sample_normal(rng);
  }
  return p;
}

inline mstr::RegimeParams random_params(const mstr::NetworkPanel& p, Index L, Index R, mstr::RngStream& rng) {
  mstr::RegimeParams params;
  for (Index l = 0; l < L; ++l) {
    mstr::Marginals m(mstr::Shape{p.I, p.J, p.K, p.Q}, R);
    for (Index h = 0; h < 4; ++h) {
      for (Index r = 0; r < R; ++r) {
        for (Index i = 0; i < m.dim(h); ++i) m.factor(h)(i, r) = 0.7 * mstr::sample_normal(rng);
      }
    }
    params.marginals.push_back(m);
  }
  params.rho.resize(L);
  for (Index l = 0; l < L; ++l) params.rho[l] = 0.8 - 0.5 * static_cast<double>(l) / static_cast<double>(L);
  params.xi.resize(L, L);
  for (Index l = 0; l < L; ++l) params.xi.row(l) = mstr::sample_dirichlet(Eigen::VectorXd::Constant(L, 2.0), rng);
  return params;
}

inline mstr::ShrinkageState random_shrinkage(Index L, Index R, mstr::RngStream& rng) {
  mstr::ShrinkageState s;
  s.psi.resize(R);
  for (Index r = 0; r < R; ++r) s.psi[r] = 0.5 + rng.uniform();
  s.tau = s.psi.sum();
  s.phi = s.psi / s.tau;
  for (Index l = 0; l < L; ++l) {
    Eigen::MatrixXd w(4, R);
    for (Index h = 0; h < 4; ++h) {
      for (Index r = 0; r < R; ++r) w(h, r) = 0.3 + rng.uniform();
    }
    s.w.push_back(w);
  }
  s.lambda.resize(L);
  for (Index l = 0; l < L; ++l) s.lambda[l] = 0.5 + rng.uniform();
  return s;
}

/// s uniform over regimes, d = 1 on a random subset of the zeros of x, omega in (0.05, 0.55).
inline mstr::AugmentedState random_augmentation(const mstr::NetworkPanel& p, Index L, mstr::RngStream& rng) {
  mstr::AugmentedState aug = mstr::AugmentedState::zeros(p);
  for (Index t = 0; t < p.T; ++t) aug.s[static_cast<std::size_t>(t)] = static_cast<int>(rng() % static_cast<std::uint64_t>(L));
  for (std::size_t n = 0; n < p.x.size(); ++n) aug.d[n] = (p.x[n] == 0 && rng.uniform() < 0.4) ? 1 : 0;
  for (Index t = 0; t < p.T; ++t) {
    for (Index e = 0; e < p.edges(); ++e) aug.omega(e, t) = 0.05 + 0.5 * rng.uniform();
  }
  return aug;
}

}  // namespace fixture
