#include "mstr/distributions.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace mstr {

namespace {

constexpr double kPi = std::numbers::pi;

// Truncation point of the J*(1, z) mixture proposal.
constexpr double kPgTrunc = 0.64;
constexpr double kPgTruncRecip = 1.0 / kPgTrunc;

double log_ndtr(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log(series);
}

// n-th coefficient of the alternating series for the J*(1, 0) density.
double pg_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kPgTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x > 0.0) {
    return std::exp(-1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) -
                    2.0 * (n + 0.5) * (n + 0.5) / x);
  }
  return 0.0;
}

// P(X < t) / P(X > t) mass split between the exponential tail and the
// truncated inverse-Gaussian part of the proposal.
double pg_mass_texpon(double z) {
  const double t = kPgTrunc;
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + log_ndtr(b);
  const double xa = x0 + z + log_ndtr(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(1/z, 1) truncated to (0, t).
double pg_truncated_inverse_gaussian(double z, RngStream& rng) {
  const double t = kPgTrunc;
  double x = t + 1.0;
  if (kPgTruncRecip > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = sample_exponential(rng);
      double e2 = sample_exponential(rng);
      while (e1 * e1 > 2.0 * e2 / t) {
        e1 = sample_exponential(rng);
        e2 = sample_exponential(rng);
      }
      x = 1.0 + e1 * t;
      x = t / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > t) {
      double y = sample_normal(rng);
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

// ---- GIG, two-parameter form x^(lambda-1) exp(-omega (x + 1/x) / 2), lambda >= 0.

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms with the mode as shift (Dagpunar 1989, Lehner 1989).
double gig_rou_shift(double lambda, double omega, RngStream& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Roots in (0, xm) and (xm, inf) of the cubic bounding the shifted region.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * kPi) - a / 3.0;

  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Ratio-of-uniforms without shift.
double gig_rou_noshift(double lambda, double omega, RngStream& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Rejection from a three-piece hat, for 0 <= lambda < 1 and small omega
// where the density is far from log-concave (Hormann & Leydold 2014).
double gig_small_omega(double lambda, double omega, RngStream& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);

  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;
  double k1 = 0.0;
  double k2 = 0.0;
  if (x0 >= 2.0 / omega) {
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = (lambda == 0.0) ? k1 * std::log(2.0 / (omega * omega))
                              : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rng.uniform();
    double x = 0.0;
    double hx = 0.0;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double a = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * a) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

double sample_normal(RngStream& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double sample_exponential(RngStream& rng) { return -std::log(rng.uniform()); }

double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw ArgumentError("sample_gamma: shape and rate must be positive and finite");
  }
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw ArgumentError("sample_beta: parameters must be positive");
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  return x / (x + y);
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, RngStream& rng) {
  if (alpha.size() == 0) throw ArgumentError("sample_dirichlet: empty concentration");
  Eigen::VectorXd x(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (!(alpha[k] > 0.0)) throw ArgumentError("sample_dirichlet: concentration must be positive");
    x[k] = sample_gamma(alpha[k], 1.0, rng);
  }
  return x / x.sum();
}

bool sample_bernoulli(double p, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("sample_bernoulli: p outside [0, 1]");
  return rng.uniform() < p;
}

Eigen::Index sample_categorical(const Eigen::VectorXd& weights, RngStream& rng) {
  const double total = weights.sum();
  if (weights.size() == 0 || !(total > 0.0) || !std::isfinite(total) || (weights.array() < 0.0).any()) {
    throw ArgumentError("sample_categorical: weights must be non-negative with positive sum");
  }
  double u = rng.uniform() * total;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  // Rounding left u marginally above the last cumulative weight.
  for (Eigen::Index k = weights.size() - 1; k >= 0; --k) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

Eigen::Index sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng) {
  const double top = log_weights.maxCoeff();
  if (!std::isfinite(top)) throw ArgumentError("sample_categorical_log: no finite weight");
  return sample_categorical((log_weights.array() - top).exp().matrix(), rng);
}

double sample_pg1(double c, RngStream& rng) {
  if (!std::isfinite(c)) throw ArgumentError("sample_pg1: non-finite tilting parameter");
  const double z = 0.5 * std::fabs(c);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  for (;;) {
    double x;
    if (rng.uniform() < pg_mass_texpon(z)) {
      x = kPgTrunc + sample_exponential(rng) / fz;
    } else {
      x = pg_truncated_inverse_gaussian(z, rng);
    }
    double s = pg_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= pg_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += pg_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double pg1_mean(double c) {
  if (std::fabs(c) < 1e-8) return 0.25 - c * c / 48.0;
  return std::tanh(0.5 * c) / (2.0 * c);
}

double pg1_log_density(double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  // PG(1, 0) = J*(1, 0) / 4.
  const double y = 4.0 * x;
  const double lead = pg_coef(0, y);
  if (lead == 0.0) return -std::numeric_limits<double>::infinity();
  double tail = 0.0;
  for (int n = 1; n < 200; ++n) {
    const double term = pg_coef(n, y) / lead;
    tail += (n % 2 == 1) ? -term : term;
    if (term < 1e-17) break;
  }
  return std::log(4.0) + std::log(lead) + std::log1p(tail);
}

void validate(const GigParams& g) {
  const bool finite = std::isfinite(g.a) && std::isfinite(g.b) && std::isfinite(g.p);
  if (!finite || g.a < 0.0 || g.b < 0.0 || (g.a == 0.0 && g.b == 0.0) || (g.b == 0.0 && !(g.p > 0.0)) ||
      (g.a == 0.0 && !(g.p < 0.0))) {
    throw ArgumentError("GIG: improper parameters a=" + std::to_string(g.a) + " b=" + std::to_string(g.b) +
                        " p=" + std::to_string(g.p));
  }
}

double gig_log_kernel(double x, const GigParams& g) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (g.p - 1.0) * std::log(x) - 0.5 * (g.a * x + g.b / x);
}

double sample_gig(const GigParams& g, RngStream& rng) {
  validate(g);
  if (g.b == 0.0) return sample_gamma(g.p, 0.5 * g.a, rng);
  if (g.a == 0.0) return 1.0 / sample_gamma(-g.p, 0.5 * g.b, rng);

  const double lambda = std::fabs(g.p);
  const double alpha = std::sqrt(g.b / g.a);
  const double omega = std::sqrt(g.a * g.b);

  double x;
  if (lambda > 2.0 || omega > 3.0) {
    x = gig_rou_shift(lambda, omega, rng);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = gig_rou_noshift(lambda, omega, rng);
  } else {
    x = gig_small_omega(lambda, omega, rng);
  }
  // GIG(-p, b, a) is the law of 1 / GIG(p, a, b).
  return (g.p < 0.0) ? alpha / x : alpha * x;
}

Eigen::VectorXd sample_gaussian_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear,
                                          RngStream& rng) {
  const Eigen::Index n = precision.rows();
  if (precision.cols() != n || linear.size() != n) {
    throw ArgumentError("sample_gaussian_canonical: dimension mismatch");
  }
  const double scale = std::max(precision.diagonal().cwiseAbs().mean(), 1e-300);
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  double jitter = 1e-10;
  while (llt.info() != Eigen::Success) {
    if (jitter > 1e-6 * (1.0 + 1e-9)) {
      throw NumericalError("sample_gaussian_canonical: precision not positive definite after jitter 1e-6");
    }
    Eigen::MatrixXd jittered = precision;
    jittered.diagonal().array() += jitter * scale;
    llt.compute(jittered);
    jitter *= 10.0;
  }
  Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = sample_normal(rng);
  return mean + llt.matrixU().solve(eps);
}

double gaussian_canonical_log_kernel(const Eigen::VectorXd& x, const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& linear) {
  return -0.5 * x.dot(precision * x) + linear.dot(x);
}

HmcResult hmc_update(const std::function<double(double)>& log_density,
                     const std::function<double(double)>& gradient, double current, double step, int nleap,
                     RngStream& rng) {
  if (nleap < 1) throw ArgumentError("hmc_update: need at least one leapfrog step");
  const double momentum0 = sample_normal(rng);
  const double log_u = std::log(rng.uniform());
  const double h0 = -log_density(current) + 0.5 * momentum0 * momentum0;
  if (!std::isfinite(h0)) throw ArgumentError("hmc_update: log density not finite at current value");

  HmcResult rejected{current, false, true, 0.0};
  double x = current;
  double g = gradient(x);
  if (!std::isfinite(g)) return rejected;
  double momentum = momentum0 + 0.5 * step * g;
  for (int i = 0; i < nleap; ++i) {
    x += step * momentum;
    g = gradient(x);
    if (!std::isfinite(g)) return rejected;
    if (i + 1 < nleap) momentum += step * g;
  }
  momentum += 0.5 * step * g;
  const double h1 = -log_density(x) + 0.5 * momentum * momentum;
  if (!std::isfinite(h1)) return rejected;
  const double delta = h1 - h0;
  if (log_u < -delta) return {x, true, false, delta};
  return {current, false, false, delta};
}

}  // namespace mstr
