#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "btpnn/basis.hpp"
#include "btpnn/core.hpp"
#include "btpnn/data.hpp"
#include "btpnn/likelihood.hpp"

namespace btpnn {

/// Hyperparameters of the prior hierarchy and the proposal mechanics.
/// Gamma bandwidth prior is shape/scale: density ∝ g^(a-1) exp(-g / b).
struct PriorConfig {
  double C0 = 0.005;
  std::size_t K_max = 200;
  double alpha_adding = 0.95;
  double gamma_adding = 2.0;
  double sigma_beta2 = 1e-2;
  double a_gamma = 2.0;
  double b_gamma = 5e-3;
  double v = 3.0;
  std::optional<double> lambda;
  std::optional<double> q_lambda = 0.9;
  double q_add = 0.28;
  double q_delete = 0.28;
  double q_change = 0.44;
  double M = 5.0;
  double step_size = 0.01;
  std::vector<double> omega;  // empty means uniform over the p inputs

  void validate(std::size_t p) const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ValidationError("invalid prior config: " + what);
    };
    need(C0 >= 0.0 && std::isfinite(C0), "C0 must be >= 0");
    need(K_max >= 1, "K_max must be >= 1");
    need(alpha_adding > 0.0 && alpha_adding < 1.0, "alpha_adding must lie in (0,1)");
    need(gamma_adding > 0.0, "gamma_adding must be > 0");
    need(sigma_beta2 > 0.0, "sigma_beta2 must be > 0");
    need(a_gamma > 0.0, "a_gamma must be > 0");
    need(b_gamma > 0.0, "b_gamma must be > 0");
    need(v > 0.0, "v must be > 0");
    need(lambda.has_value() != q_lambda.has_value(), "exactly one of lambda and q_lambda must be given");
    if (lambda) need(*lambda > 0.0, "lambda must be > 0");
    if (q_lambda) need(*q_lambda > 0.0 && *q_lambda < 1.0, "q_lambda must lie in (0,1)");
    need(q_add >= 0.0 && q_delete >= 0.0 && q_change >= 0.0, "move probabilities must be >= 0");
    need(std::abs(q_add + q_delete + q_change - 1.0) < 1e-9, "q_add + q_delete + q_change must equal 1");
    need(M > 0.0, "M must be > 0");
    need(step_size > 0.0, "step_size must be > 0");
    if (!omega.empty()) {
      need(omega.size() == p, "omega must have one weight per input column");
      for (double w : omega) need(w > 0.0 && std::isfinite(w), "omega weights must be positive");
    }
  }

  /// Input-importance weights normalized to a probability vector.
  std::vector<double> input_weights(std::size_t p) const {
    std::vector<double> w = omega.empty() ? std::vector<double>(p, 1.0) : omega;
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return w;
  }
};

inline double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// log pi(K = k), pi(k) ∝ exp(-C0 k log n) on {0..K_max}.
inline double log_prior_K(std::size_t k, const PriorConfig& cfg, std::size_t n) {
  if (k > cfg.K_max) throw ValidationError("K outside [0, K_max]");
  const double rate = cfg.C0 * std::log(static_cast<double>(n));
  std::vector<double> terms(cfg.K_max + 1);
  for (std::size_t j = 0; j <= cfg.K_max; ++j) terms[j] = -rate * static_cast<double>(j);
  return -rate * static_cast<double>(k) - log_sum_exp(terms);
}

/// Probability of adding another variable once a set holds `l` variables.
inline double p_adding(const PriorConfig& cfg, std::size_t l) {
  return cfg.alpha_adding * std::pow(1.0 + static_cast<double>(l), -cfg.gamma_adding);
}

/// Mixture weights over set sizes d = 1..p; entry d-1 holds w_d.
inline std::vector<double> subset_weights(const PriorConfig& cfg, std::size_t p) {
  std::vector<double> w(p);
  double carry = 1.0;
  double total = 0.0;
  for (std::size_t d = 1; d <= p; ++d) {
    w[d - 1] = (1.0 - p_adding(cfg, d)) * carry;
    carry *= p_adding(cfg, d);
    total += w[d - 1];
  }
  for (double& x : w) x /= total;
  return w;
}

inline double log_prior_subset(std::span<const std::size_t> vars, const PriorConfig& cfg, std::size_t p) {
  const std::size_t d = vars.size();
  if (d == 0) throw ValidationError("empty variable set has no prior mass");
  if (d > p) throw ValidationError("variable set larger than p");
  return std::log(subset_weights(cfg, p)[d - 1]) - log_binomial(p, d);
}

/// Draws a size from the mixture weights, then a uniform subset of that size.
inline std::vector<std::size_t> sample_subset(const PriorConfig& cfg, std::size_t p, Rng& rng) {
  const auto w = subset_weights(cfg, p);
  const std::size_t d = rng.categorical(w) + 1;
  std::vector<std::size_t> all(p);
  for (std::size_t j = 0; j < p; ++j) all[j] = j;
  // Partial Fisher-Yates.
  for (std::size_t a = 0; a < d; ++a) {
    const std::size_t pick = a + rng.index(p - a);
    std::swap(all[a], all[pick]);
  }
  std::vector<std::size_t> s(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(d));
  std::sort(s.begin(), s.end());
  return s;
}

inline double log_normal_density(double x, double var) { return -0.5 * x * x / var - 0.5 * std::log(2.0 * kPi * var); }

/// Gamma(shape, scale) log-density for x > 0.
inline double log_gamma_density(double x, double shape, double scale) {
  if (!(x > 0.0)) return -INFINITY;
  return (shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) - std::lgamma(shape);
}

inline double log_prior_knot(double b) { return (b >= 0.0 && b <= 1.0) ? 0.0 : -INFINITY; }

/// beta ~ N(0, sigma_beta2), knots ~ U(0,1), bandwidths ~ Gamma(a, scale b).
inline double log_prior_numeric(const BasisTerm& term, const PriorConfig& cfg) {
  double lp = log_normal_density(term.beta, cfg.sigma_beta2);
  for (std::size_t a = 0; a < term.vars.size(); ++a) {
    lp += log_prior_knot(term.knots[a]);
    lp += log_gamma_density(term.bandwidths[a], cfg.a_gamma, cfg.b_gamma);
  }
  return lp;
}

/// Inverse-gamma log-density, shape alpha and scale s: s^a/G(a) x^(-a-1) e^(-s/x).
inline double log_inverse_gamma_density(double x, double shape, double scale) {
  if (!(x > 0.0)) return -INFINITY;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double log_prior_eta(double sigma2, const PriorConfig& cfg) {
  if (!(sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
  if (!cfg.lambda) throw ValidationError("lambda unresolved; call resolve_lambda first");
  return log_inverse_gamma_density(sigma2, cfg.v / 2.0, cfg.v * *cfg.lambda / 2.0);
}

/// Residual variance of an ordinary least-squares fit of y on [1, x].
inline double ols_residual_variance(const Dataset& ds) {
  Eigen::MatrixXd design(ds.n, ds.p + 1);
  design.col(0).setOnes();
  for (std::size_t j = 0; j < ds.p; ++j) {
    design.col(static_cast<Eigen::Index>(j + 1)) = Eigen::Map<const Eigen::VectorXd>(ds.col(j).data(), ds.n);
  }
  const Eigen::Map<const Eigen::VectorXd> y(ds.y.data(), ds.n);
  const auto qr = design.colPivHouseholderQr();
  const Eigen::VectorXd coef = qr.solve(y);
  const double rss = (y - design * coef).squaredNorm();
  const auto dof = static_cast<double>(ds.n) - static_cast<double>(qr.rank());
  if (dof >= 1.0) return rss / dof;
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(ds.n - 1);
}

/// Returns cfg with lambda set. When q_lambda is given, lambda solves
/// P(sigma2 <= s_ols) = q_lambda under IG(v/2, v*lambda/2).
inline PriorConfig resolve_lambda(PriorConfig cfg, const Dataset& ds) {
  if (cfg.lambda) return cfg;
  if (!cfg.q_lambda) throw ValidationError("one of lambda and q_lambda must be given");
  const double s = std::max(ols_residual_variance(ds), 1e-12);
  // P(sigma2 <= s) = Q(v/2, v*lambda/(2s)) for the inverse gamma.
  const double t = boost::math::gamma_q_inv(cfg.v / 2.0, *cfg.q_lambda);
  cfg.lambda = 2.0 * s * t / cfg.v;
  cfg.q_lambda.reset();
  return cfg;
}

/// Joint log prior of a state; the eta term applies to gaussian models only.
inline double log_prior_state(const ModelState& state, const PriorConfig& cfg, std::size_t n, std::size_t p,
                              Family family) {
  double lp = log_prior_K(state.terms.size(), cfg, n);
  for (const auto& t : state.terms) lp += log_prior_subset(t.vars, cfg, p) + log_prior_numeric(t, cfg);
  if (family == Family::gaussian) lp += log_prior_eta(state.eta, cfg);
  return lp;
}

/// Fresh knot and bandwidth from their priors.
inline void draw_coordinate(const PriorConfig& cfg, Rng& rng, double& knot, double& bandwidth) {
  knot = rng.uniform();
  bandwidth = rng.gamma(cfg.a_gamma, cfg.b_gamma);
}

}  // namespace btpnn
