#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "btpnn/core.hpp"
#include "btpnn/data.hpp"

namespace btpnn {

/// One tensor-product unit: beta * prod_{j in vars} factor_j(x_j).
/// `vars` is sorted; knots and bandwidths are aligned with it.
struct BasisTerm {
  std::vector<std::size_t> vars;
  std::vector<double> knots;
  std::vector<double> bandwidths;
  double beta = 0.0;

  std::size_t order() const { return vars.size(); }

  bool operator==(const BasisTerm&) const = default;
};

inline void validate_term(const BasisTerm& t, std::size_t p) {
  if (t.vars.empty()) throw ValidationError("basis term has an empty variable set");
  if (t.knots.size() != t.vars.size() || t.bandwidths.size() != t.vars.size()) {
    throw ValidationError("basis term knots/bandwidths do not match its variable set");
  }
  for (std::size_t a = 0; a < t.vars.size(); ++a) {
    if (t.vars[a] >= p) throw ValidationError("basis term variable index out of range");
    if (a > 0 && t.vars[a] <= t.vars[a - 1]) throw ValidationError("basis term variables must be sorted and distinct");
    if (!(t.bandwidths[a] > 0.0)) throw ValidationError("basis term bandwidth must be positive");
  }
}

/// Marginal averages of the sigmoid at (b, gamma) and of the two integrands
/// needed by its derivatives. With z(u) = (u - b) / gamma:
///   mean        = E sigma(z)
///   slope_mean  = E sigma'(z)
///   scale_mean  = E[(u - b) / gamma^2 * sigma'(z)]
struct SigmoidMoments {
  double mean = 0.5;
  double slope_mean = 0.0;
  double scale_mean = 0.0;
};

inline constexpr double kMinMean = 1e-12;

inline bool degenerate(const SigmoidMoments& m) { return !(m.mean >= kMinMean && m.mean <= 1.0 - kMinMean); }

inline SigmoidMoments sigmoid_moments(const Marginal& marginal, double b, double gamma) {
  SigmoidMoments out;
  if (marginal.kind == MarginalKind::uniform) {
    const double z1 = (1.0 - b) / gamma;
    const double z0 = -b / gamma;
    out.mean = gamma * (softplus(z1) - softplus(z0));
    out.slope_mean = gamma * (sigmoid(z1) - sigmoid(z0));
    out.scale_mean = (z1 * sigmoid(z1) - softplus(z1)) - (z0 * sigmoid(z0) - softplus(z0));
    return out;
  }
  double m = 0.0, s1 = 0.0, s2 = 0.0;
  const double inv_gamma = 1.0 / gamma;
  for (std::size_t i = 0; i < marginal.values.size(); ++i) {
    const double z = (marginal.values[i] - b) * inv_gamma;
    const double s = sigmoid(z);
    const double w = marginal.weights[i];
    const double ds = s * (1.0 - s);
    m += w * s;
    s1 += w * ds;
    s2 += w * z * ds;
  }
  out.mean = m;
  out.slope_mean = s1;
  out.scale_mean = s2 * inv_gamma;
  return out;
}

/// Marginal mean of sigma((u - b) / gamma); lies in (0,1).
inline double sigmoid_mean(const Marginal& marginal, double b, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("sigmoid_mean requires gamma > 0");
  if (marginal.kind == MarginalKind::uniform) {
    const double z1 = (1.0 - b) / gamma;
    const double z0 = -b / gamma;
    return gamma * (softplus(z1) - softplus(z0));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < marginal.values.size(); ++i) m += marginal.weights[i] * sigmoid((marginal.values[i] - b) / gamma);
  return m;
}

/// The constant c making 1 - sigma + c*sigma mean-zero under the marginal.
inline double c_correction(const Marginal& marginal, double b, double gamma) {
  const double m = sigmoid_mean(marginal, b, gamma);
  if (!(m >= kMinMean)) throw RuntimeError("degenerate bandwidth: sigmoid mean vanishes at b=" + std::to_string(b));
  return -(1.0 - m) / m;
}

inline double eval_factor(double x, double b, double gamma, double c) {
  const double s = sigmoid((x - b) / gamma);
  return 1.0 - s + c * s;
}

/// Factor in the equivalent form 1 - sigma / m, with m clamped away from 0/1.
inline double factor_from_mean(double x, double b, double gamma, double m) {
  m = std::clamp(m, kMinMean, 1.0 - kMinMean);
  return 1.0 - sigmoid((x - b) / gamma) / m;
}

/// Basis value without beta. `row` holds all p coordinates.
inline double eval_basis(std::span<const double> row, const BasisTerm& term, const std::vector<Marginal>& marginals) {
  double phi = 1.0;
  for (std::size_t a = 0; a < term.vars.size(); ++a) {
    const std::size_t j = term.vars[a];
    if (j >= row.size() || j >= marginals.size()) throw ValidationError("basis variable index out of range");
    const double m = sigmoid_mean(marginals[j], term.knots[a], term.bandwidths[a]);
    phi *= factor_from_mean(row[j], term.knots[a], term.bandwidths[a], m);
  }
  return phi;
}

struct FactorGradient {
  double d_knot = 0.0;
  double d_bandwidth = 0.0;
};

/// Partials of 1 - sigma((x-b)/gamma) / m(b,gamma), m moving with (b, gamma).
inline FactorGradient grad_factor(double x, double b, double gamma, const SigmoidMoments& mom) {
  const double m = std::clamp(mom.mean, kMinMean, 1.0 - kMinMean);
  const double z = (x - b) / gamma;
  const double s = sigmoid(z);
  const double ds = s * (1.0 - s);
  FactorGradient g;
  g.d_knot = ds / (gamma * m) - s * mom.slope_mean / (gamma * m * m);
  g.d_bandwidth = (z / gamma) * ds / m - s * mom.scale_mean / (m * m);
  return g;
}

inline FactorGradient grad_factor(double x, double b, double gamma, const Marginal& marginal) {
  if (!(gamma > 0.0)) throw ValidationError("grad_factor requires gamma > 0");
  const auto mom = sigmoid_moments(marginal, b, gamma);
  if (degenerate(mom)) throw RuntimeError("degenerate bandwidth in grad_factor");
  return grad_factor(x, b, gamma, mom);
}

}  // namespace btpnn
