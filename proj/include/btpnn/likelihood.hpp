#pragma once

#include <cmath>
#include <vector>

#include "btpnn/basis.hpp"
#include "btpnn/core.hpp"
#include "btpnn/data.hpp"

namespace btpnn {

// Log-partition A and its first two derivatives.

inline double log_partition(Family family, double f) {
  switch (family) {
    case Family::gaussian: return 0.5 * f * f;
    case Family::bernoulli: return softplus(f);
    case Family::poisson: return std::exp(f);
  }
  return 0.0;
}

inline double log_partition_d1(Family family, double f) {
  switch (family) {
    case Family::gaussian: return f;
    case Family::bernoulli: return sigmoid(f);
    case Family::poisson: return std::exp(f);
  }
  return 0.0;
}

inline double log_partition_d2(Family family, double f) {
  switch (family) {
    case Family::gaussian: return 1.0;
    case Family::bernoulli: {
      const double s = sigmoid(f);
      return s * (1.0 - s);
    }
    case Family::poisson: return std::exp(f);
  }
  return 0.0;
}

/// Full parameter vector walked by a chain. `eta` is the gaussian noise
/// variance and stays 1 for the other families.
struct ModelState {
  std::vector<BasisTerm> terms;
  double eta = 1.0;

  std::size_t size() const { return terms.size(); }
  bool operator==(const ModelState&) const = default;
};

inline double model_eval(const ModelState& state, std::span<const double> row, const std::vector<Marginal>& marginals) {
  double f = 0.0;
  for (const auto& t : state.terms) f += t.beta * eval_basis(row, t, marginals);
  return f;
}

inline void check_support(Family family, double y) {
  if (family == Family::bernoulli && y != 0.0 && y != 1.0) throw ValidationError("bernoulli outcome must be 0 or 1");
  if (family == Family::poisson && (y < 0.0 || y != std::floor(y))) {
    throw ValidationError("poisson outcome must be a non-negative integer");
  }
}

/// Base-measure term S(y, eta).
inline double base_measure(Family family, double y, double eta) {
  switch (family) {
    case Family::gaussian: return -y * y / (2.0 * eta) - 0.5 * std::log(2.0 * kPi * eta);
    case Family::bernoulli: return 0.0;
    case Family::poisson: return -std::lgamma(y + 1.0);
  }
  return 0.0;
}

inline double log_density(Family family, double f, double y, double eta) {
  if (!(eta > 0.0)) throw ValidationError("dispersion must be positive");
  check_support(family, y);
  return (f * y - log_partition(family, f)) / eta + base_measure(family, y, eta);
}

inline double dlog_density_df(Family family, double f, double y, double eta) {
  if (!(eta > 0.0)) throw ValidationError("dispersion must be positive");
  check_support(family, y);
  return (y - log_partition_d1(family, f)) / eta;
}

/// Sum of log densities for natural parameters offset + f[i]; no support
/// checks (the dataset was validated on load).
inline double sum_log_density(Family family, std::span<const double> f, std::span<const double> y, double offset,
                              double eta) {
  double s = 0.0;
  const std::size_t n = f.size();
  switch (family) {
    case Family::gaussian: {
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - offset - f[i];
        s += r * r;
      }
      return -s / (2.0 * eta) - 0.5 * static_cast<double>(n) * std::log(2.0 * kPi * eta);
    }
    case Family::bernoulli:
      for (std::size_t i = 0; i < n; ++i) {
        const double g = offset + f[i];
        s += g * y[i] - softplus(g);
      }
      return s;
    case Family::poisson:
      for (std::size_t i = 0; i < n; ++i) {
        const double g = offset + f[i];
        s += g * y[i] - std::exp(g) - std::lgamma(y[i] + 1.0);
      }
      return s;
  }
  return s;
}

/// Per-row model values of `state` on every row of `ds`.
inline std::vector<double> model_values(const ModelState& state, const Dataset& ds, const std::vector<Marginal>& marginals) {
  std::vector<double> f(ds.n, 0.0);
  for (const auto& t : state.terms) {
    std::vector<double> mean(t.vars.size());
    for (std::size_t a = 0; a < t.vars.size(); ++a) mean[a] = sigmoid_mean(marginals[t.vars[a]], t.knots[a], t.bandwidths[a]);
    for (std::size_t i = 0; i < ds.n; ++i) {
      double phi = 1.0;
      for (std::size_t a = 0; a < t.vars.size(); ++a) {
        phi *= factor_from_mean(ds.at(i, t.vars[a]), t.knots[a], t.bandwidths[a], mean[a]);
      }
      f[i] += t.beta * phi;
    }
  }
  return f;
}

/// Log-likelihood of `state` on `ds`, natural parameter offset + f(x).
inline double log_likelihood(const ModelState& state, const Dataset& ds, const std::vector<Marginal>& marginals,
                             double offset = 0.0) {
  const auto f = model_values(state, ds, marginals);
  return sum_log_density(ds.family, f, ds.y, offset, state.eta);
}

/// Basis values of one term on every row, computed with shared per-coordinate
/// moments. Returns false when some coordinate's sigmoid mean is degenerate.
inline bool basis_column(const Dataset& ds, const BasisTerm& term, const std::vector<Marginal>& marginals,
                         std::vector<double>& phi) {
  phi.assign(ds.n, 1.0);
  for (std::size_t a = 0; a < term.vars.size(); ++a) {
    const std::size_t j = term.vars[a];
    const double b = term.knots[a];
    const double g = term.bandwidths[a];
    const double m = sigmoid_mean(marginals[j], b, g);
    if (!(m >= kMinMean && m <= 1.0 - kMinMean)) return false;
    const double inv_m = 1.0 / m;
    const double inv_g = 1.0 / g;
    const auto col = ds.col(j);
    for (std::size_t i = 0; i < ds.n; ++i) phi[i] *= 1.0 - sigmoid((col[i] - b) * inv_g) * inv_m;
  }
  return true;
}

/// Cached per-row model values and per-term basis columns on the training
/// rows. A kernel touching term k works against lambda_k = f - beta_k*phi_k
/// and commits only its own delta.
class LikelihoodCache {
 public:
  LikelihoodCache(const Dataset& ds, const std::vector<Marginal>& marginals, double offset)
      : ds_(&ds), marginals_(&marginals), offset_(offset), f_(ds.n, 0.0) {}

  void rebuild(const ModelState& state) {
    phi_.clear();
    std::fill(f_.begin(), f_.end(), 0.0);
    for (const auto& t : state.terms) {
      std::vector<double> col;
      if (!basis_column(*ds_, t, *marginals_, col)) throw RuntimeError("state contains a degenerate basis term");
      for (std::size_t i = 0; i < ds_->n; ++i) f_[i] += t.beta * col[i];
      phi_.push_back(std::move(col));
    }
    loglik_ = sum_log_density(ds_->family, f_, ds_->y, offset_, state.eta);
  }

  double loglik() const { return loglik_; }
  std::span<const double> f() const { return f_; }
  std::span<const double> phi(std::size_t k) const { return phi_[k]; }
  double offset() const { return offset_; }

  /// Log-likelihood after replacing term k's contribution by beta*phi.
  double loglik_replacing(std::size_t k, double old_beta, double beta, std::span<const double> phi, double eta,
                          std::vector<double>& scratch) const {
    scratch.resize(ds_->n);
    const auto& cur = phi_[k];
    for (std::size_t i = 0; i < ds_->n; ++i) scratch[i] = f_[i] - old_beta * cur[i] + beta * phi[i];
    return sum_log_density(ds_->family, scratch, ds_->y, offset_, eta);
  }

  /// Log-likelihood after adding a new term beta*phi.
  double loglik_adding(double beta, std::span<const double> phi, double eta, std::vector<double>& scratch) const {
    scratch.resize(ds_->n);
    for (std::size_t i = 0; i < ds_->n; ++i) scratch[i] = f_[i] + beta * phi[i];
    return sum_log_density(ds_->family, scratch, ds_->y, offset_, eta);
  }

  /// Log-likelihood after dropping term k.
  double loglik_removing(std::size_t k, double beta, double eta, std::vector<double>& scratch) const {
    scratch.resize(ds_->n);
    const auto& cur = phi_[k];
    for (std::size_t i = 0; i < ds_->n; ++i) scratch[i] = f_[i] - beta * cur[i];
    return sum_log_density(ds_->family, scratch, ds_->y, offset_, eta);
  }

  void commit_replace(std::size_t k, std::vector<double> phi, std::vector<double>& f_new, double loglik) {
    phi_[k] = std::move(phi);
    f_.swap(f_new);
    loglik_ = loglik;
  }
  void commit_add(std::vector<double> phi, std::vector<double>& f_new, double loglik) {
    phi_.push_back(std::move(phi));
    f_.swap(f_new);
    loglik_ = loglik;
  }
  void commit_remove(std::size_t k, std::vector<double>& f_new, double loglik) {
    phi_.erase(phi_.begin() + static_cast<std::ptrdiff_t>(k));
    f_.swap(f_new);
    loglik_ = loglik;
  }
  void set_eta(double eta) { loglik_ = sum_log_density(ds_->family, f_, ds_->y, offset_, eta); }

 private:
  const Dataset* ds_;
  const std::vector<Marginal>* marginals_;
  double offset_;
  std::vector<double> f_;
  std::vector<std::vector<double>> phi_;
  double loglik_ = 0.0;
};

}  // namespace btpnn
