#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "btpnn/basis.hpp"
#include "btpnn/likelihood.hpp"
#include "btpnn/samples.hpp"

namespace btpnn {

using VarSet = std::vector<std::size_t>;

namespace detail {

inline void require_samples(const PosteriorSamples& s) {
  if (s.empty()) throw ValidationError("posterior sample set is empty");
}

inline const std::vector<Marginal>& marginals_of(const PosteriorSamples& s) {
  if (s.meta.marginals.size() != s.meta.p) throw ValidationError("posterior samples carry no marginals");
  return s.meta.marginals;
}

/// beta * phi of one term on every row of `rows`.
inline std::vector<double> term_column(const BasisTerm& t, const Dataset& rows, const std::vector<Marginal>& marginals) {
  std::vector<double> phi;
  basis_column(rows, t, marginals, phi);
  for (double& v : phi) v *= t.beta;
  return phi;
}

}  // namespace detail

/// Single-row dataset for the row-wise API.
inline Dataset single_row(std::span<const double> row, Family family) {
  Dataset ds;
  ds.n = 1;
  ds.p = row.size();
  ds.x.assign(row.begin(), row.end());
  ds.y.assign(1, 0.0);
  ds.family = family;
  return ds;
}

/// Model values f (offset excluded) for every state on every row:
/// result[s][i].
inline std::vector<std::vector<double>> posterior_values(const PosteriorSamples& samples, const Dataset& rows) {
  detail::require_samples(samples);
  const auto& marginals = detail::marginals_of(samples);
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples.states) out.push_back(model_values(s, rows, marginals));
  return out;
}

inline double mean_response(Family family, double natural) {
  switch (family) {
    case Family::gaussian: return natural;
    case Family::bernoulli: return sigmoid(natural);
    case Family::poisson: return std::exp(natural);
  }
  return natural;
}

/// Bayes estimate of E[y | x] per row.
inline std::vector<double> predictive_points(const PosteriorSamples& samples, const Dataset& rows) {
  const auto f = posterior_values(samples, rows);
  std::vector<double> out(rows.n, 0.0);
  for (const auto& fs : f) {
    for (std::size_t i = 0; i < rows.n; ++i) out[i] += mean_response(samples.meta.family, samples.meta.offset + fs[i]);
  }
  for (double& v : out) v /= static_cast<double>(f.size());
  return out;
}

inline double predictive_point(const PosteriorSamples& samples, std::span<const double> row) {
  return predictive_points(samples, single_row(row, samples.meta.family))[0];
}

/// Posterior-averaged density of y at every row (y taken from `rows.y`).
inline std::vector<double> predictive_densities(const PosteriorSamples& samples, const Dataset& rows) {
  const auto f = posterior_values(samples, rows);
  std::vector<double> out(rows.n, 0.0);
  for (std::size_t s = 0; s < f.size(); ++s) {
    const double eta = samples.states[s].eta;
    for (std::size_t i = 0; i < rows.n; ++i) {
      out[i] += std::exp(log_density(samples.meta.family, samples.meta.offset + f[s][i], rows.y[i], eta));
    }
  }
  for (double& v : out) v /= static_cast<double>(f.size());
  return out;
}

inline double predictive_density(const PosteriorSamples& samples, std::span<const double> row, double y) {
  auto ds = single_row(row, samples.meta.family);
  ds.y[0] = y;
  return predictive_densities(samples, ds)[0];
}

/// Quantile of the gaussian predictive mixture at one row, by bisection on
/// the mixture CDF. `f` holds the per-state model values for the row.
inline double gaussian_mixture_quantile(std::span<const double> means, std::span<const double> variances, double q) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t s = 0; s < means.size(); ++s) {
    const double sd = std::sqrt(variances[s]);
    lo = std::min(lo, means[s] - 12.0 * sd);
    hi = std::max(hi, means[s] + 12.0 * sd);
  }
  auto cdf = [&](double y) {
    double c = 0.0;
    for (std::size_t s = 0; s < means.size(); ++s) c += 0.5 * std::erfc(-(y - means[s]) / std::sqrt(2.0 * variances[s]));
    return c / static_cast<double>(means.size());
  };
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Linear-interpolation empirical quantile of a sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct ComponentBand {
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Per-state values of component S: sum of beta*phi over terms whose set
/// equals S. result[s][i].
inline std::vector<std::vector<double>> component_draws(const PosteriorSamples& samples, const VarSet& set,
                                                        const Dataset& rows) {
  detail::require_samples(samples);
  const auto& marginals = detail::marginals_of(samples);
  std::vector<std::vector<double>> out(samples.size(), std::vector<double>(rows.n, 0.0));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (const auto& t : samples.states[s].terms) {
      if (t.vars != set) continue;
      const auto col = detail::term_column(t, rows, marginals);
      for (std::size_t i = 0; i < rows.n; ++i) out[s][i] += col[i];
    }
  }
  return out;
}

/// Posterior mean of f_S and its pointwise (lo_q, hi_q) quantile band.
inline ComponentBand component_estimate(const PosteriorSamples& samples, const VarSet& set, const Dataset& rows,
                                        double lo_q = 0.025, double hi_q = 0.975) {
  const auto draws = component_draws(samples, set, rows);
  ComponentBand band;
  band.mean.assign(rows.n, 0.0);
  band.lo.resize(rows.n);
  band.hi.resize(rows.n);
  std::vector<double> col(draws.size());
  for (std::size_t i = 0; i < rows.n; ++i) {
    for (std::size_t s = 0; s < draws.size(); ++s) {
      col[s] = draws[s][i];
      band.mean[i] += col[s];
    }
    band.mean[i] /= static_cast<double>(draws.size());
    std::sort(col.begin(), col.end());
    band.lo[i] = sorted_quantile(col, lo_q);
    band.hi[i] = sorted_quantile(col, hi_q);
  }
  return band;
}

/// Every distinct variable set used by any state, in lexicographic order.
inline std::vector<VarSet> visited_sets(const PosteriorSamples& samples) {
  std::vector<VarSet> sets;
  for (const auto& s : samples.states) {
    for (const auto& t : s.terms) sets.push_back(t.vars);
  }
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  return sets;
}

struct ImportanceOptions {
  bool normalize = false;
  bool per_sample = false;  // mean of per-draw norms instead of norm of the mean
};

/// Empirical l2-norm over `rows` of each visited component. By default the
/// norm is taken of the posterior-mean component.
inline std::map<VarSet, double> importance_scores(const PosteriorSamples& samples, const Dataset& rows,
                                                  ImportanceOptions opts = {}) {
  detail::require_samples(samples);
  const auto& marginals = detail::marginals_of(samples);
  const double inv_n = 1.0 / static_cast<double>(rows.n);
  const double inv_s = 1.0 / static_cast<double>(samples.size());
  std::map<VarSet, std::vector<double>> sums;
  std::map<VarSet, double> per_sample;
  for (const auto& s : samples.states) {
    std::map<VarSet, std::vector<double>> local;
    for (const auto& t : s.terms) {
      const auto col = detail::term_column(t, rows, marginals);
      auto& acc = local[t.vars];
      if (acc.empty()) acc.assign(rows.n, 0.0);
      for (std::size_t i = 0; i < rows.n; ++i) acc[i] += col[i];
    }
    for (auto& [set, vals] : local) {
      auto& acc = sums[set];
      if (acc.empty()) acc.assign(rows.n, 0.0);
      double sq = 0.0;
      for (std::size_t i = 0; i < rows.n; ++i) {
        acc[i] += vals[i];
        sq += vals[i] * vals[i];
      }
      per_sample[set] += std::sqrt(sq * inv_n) * inv_s;
    }
  }
  std::map<VarSet, double> out;
  for (auto& [set, acc] : sums) {
    if (opts.per_sample) {
      out[set] = per_sample[set];
      continue;
    }
    double sq = 0.0;
    for (double v : acc) sq += (v * inv_s) * (v * inv_s);
    out[set] = std::sqrt(sq * inv_n);
  }
  if (opts.normalize) {
    double top = 0.0;
    for (const auto& [set, v] : out) top = std::max(top, v);
    if (top > 0.0) {
      for (auto& [set, v] : out) v /= top;
    }
  }
  return out;
}

/// Across-fold relative variance of one component evaluated on common rows;
/// folds[j][i] is fold j at row i. Rows where every fold is 0 are skipped.
inline double stability_score(const std::vector<std::vector<double>>& folds) {
  if (folds.size() < 2) throw ValidationError("stability score needs at least 2 folds");
  const std::size_t n = folds[0].size();
  for (const auto& f : folds) {
    if (f.size() != n) throw ValidationError("stability folds must share evaluation rows");
  }
  double total = 0.0;
  std::size_t used = 0;
  const auto J = static_cast<double>(folds.size());
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0, sq = 0.0;
    for (const auto& f : folds) {
      mean += f[i];
      sq += f[i] * f[i];
    }
    if (sq == 0.0) continue;
    mean /= J;
    double dev = 0.0;
    for (const auto& f : folds) dev += (f[i] - mean) * (f[i] - mean);
    total += dev / sq;
    ++used;
  }
  if (used == 0) throw ValidationError("stability score undefined: every row has a zero denominator");
  return total / static_cast<double>(used);
}

/// Average stability over all sets of order <= max_order among p inputs.
/// Sets absent from `components` (never estimated in any fold) score 0.
inline double stability_aggregate(const std::map<VarSet, std::vector<std::vector<double>>>& components, std::size_t p,
                                  std::size_t max_order) {
  double total = 0.0;
  double count = 0.0;
  for (std::size_t d = 1; d <= max_order && d <= p; ++d) count += std::exp(std::lgamma(p + 1.0) - std::lgamma(d + 1.0) - std::lgamma(p - d + 1.0));
  for (const auto& [set, folds] : components) {
    if (set.empty() || set.size() > max_order) continue;
    bool any = false;
    for (const auto& f : folds) {
      for (double v : f) any = any || v != 0.0;
    }
    if (any) total += stability_score(folds);
  }
  return total / std::round(count);
}

}  // namespace btpnn
