#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "btpnn/core.hpp"
#include "btpnn/data.hpp"
#include "btpnn/inference.hpp"

namespace btpnn {

// ---------------------------------------------------------------------------
// Synthetic regression functions

enum class SyntheticFunction { f1, f2, f3, poisson_f0, bernoulli_linear };

inline SyntheticFunction synthetic_function_from_string(const std::string& s) {
  if (s == "f1") return SyntheticFunction::f1;
  if (s == "f2") return SyntheticFunction::f2;
  if (s == "f3") return SyntheticFunction::f3;
  if (s == "poisson_f0") return SyntheticFunction::poisson_f0;
  if (s == "bernoulli_linear") return SyntheticFunction::bernoulli_linear;
  throw ValidationError("unknown function_id '" + s + "' (expected f1, f2, f3, poisson_f0 or bernoulli_linear)");
}

inline std::string to_string(SyntheticFunction f) {
  switch (f) {
    case SyntheticFunction::f1: return "f1";
    case SyntheticFunction::f2: return "f2";
    case SyntheticFunction::f3: return "f3";
    case SyntheticFunction::poisson_f0: return "poisson_f0";
    case SyntheticFunction::bernoulli_linear: return "bernoulli_linear";
  }
  return "f1";
}

struct SyntheticSpec {
  SyntheticFunction function = SyntheticFunction::f2;
  std::size_t n = 1000;
  std::size_t p = 10;
  double snr = 5.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (p < 10) throw ValidationError("synthetic generators need p >= 10, got " + std::to_string(p));
    if (!(snr > 0.0)) throw ValidationError("snr must be positive");
    if (n < 2) throw ValidationError("synthetic n must be >= 2");
  }
};

inline Family synthetic_family(SyntheticFunction f) {
  switch (f) {
    case SyntheticFunction::poisson_f0: return Family::poisson;
    case SyntheticFunction::bernoulli_linear: return Family::bernoulli;
    default: return Family::gaussian;
  }
}

/// Support (lo, hi) of the uniform law of input j (0-based).
inline std::pair<double, double> input_range(SyntheticFunction f, std::size_t j) {
  switch (f) {
    case SyntheticFunction::f1:
      if (j >= 10) return {-1.0, 1.0};
      if (j == 3 || j == 4 || j == 7 || j == 9) return {0.6, 1.0};
      return {0.0, 1.0};
    case SyntheticFunction::f2:
    case SyntheticFunction::f3: return {-1.0, 1.0};
    case SyntheticFunction::poisson_f0:
    case SyntheticFunction::bernoulli_linear: return {0.0, 1.0};
  }
  return {0.0, 1.0};
}

namespace detail {

inline double checked_asin(double a) {
  if (a < -1.0 || a > 1.0) throw RuntimeError("asin argument outside [-1,1]");
  return std::asin(a);
}

inline double checked_acos(double a) {
  if (a < -1.0 || a > 1.0) throw RuntimeError("acos argument outside [-1,1]");
  return std::acos(a);
}

}  // namespace detail

/// Signal functions; `x` holds at least 10 coordinates, x[0] is x_1.
inline double synthetic_value(SyntheticFunction f, std::span<const double> x) {
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4];
  const double x6 = x[5], x7 = x[6], x8 = x[7], x9 = x[8], x10 = x[9];
  switch (f) {
    case SyntheticFunction::f1:
    case SyntheticFunction::poisson_f0:
      return std::pow(kPi, x1 * x2) * std::sqrt(2.0 * std::abs(x3)) - detail::checked_asin(0.5 * x4) +
             std::log(std::abs(x3 + x5) + 1.0) + x9 / (1.0 + std::abs(x10)) * std::sqrt(x7 / (1.0 + std::abs(x8))) -
             x2 * x7;
    case SyntheticFunction::f2:
      return x1 * x2 + std::pow(2.0, x3 + x5 + x6) + std::pow(2.0, x3 + x4 + x5 + x7) + std::sin(x7 * std::sin(x8 + x9)) +
             detail::checked_acos(0.9 * x10);
    case SyntheticFunction::f3:
      return std::tanh(x1 * x2 + x3 * x4) * std::sqrt(std::abs(x5)) + std::exp(x5 + x6) +
             std::log((x6 * x7 * x8) * (x6 * x7 * x8) + 1.0) + x9 * x10 + 1.0 / (1.0 + std::abs(x10));
    case SyntheticFunction::bernoulli_linear: return 2.0 * x1 - 1.0;
  }
  return 0.0;
}

/// Variable sets of order <= 3 whose ANOVA component is nonzero under the
/// generating input law, from the additive structure of each function.
/// Product pieces contribute every subset of their inputs; pieces that are
/// odd in some input (x1*x2, sin(x7 sin(x8+x9)), tanh(x1x2+x3x4)) contribute
/// only the subsets containing that input pattern. 0-based indices.
inline std::vector<VarSet> signal_sets(SyntheticFunction f) {
  auto subsets_of = [](std::vector<std::size_t> vars) {
    std::vector<VarSet> out;
    const std::size_t d = vars.size();
    for (std::size_t mask = 1; mask < (1u << d); ++mask) {
      VarSet s;
      for (std::size_t a = 0; a < d; ++a) {
        if (mask & (1u << a)) s.push_back(vars[a]);
      }
      if (s.size() <= 3) out.push_back(s);
    }
    return out;
  };
  std::vector<VarSet> sets;
  auto add = [&](const std::vector<VarSet>& more) { sets.insert(sets.end(), more.begin(), more.end()); };
  switch (f) {
    case SyntheticFunction::f1:
    case SyntheticFunction::poisson_f0:
      add(subsets_of({0, 1, 2}));     // pi^(x1 x2) sqrt(2|x3|)
      add({{3}});                     // asin(0.5 x4)
      add(subsets_of({2, 4}));        // log(|x3 + x5| + 1)
      add(subsets_of({6, 7, 8, 9}));  // x9/(1+|x10|) sqrt(x7/(1+|x8|))
      add(subsets_of({1, 6}));        // x2 x7
      break;
    case SyntheticFunction::f2:
      add({{0, 1}});                  // x1 x2, mean-zero factors
      add(subsets_of({2, 4, 5}));     // 2^(x3+x5+x6)
      add(subsets_of({2, 3, 4, 6}));  // 2^(x3+x4+x5+x7)
      add({{6}, {6, 7}, {6, 8}, {6, 7, 8}});  // sin(x7 sin(x8+x9)), odd in x7
      add({{9}});                     // arccos(0.9 x10)
      break;
    case SyntheticFunction::f3:
      // tanh(x1x2 + x3x4) sqrt|x5|: conditional means vanish unless a full
      // product pair is observed; sqrt|x5| has nonzero mean.
      add({{0, 1}, {2, 3}, {0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}, {0, 1, 4}, {2, 3, 4}});
      add(subsets_of({4, 5}));        // exp(x5 + x6)
      add(subsets_of({5, 6, 7}));     // log((x6 x7 x8)^2 + 1)
      add({{8, 9}});                  // x9 x10
      add({{9}});                     // 1/(1+|x10|)
      break;
    case SyntheticFunction::bernoulli_linear:
      add({{0}});
      break;
  }
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  return sets;
}

/// All sets of size d from {0..p-1}, lexicographic.
inline std::vector<VarSet> all_sets_of_order(std::size_t p, std::size_t d) {
  std::vector<VarSet> out;
  if (d == 0 || d > p) return out;
  VarSet s(d);
  std::iota(s.begin(), s.end(), std::size_t{0});
  while (true) {
    out.push_back(s);
    std::size_t a = d;
    while (a > 0 && s[a - 1] == p - d + a - 1) --a;
    if (a == 0) break;
    ++s[a - 1];
    for (std::size_t b = a; b < d; ++b) s[b] = s[b - 1] + 1;
  }
  return out;
}

struct SyntheticData {
  Dataset data;
  std::map<VarSet, int> truth;  // every set of order <= 3
  std::vector<double> signal;   // f(x_i)
  double noise_variance = 0.0;  // gaussian only
};

inline std::vector<double> draw_inputs(SyntheticFunction f, std::size_t p, Rng& rng) {
  std::vector<double> x(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto [lo, hi] = input_range(f, j);
    x[j] = lo + (hi - lo) * rng.uniform();
  }
  return x;
}

/// Variance of the signal over `draws` fresh inputs.
inline double signal_variance(SyntheticFunction f, std::size_t p, Rng& rng, std::size_t draws = 100000) {
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto x = draw_inputs(f, p, rng);
    const double v = synthetic_value(f, x);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  return m2 / static_cast<double>(draws - 1);
}

inline SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  const Family family = synthetic_family(spec.function);
  Rng rng(spec.seed, 0xda7a);
  SyntheticData out;
  if (family == Family::gaussian) {
    Rng mc(spec.seed, 0x5a7);
    out.noise_variance = signal_variance(spec.function, spec.p, mc) / spec.snr;
  }
  const double noise_sd = std::sqrt(out.noise_variance);
  std::vector<double> raw(spec.n * spec.p);
  std::vector<double> y(spec.n);
  out.signal.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto x = draw_inputs(spec.function, spec.p, rng);
    for (std::size_t j = 0; j < spec.p; ++j) raw[j * spec.n + i] = x[j];
    const double f = synthetic_value(spec.function, x);
    out.signal[i] = f;
    switch (family) {
      case Family::gaussian: y[i] = f + noise_sd * rng.normal(); break;
      case Family::bernoulli: y[i] = rng.uniform() < sigmoid(f) ? 1.0 : 0.0; break;
      case Family::poisson:
        y[i] = static_cast<double>(std::poisson_distribution<long long>(std::exp(f))(rng.engine()));
        break;
    }
  }
  std::vector<ColumnMeta> cols;
  for (std::size_t j = 0; j < spec.p; ++j) {
    const auto name = "x" + std::to_string(j + 1);
    cols.push_back({name, ColumnOrigin::continuous, name, ""});
  }
  out.data = make_dataset(std::move(raw), std::move(y), family, std::move(cols));
  const auto signal = signal_sets(spec.function);
  for (std::size_t d = 1; d <= 3; ++d) {
    for (auto& s : all_sets_of_order(spec.p, d)) {
      out.truth[s] = std::binary_search(signal.begin(), signal.end(), s) ? 1 : 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty()) throw ValidationError("rmse needs equal, non-empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

/// Area under the ROC curve via the rank-sum statistic with midranks.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auroc needs equal-length inputs");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw ValidationError("auroc needs both classes present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// Mean negative log predictive density over the rows of `ds`.
inline double nll(const PosteriorSamples& samples, const Dataset& ds) {
  const auto dens = predictive_densities(samples, ds);
  double s = 0.0;
  for (double d : dens) s -= std::log(d);
  return s / static_cast<double>(ds.n);
}

/// Sample CRPS, E|Z - y| - E|Z - Z'|/2, for draws z.
inline double crps_from_draws(std::vector<double> z, double y) {
  const auto m = static_cast<double>(z.size());
  double first = 0.0;
  for (double v : z) first += std::abs(v - y);
  std::sort(z.begin(), z.end());
  double pair = 0.0;  // sum over ordered pairs of |z_i - z_j|
  for (std::size_t i = 0; i < z.size(); ++i) pair += (2.0 * static_cast<double>(i) + 1.0 - m) * z[i];
  pair *= 2.0;
  return first / m - 0.5 * pair / (m * m);
}

/// Stratified draws from a gaussian predictive mixture: draw i uses
/// component i mod N and uniform stratum i of `count`.
inline std::vector<double> gaussian_mixture_draws(std::span<const double> means, std::span<const double> variances,
                                                  std::size_t count, Rng& rng) {
  const boost::math::normal_distribution<double> unit;
  std::vector<double> z(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s = i % means.size();
    const double u = (static_cast<double>(i) + rng.uniform()) / static_cast<double>(count);
    const double q = boost::math::quantile(unit, std::clamp(u, 1e-300, 1.0 - 1e-16));
    z[i] = means[s] + std::sqrt(variances[s]) * q;
  }
  return z;
}

/// CRPS of the gaussian predictive at one row.
inline double crps(const PosteriorSamples& samples, std::span<const double> row, double y, Rng& rng,
                   std::size_t draws = 1000) {
  if (samples.meta.family != Family::gaussian) throw ValidationError("crps is defined for gaussian models only");
  if (samples.size() < 2) throw ValidationError("crps needs at least 2 posterior draws");
  const auto f = posterior_values(samples, single_row(row, samples.meta.family));
  std::vector<double> means(f.size()), vars(f.size());
  for (std::size_t s = 0; s < f.size(); ++s) {
    means[s] = samples.meta.offset + f[s][0];
    vars[s] = samples.states[s].eta;
  }
  return crps_from_draws(gaussian_mixture_draws(means, vars, draws, rng), y);
}

/// Mean CRPS over the rows of `ds`.
inline double mean_crps(const PosteriorSamples& samples, const Dataset& ds, std::uint64_t seed, std::size_t draws = 1000) {
  if (samples.meta.family != Family::gaussian) throw ValidationError("crps is defined for gaussian models only");
  if (samples.size() < 2) throw ValidationError("crps needs at least 2 posterior draws");
  const auto f = posterior_values(samples, ds);
  Rng rng(seed, 0xc4b5);
  std::vector<double> means(f.size()), vars(f.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t s = 0; s < f.size(); ++s) {
      means[s] = samples.meta.offset + f[s][i];
      vars[s] = samples.states[s].eta;
    }
    total += crps_from_draws(gaussian_mixture_draws(means, vars, draws, rng), ds.y[i]);
  }
  return total / static_cast<double>(ds.n);
}

/// Expected calibration error of binary probabilities P(y=1), binned on the
/// confidence max(p, 1-p) into equal-width bins over [0,1].
inline double ece(std::span<const double> probs, std::span<const int> labels, std::size_t n_bins) {
  if (n_bins < 1) throw ValidationError("ece needs at least one bin");
  if (probs.size() != labels.size() || probs.empty()) throw ValidationError("ece needs equal, non-empty inputs");
  std::vector<double> count(n_bins, 0.0), correct(n_bins, 0.0), conf(n_bins, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("ece probabilities must lie in [0,1]");
    const double c = std::max(p, 1.0 - p);
    const int predicted = p >= 0.5 ? 1 : 0;
    auto bin = static_cast<std::size_t>(std::ceil(c * static_cast<double>(n_bins)));
    bin = bin == 0 ? 0 : std::min(bin - 1, n_bins - 1);
    count[bin] += 1.0;
    correct[bin] += predicted == labels[i] ? 1.0 : 0.0;
    conf[bin] += c;
  }
  double e = 0.0;
  const auto n = static_cast<double>(probs.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0.0) continue;
    e += count[b] / n * std::abs(correct[b] / count[b] - conf[b] / count[b]);
  }
  return e;
}

/// AUROC of importance scores against truth labels over every set of order
/// d among p inputs. Missing scores count as 0, missing labels as 0.
inline double component_selection_auroc(const std::map<VarSet, double>& importance, const std::map<VarSet, int>& truth,
                                        std::size_t d, std::size_t p) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : all_sets_of_order(p, d)) {
    const auto it = importance.find(s);
    scores.push_back(it == importance.end() ? 0.0 : it->second);
    const auto t = truth.find(s);
    labels.push_back(t == truth.end() ? 0 : t->second);
  }
  if (std::find(labels.begin(), labels.end(), 1) == labels.end()) {
    throw ValidationError("no signal sets of order " + std::to_string(d));
  }
  return auroc(scores, labels);
}

}  // namespace btpnn
