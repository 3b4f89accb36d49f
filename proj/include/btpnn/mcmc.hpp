#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "btpnn/basis.hpp"
#include "btpnn/core.hpp"
#include "btpnn/data.hpp"
#include "btpnn/likelihood.hpp"
#include "btpnn/prior.hpp"
#include "btpnn/samples.hpp"

namespace btpnn {

// conjugate: the exact full conditional. mean_ssr: IG(v/2, (SSR/n + v lambda)/2),
// which ignores n in the shape; kept only for comparison runs.
enum class Sigma2Update { conjugate, mean_ssr };

struct ChainConfig {
  std::size_t burn_in = 1000;
  std::size_t iterations = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  std::size_t n_chains = 1;
  MarginalKind marginal_kind = MarginalKind::empirical;
  Sigma2Update sigma2_update = Sigma2Update::conjugate;
  std::size_t initial_K = 0;
  std::size_t refresh_every = 100;  // accepted moves between full cache rebuilds
  bool flat_likelihood = false;     // prior-only chains, used for sampler checks

  void validate() const {
    if (thin < 1) throw ValidationError("thin must be >= 1");
    if (n_chains < 1) throw ValidationError("n_chains must be >= 1");
    if (refresh_every < 1) throw ValidationError("refresh_every must be >= 1");
  }
};

struct MoveCounter {
  std::size_t proposed = 0;
  std::size_t accepted = 0;

  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
  void record(bool ok) {
    ++proposed;
    accepted += ok ? 1 : 0;
  }
  MoveCounter& operator+=(const MoveCounter& o) {
    proposed += o.proposed;
    accepted += o.accepted;
    return *this;
  }
};

struct MoveStats {
  MoveCounter birth, death, adding, deleting, changing, langevin;

  MoveStats& operator+=(const MoveStats& o) {
    birth += o.birth;
    death += o.death;
    adding += o.adding;
    deleting += o.deleting;
    changing += o.changing;
    langevin += o.langevin;
    return *this;
  }
};

// ---------------------------------------------------------------------------
// Closed-form proposal mechanics

enum class SubsetMove { adding, deleting, changing };

/// Move probabilities for a set of size d among p inputs. Deleting needs
/// d >= 2; adding and changing need d < p. Disabled moves drop out and the
/// rest are renormalized.
struct MoveProbabilities {
  double adding = 0.0;
  double deleting = 0.0;
  double changing = 0.0;

  double of(SubsetMove m) const {
    switch (m) {
      case SubsetMove::adding: return adding;
      case SubsetMove::deleting: return deleting;
      case SubsetMove::changing: return changing;
    }
    return 0.0;
  }
};

inline MoveProbabilities move_probabilities(std::size_t d, std::size_t p, const PriorConfig& cfg) {
  MoveProbabilities m;
  m.adding = d < p ? cfg.q_add : 0.0;
  m.deleting = d >= 2 ? cfg.q_delete : 0.0;
  m.changing = d < p ? cfg.q_change : 0.0;
  const double total = m.adding + m.deleting + m.changing;
  if (total > 0.0) {
    m.adding /= total;
    m.deleting /= total;
    m.changing /= total;
  }
  return m;
}

/// Sum of normalized input weights outside `vars`.
inline double complement_weight(std::span<const std::size_t> vars, std::span<const double> weights) {
  double s = 0.0;
  std::size_t a = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (a < vars.size() && vars[a] == j) {
      ++a;
      continue;
    }
    s += weights[j];
  }
  return s;
}

/// log of prior ratio × reverse/forward proposal ratio for a subset move on
/// one term, with the numeric priors of inserted coordinates cancelled
/// against their proposal draws. `old_vars` has size d; `j_in` is the
/// inserted variable (adding/changing) and `j_out` the removed one
/// (deleting/changing).
inline double log_subset_move_ratio(SubsetMove move, std::span<const std::size_t> old_vars, std::size_t j_in,
                                    std::size_t j_out, const PriorConfig& cfg, std::size_t p,
                                    std::span<const double> weights) {
  const double alpha = cfg.alpha_adding;
  const double gam = cfg.gamma_adding;
  const auto d = static_cast<double>(old_vars.size());
  const double out_old = complement_weight(old_vars, weights);
  switch (move) {
    case SubsetMove::adding: {
      const double dn = d + 1.0;  // |S_new|
      const auto fwd = move_probabilities(old_vars.size(), p, cfg);
      const auto rev = move_probabilities(old_vars.size() + 1, p, cfg);
      const double pn = alpha * std::pow(dn, -gam);
      return std::log(pn) + std::log1p(-alpha * std::pow(1.0 + dn, -gam)) - std::log1p(-pn) -
             std::log(static_cast<double>(p) - dn + 1.0) + std::log(rev.deleting) - std::log(fwd.adding) +
             std::log(out_old) - std::log(weights[j_in]);
    }
    case SubsetMove::deleting: {
      const double dn = d - 1.0;
      const auto fwd = move_probabilities(old_vars.size(), p, cfg);
      const auto rev = move_probabilities(old_vars.size() - 1, p, cfg);
      const double pn = alpha * std::pow(1.0 + dn, -gam);
      // Reverse adding draws j_out from the complement of the smaller set.
      const double out_new = out_old + weights[j_out];
      return -std::log(pn) + std::log1p(-pn) - std::log1p(-alpha * std::pow(2.0 + dn, -gam)) +
             std::log(static_cast<double>(p) - dn) + std::log(rev.adding) - std::log(fwd.deleting) +
             std::log(weights[j_out]) - std::log(out_new);
    }
    case SubsetMove::changing: {
      const double out_new = out_old + weights[j_out] - weights[j_in];
      return std::log(weights[j_out]) + std::log(out_old) - std::log(weights[j_in]) - std::log(out_new);
    }
  }
  return 0.0;
}

/// Probability of the birth mechanism proposing `target` given the current
/// sets: Random draws from the prior, Stepwise extends a uniformly chosen
/// set by one input drawn from the restricted weights. A Stepwise pick of a
/// set that already holds every input falls back to Random.
inline double log_birth_set_proposal(std::span<const std::size_t> target, const std::vector<const std::vector<std::size_t>*>& sets,
                                     const PriorConfig& cfg, std::size_t p, std::span<const double> weights) {
  const auto K = static_cast<double>(sets.size());
  const double denom = cfg.M + K;
  std::size_t full = 0;
  double stepwise = 0.0;
  for (const auto* s : sets) {
    if (s->size() == p) {
      ++full;
      continue;
    }
    if (s->size() + 1 != target.size()) continue;
    // s must be target minus exactly one element.
    std::size_t a = 0, missing = p, extra = 0;
    for (std::size_t t = 0; t < target.size(); ++t) {
      if (a < s->size() && (*s)[a] == target[t]) {
        ++a;
      } else {
        missing = target[t];
        ++extra;
      }
    }
    if (a == s->size() && extra == 1) stepwise += weights[missing] / complement_weight(*s, weights);
  }
  const double random_mass = (cfg.M + static_cast<double>(full)) / denom;
  return std::log(random_mass * std::exp(log_prior_subset(target, cfg, p)) + stepwise / denom);
}

inline double birth_probability(std::size_t K, std::size_t K_max) {
  return 1.0 - static_cast<double>(K) / static_cast<double>(K_max);
}

inline double death_probability(std::size_t K, std::size_t K_max) {
  return static_cast<double>(K) / static_cast<double>(K_max);
}

/// log prior ratio × reverse/forward proposal ratio for adding `target` to a
/// state whose sets are `sets` (numeric parameters cancel against their
/// prior draws). The reverse move deletes one of K+1 terms; with terms
/// treated as exchangeable, the position choice cancels.
inline double log_birth_ratio(std::span<const std::size_t> target, const std::vector<const std::vector<std::size_t>*>& sets,
                              const PriorConfig& cfg, std::size_t n, std::size_t p, std::span<const double> weights) {
  const std::size_t K = sets.size();
  return log_prior_K(K + 1, cfg, n) - log_prior_K(K, cfg, n) + log_prior_subset(target, cfg, p) -
         log_birth_set_proposal(target, sets, cfg, p, weights) + std::log(death_probability(K + 1, cfg.K_max)) -
         std::log(birth_probability(K, cfg.K_max));
}

// ---------------------------------------------------------------------------
// Langevin target for one term

/// Conditional log target of one term's numeric block (knots, bandwidths,
/// beta) given the rest of the model, and its gradient laid out as
/// [knots..., bandwidths..., beta].
struct TermTarget {
  bool valid = false;
  double loglik = 0.0;
  double log_target = -INFINITY;
  std::vector<double> grad;
  std::vector<double> phi;
};

inline TermTarget term_target(const Dataset& ds, const std::vector<Marginal>& marginals, const BasisTerm& term,
                              std::span<const double> rest, double offset, double eta, const PriorConfig& cfg,
                              bool flat_likelihood) {
  TermTarget out;
  const std::size_t d = term.vars.size();
  const std::size_t n = ds.n;
  for (std::size_t a = 0; a < d; ++a) {
    if (!(term.knots[a] >= 0.0 && term.knots[a] <= 1.0) || !(term.bandwidths[a] > 0.0)) return out;
  }
  std::vector<SigmoidMoments> mom(d);
  for (std::size_t a = 0; a < d; ++a) {
    mom[a] = sigmoid_moments(marginals[term.vars[a]], term.knots[a], term.bandwidths[a]);
    if (degenerate(mom[a])) return out;
  }
  std::vector<double> factor(d * n), d_knot(d * n), d_band(d * n);
  for (std::size_t a = 0; a < d; ++a) {
    const double b = term.knots[a];
    const double g = term.bandwidths[a];
    const double m = mom[a].mean;
    const double inv_g = 1.0 / g;
    const double inv_m = 1.0 / m;
    const double knot_corr = mom[a].slope_mean * inv_g * inv_m * inv_m;
    const double band_corr = mom[a].scale_mean * inv_m * inv_m;
    const auto col = ds.col(term.vars[a]);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (col[i] - b) * inv_g;
      const double s = sigmoid(z);
      const double ds_ = s * (1.0 - s);
      factor[a * n + i] = 1.0 - s * inv_m;
      d_knot[a * n + i] = ds_ * inv_g * inv_m - s * knot_corr;
      d_band[a * n + i] = z * inv_g * ds_ * inv_m - s * band_corr;
    }
  }
  out.phi.assign(n, 1.0);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t i = 0; i < n; ++i) out.phi[i] *= factor[a * n + i];
  }

  out.grad.assign(2 * d + 1, 0.0);
  if (!flat_likelihood) {
    std::vector<double> f(n), score(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = rest[i] + term.beta * out.phi[i];
    out.loglik = sum_log_density(ds.family, f, ds.y, offset, eta);
    for (std::size_t i = 0; i < n; ++i) score[i] = (ds.y[i] - log_partition_d1(ds.family, offset + f[i])) / eta;

    std::vector<double> left(n), right(n);
    for (std::size_t a = 0; a < d; ++a) {
      double gk = 0.0, gb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        // Product of the other factors, without dividing by this one.
        double others = 1.0;
        for (std::size_t l = 0; l < d; ++l) {
          if (l != a) others *= factor[l * n + i];
        }
        const double w = score[i] * others;
        gk += w * d_knot[a * n + i];
        gb += w * d_band[a * n + i];
      }
      out.grad[a] = term.beta * gk;
      out.grad[d + a] = term.beta * gb;
    }
    double gbeta = 0.0;
    for (std::size_t i = 0; i < n; ++i) gbeta += score[i] * out.phi[i];
    out.grad[2 * d] = gbeta;
  }
  for (std::size_t a = 0; a < d; ++a) {
    out.grad[d + a] += (cfg.a_gamma - 1.0) / term.bandwidths[a] - 1.0 / cfg.b_gamma;
  }
  out.grad[2 * d] -= term.beta / cfg.sigma_beta2;
  out.log_target = out.loglik + log_prior_numeric(term, cfg);
  out.valid = std::isfinite(out.log_target);
  return out;
}

inline std::vector<double> pack_term(const BasisTerm& t) {
  std::vector<double> v(t.knots);
  v.insert(v.end(), t.bandwidths.begin(), t.bandwidths.end());
  v.push_back(t.beta);
  return v;
}

inline void unpack_term(std::span<const double> v, BasisTerm& t) {
  const std::size_t d = t.vars.size();
  for (std::size_t a = 0; a < d; ++a) {
    t.knots[a] = v[a];
    t.bandwidths[a] = v[d + a];
  }
  t.beta = v[2 * d];
}

/// log N(to; from + eps^2/2 * grad, eps^2 I), dropping the shared constant.
inline double log_langevin_proposal(std::span<const double> to, std::span<const double> from,
                                    std::span<const double> grad_from, double eps) {
  double s = 0.0;
  const double half = 0.5 * eps * eps;
  for (std::size_t i = 0; i < to.size(); ++i) {
    const double r = to[i] - from[i] - half * grad_from[i];
    s += r * r;
  }
  return -s / (2.0 * eps * eps);
}

// ---------------------------------------------------------------------------
// Chain

/// One Markov chain. Strictly sequential; owns its state, caches and RNG.
class Sampler {
 public:
  Sampler(const Dataset& ds, const std::vector<Marginal>& marginals, PriorConfig cfg, ChainConfig chain,
          double offset, std::uint64_t stream)
      : ds_(ds),
        marginals_(marginals),
        cfg_(std::move(cfg)),
        chain_(chain),
        rng_(chain.seed, stream),
        cache_(ds, marginals, offset),
        weights_(cfg_.input_weights(ds.p)),
        offset_(offset) {
    cfg_.validate(ds.p);
    chain_.validate();
    if (!cfg_.lambda) throw ValidationError("lambda must be resolved before sampling");
    if (ds.family == Family::gaussian) {
      state_.eta = cfg_.lambda.value();
    }
    for (std::size_t k = 0; k < std::min(chain_.initial_K, cfg_.K_max); ++k) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        auto t = draw_term_with(sample_subset(cfg_, ds_.p, rng_));
        std::vector<double> phi;
        if (basis_column(ds_, t, marginals_, phi)) {
          state_.terms.push_back(std::move(t));
          break;
        }
      }
    }
    cache_.rebuild(state_);
  }

  const ModelState& state() const { return state_; }
  const MoveStats& stats() const { return stats_; }
  const LikelihoodCache& cache() const { return cache_; }
  double loglik() const { return chain_.flat_likelihood ? 0.0 : cache_.loglik(); }
  double max_refresh_drift() const { return max_drift_; }
  Rng& rng() { return rng_; }

  /// Replaces the state (tests use this to start from a known point).
  void set_state(ModelState s) {
    state_ = std::move(s);
    cache_.rebuild(state_);
  }

  /// One full pass: K, then subset and Langevin per term, then sigma2.
  void sweep() {
    update_K();
    for (std::size_t k = 0; k < state_.terms.size(); ++k) {
      update_subset(k);
      update_langevin(k);
    }
    if (ds_.family == Family::gaussian) gibbs_sigma2();
  }

  bool update_K() {
    const std::size_t K = state_.terms.size();
    if (rng_.uniform() < birth_probability(K, cfg_.K_max)) return birth();
    return death();
  }

  bool update_subset(std::size_t k) {
    BasisTerm& term = state_.terms[k];
    const std::size_t d = term.vars.size();
    const std::size_t p = ds_.p;
    const auto probs = move_probabilities(d, p, cfg_);
    if (probs.adding + probs.deleting + probs.changing <= 0.0) return false;
    const double u = rng_.uniform();
    SubsetMove move = SubsetMove::changing;
    if (u < probs.adding) {
      move = SubsetMove::adding;
    } else if (u < probs.adding + probs.deleting) {
      move = SubsetMove::deleting;
    }

    BasisTerm cand = term;
    std::size_t j_in = p, j_out = p;
    if (move != SubsetMove::adding) {
      const std::size_t pos = rng_.index(d);
      j_out = term.vars[pos];
      erase_coordinate(cand, pos);
    }
    if (move != SubsetMove::deleting) {
      j_in = draw_outside(term.vars);
      double b, g;
      draw_coordinate(cfg_, rng_, b, g);
      insert_coordinate(cand, j_in, b, g);
    }
    MoveCounter& counter = move == SubsetMove::adding     ? stats_.adding
                           : move == SubsetMove::deleting ? stats_.deleting
                                                          : stats_.changing;

    std::vector<double> phi;
    if (!basis_column(ds_, cand, marginals_, phi)) {
      counter.record(false);
      return false;
    }
    double ll_new = 0.0;
    if (!chain_.flat_likelihood) ll_new = cache_.loglik_replacing(k, term.beta, cand.beta, phi, state_.eta, scratch_);
    const double log_ratio = (chain_.flat_likelihood ? 0.0 : ll_new - cache_.loglik()) +
                             log_subset_move_ratio(move, term.vars, j_in, j_out, cfg_, p, weights_);
    const bool ok = accept(log_ratio);
    counter.record(ok);
    if (ok) {
      if (chain_.flat_likelihood) ll_new = cache_.loglik_replacing(k, term.beta, cand.beta, phi, state_.eta, scratch_);
      term = std::move(cand);
      cache_.commit_replace(k, std::move(phi), scratch_, ll_new);
      on_accept();
    }
    return ok;
  }

  bool update_langevin(std::size_t k) {
    BasisTerm& term = state_.terms[k];
    const double eps = cfg_.step_size;
    const auto rest = residual_without(k);
    const auto cur = term_target(ds_, marginals_, term, rest, offset_, state_.eta, cfg_, chain_.flat_likelihood);
    const auto theta = pack_term(term);
    std::vector<double> prop(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) prop[i] = theta[i] + 0.5 * eps * eps * cur.grad[i] + eps * rng_.normal();
    BasisTerm cand = term;
    unpack_term(prop, cand);
    const auto next = term_target(ds_, marginals_, cand, rest, offset_, state_.eta, cfg_, chain_.flat_likelihood);
    bool ok = false;
    if (next.valid && cur.valid) {
      const double log_ratio = next.log_target - cur.log_target + log_langevin_proposal(theta, prop, next.grad, eps) -
                               log_langevin_proposal(prop, theta, cur.grad, eps);
      ok = accept(log_ratio);
    }
    stats_.langevin.record(ok);
    if (ok) {
      double ll = cache_.loglik_replacing(k, term.beta, cand.beta, next.phi, state_.eta, scratch_);
      term = std::move(cand);
      cache_.commit_replace(k, next.phi, scratch_, ll);
      on_accept();
    }
    return ok;
  }

  /// Draws sigma2 from its full conditional (gaussian models only).
  void gibbs_sigma2() {
    if (ds_.family != Family::gaussian) throw ValidationError("gibbs_sigma2 applies to gaussian models only");
    double ssr = 0.0;
    double n = 0.0;
    if (!chain_.flat_likelihood) {
      const auto f = cache_.f();
      for (std::size_t i = 0; i < ds_.n; ++i) {
        const double r = ds_.y[i] - offset_ - f[i];
        ssr += r * r;
      }
      n = static_cast<double>(ds_.n);
    }
    const double vl = cfg_.v * cfg_.lambda.value();
    double shape, scale;
    if (chain_.sigma2_update == Sigma2Update::conjugate) {
      shape = (n + cfg_.v) / 2.0;
      scale = (ssr + vl) / 2.0;
    } else {
      shape = cfg_.v / 2.0;
      scale = ((n > 0.0 ? ssr / n : 0.0) + vl) / 2.0;
    }
    state_.eta = 1.0 / rng_.gamma(shape, 1.0 / scale);
    cache_.set_eta(state_.eta);
  }

 private:
  bool accept(double log_ratio) {
    if (std::isnan(log_ratio)) return false;
    if (log_ratio >= 0.0) return true;
    return std::log(rng_.uniform()) < log_ratio;
  }

  void on_accept() {
    if (++accepted_since_refresh_ < chain_.refresh_every) return;
    accepted_since_refresh_ = 0;
    const double before = cache_.loglik();
    cache_.rebuild(state_);
    max_drift_ = std::max(max_drift_, std::abs(before - cache_.loglik()));
  }

  std::vector<double> residual_without(std::size_t k) const {
    const auto f = cache_.f();
    const auto phi = cache_.phi(k);
    const double beta = state_.terms[k].beta;
    std::vector<double> rest(ds_.n);
    for (std::size_t i = 0; i < ds_.n; ++i) rest[i] = f[i] - beta * phi[i];
    return rest;
  }

  std::size_t draw_outside(std::span<const std::size_t> vars) {
    std::vector<double> w(weights_);
    for (auto j : vars) w[j] = 0.0;
    return rng_.categorical(w);
  }

  static void erase_coordinate(BasisTerm& t, std::size_t pos) {
    const auto off = static_cast<std::ptrdiff_t>(pos);
    t.vars.erase(t.vars.begin() + off);
    t.knots.erase(t.knots.begin() + off);
    t.bandwidths.erase(t.bandwidths.begin() + off);
  }

  static void insert_coordinate(BasisTerm& t, std::size_t j, double b, double g) {
    const auto it = std::lower_bound(t.vars.begin(), t.vars.end(), j);
    const auto off = it - t.vars.begin();
    t.vars.insert(it, j);
    t.knots.insert(t.knots.begin() + off, b);
    t.bandwidths.insert(t.bandwidths.begin() + off, g);
  }

  BasisTerm draw_term_with(std::vector<std::size_t> vars) {
    BasisTerm t;
    t.vars = std::move(vars);
    t.knots.resize(t.vars.size());
    t.bandwidths.resize(t.vars.size());
    for (std::size_t a = 0; a < t.vars.size(); ++a) draw_coordinate(cfg_, rng_, t.knots[a], t.bandwidths[a]);
    t.beta = std::sqrt(cfg_.sigma_beta2) * rng_.normal();
    return t;
  }

  std::vector<const std::vector<std::size_t>*> current_sets(std::size_t skip) const {
    std::vector<const std::vector<std::size_t>*> sets;
    sets.reserve(state_.terms.size());
    for (std::size_t k = 0; k < state_.terms.size(); ++k) {
      if (k != skip) sets.push_back(&state_.terms[k].vars);
    }
    return sets;
  }

  bool birth() {
    const std::size_t K = state_.terms.size();
    const std::size_t p = ds_.p;
    std::vector<std::size_t> vars;
    if (rng_.uniform() < cfg_.M / (cfg_.M + static_cast<double>(K))) {
      vars = sample_subset(cfg_, p, rng_);
    } else {
      const auto& base = state_.terms[rng_.index(K)].vars;
      if (base.size() == p) {
        vars = sample_subset(cfg_, p, rng_);
      } else {
        vars = base;
        const std::size_t j = draw_outside(base);
        vars.insert(std::lower_bound(vars.begin(), vars.end(), j), j);
      }
    }
    BasisTerm t = draw_term_with(std::move(vars));
    std::vector<double> phi;
    if (!basis_column(ds_, t, marginals_, phi)) {
      stats_.birth.record(false);
      return false;
    }
    const double ll_new = cache_.loglik_adding(t.beta, phi, state_.eta, scratch_);
    const double log_ratio = (chain_.flat_likelihood ? 0.0 : ll_new - cache_.loglik()) +
                             log_birth_ratio(t.vars, current_sets(K), cfg_, ds_.n, p, weights_);
    const bool ok = accept(log_ratio);
    stats_.birth.record(ok);
    if (ok) {
      state_.terms.push_back(std::move(t));
      cache_.commit_add(std::move(phi), scratch_, ll_new);
      on_accept();
    }
    return ok;
  }

  bool death() {
    const std::size_t K = state_.terms.size();
    const std::size_t k = rng_.index(K);
    const auto rest = current_sets(k);
    const double ll_new = cache_.loglik_removing(k, state_.terms[k].beta, state_.eta, scratch_);
    const double log_ratio = (chain_.flat_likelihood ? 0.0 : ll_new - cache_.loglik()) -
                             log_birth_ratio(state_.terms[k].vars, rest, cfg_, ds_.n, ds_.p, weights_);
    const bool ok = accept(log_ratio);
    stats_.death.record(ok);
    if (ok) {
      state_.terms.erase(state_.terms.begin() + static_cast<std::ptrdiff_t>(k));
      cache_.commit_remove(k, scratch_, ll_new);
      on_accept();
    }
    return ok;
  }

  const Dataset& ds_;
  const std::vector<Marginal>& marginals_;
  PriorConfig cfg_;
  ChainConfig chain_;
  Rng rng_;
  LikelihoodCache cache_;
  std::vector<double> weights_;
  double offset_;
  ModelState state_;
  MoveStats stats_;
  std::vector<double> scratch_;
  std::size_t accepted_since_refresh_ = 0;
  double max_drift_ = 0.0;
};

/// Natural-parameter offset absorbing the intercept: the response mean for
/// gaussian, logit / log of the mean for bernoulli / poisson.
inline double response_offset(const Dataset& ds) {
  double mean = 0.0;
  for (double v : ds.y) mean += v;
  mean /= static_cast<double>(ds.n);
  switch (ds.family) {
    case Family::gaussian: return mean;
    case Family::bernoulli: {
      const double m = std::clamp(mean, 0.5 / static_cast<double>(ds.n), 1.0 - 0.5 / static_cast<double>(ds.n));
      return std::log(m / (1.0 - m));
    }
    case Family::poisson: return std::log(std::max(mean, 0.5 / static_cast<double>(ds.n)));
  }
  return 0.0;
}

struct TraceRow {
  std::size_t chain = 0;
  std::size_t iteration = 0;
  std::size_t K = 0;
  double loglik = 0.0;
  double sigma2 = 1.0;
  MoveStats stats;  // cumulative
};

struct ChainRun {
  PosteriorSamples samples;
  MoveStats stats;
  std::vector<TraceRow> trace;
  double max_refresh_drift = 0.0;
};

/// Metadata shared by every chain fitted on `ds`.
inline SamplesMeta make_meta(const Dataset& ds, const ChainConfig& chain) {
  SamplesMeta meta;
  meta.seed = chain.seed;
  meta.n_chains = chain.n_chains;
  meta.burn_in = chain.burn_in;
  meta.iterations = chain.iterations;
  meta.thin = chain.thin;
  meta.n = ds.n;
  meta.p = ds.p;
  meta.data_hash = ds.fingerprint();
  meta.family = ds.family;
  meta.marginal_kind = chain.marginal_kind;
  meta.offset = response_offset(ds);
  meta.columns = ds.columns;
  meta.transforms = stored_transforms(ds);
  meta.marginals = ds.marginals(chain.marginal_kind);
  return meta;
}

/// Runs chain `chain_index` of the configuration. `prior` must have lambda
/// resolved (see resolve_lambda).
inline ChainRun run_single_chain(const Dataset& ds, const PriorConfig& prior, const ChainConfig& chain,
                                 std::size_t chain_index, const SamplesMeta& meta) {
  ChainRun run;
  run.samples.meta = meta;
  Sampler sampler(ds, meta.marginals, prior, chain, meta.offset, chain_index);
  const std::size_t total = chain.burn_in + chain.iterations;
  for (std::size_t it = 0; it < total; ++it) {
    sampler.sweep();
    if (it < chain.burn_in) continue;
    const std::size_t post = it - chain.burn_in;
    run.trace.push_back({chain_index, post, sampler.state().size(), sampler.loglik(), sampler.state().eta,
                         sampler.stats()});
    if (post % chain.thin == 0) {
      run.samples.states.push_back(sampler.state());
      run.samples.chain.push_back(chain_index);
    }
  }
  run.stats = sampler.stats();
  run.max_refresh_drift = sampler.max_refresh_drift();
  return run;
}

/// Runs every chain (in parallel threads) and concatenates the draws in
/// chain order.
inline ChainRun run_chain(const Dataset& ds, const PriorConfig& prior_cfg, const ChainConfig& chain) {
  chain.validate();
  prior_cfg.validate(ds.p);
  const PriorConfig prior = resolve_lambda(prior_cfg, ds);
  const SamplesMeta meta = make_meta(ds, chain);
  std::vector<ChainRun> runs(chain.n_chains);
  std::vector<std::exception_ptr> errors(chain.n_chains);
  {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < chain.n_chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          runs[c] = run_single_chain(ds, prior, chain, c, meta);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ChainRun out;
  out.samples.meta = meta;
  for (auto& r : runs) {
    out.samples.states.insert(out.samples.states.end(), r.samples.states.begin(), r.samples.states.end());
    out.samples.chain.insert(out.samples.chain.end(), r.samples.chain.begin(), r.samples.chain.end());
    out.trace.insert(out.trace.end(), r.trace.begin(), r.trace.end());
    out.stats += r.stats;
    out.max_refresh_drift = std::max(out.max_refresh_drift, r.max_refresh_drift);
  }
  return out;
}

}  // namespace btpnn
