// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Tolerances are fixed here, not tuned per run.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "btpnn/cli.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace btpnn;

namespace tol {
constexpr double sum_to_zero = 1e-10;
constexpr double gradient_rel = 1e-5;
constexpr double prior_tv = 0.05;
constexpr double prior_ks = 0.02;
constexpr double gibbs_se = 3.0;
constexpr double ratio_rel = 1e-10;
constexpr double selection_auroc = 0.9;
constexpr double rmse_over_sigma = 1.25;
constexpr double ece = 0.05;
constexpr double crps_abs = 1e-2;
}  // namespace tol

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// 1. Every factor averages to zero over the data it was centered on.
Outcome sum_to_zero() {
  const auto ds = btpnn::testing::random_dataset(500, 3, Family::gaussian, 101);
  const auto marg = ds.marginals(MarginalKind::empirical);
  Rng rng(1);
  double worst = 0.0;
  for (int r = 0; r < 1000; ++r) {
    const std::size_t j = rng.index(ds.p);
    const double b = rng.uniform();
    const double g = 0.005 + 0.5 * rng.uniform();
    const double c = c_correction(marg[j], b, g);
    double s = 0.0;
    for (double x : ds.col(j)) s += eval_factor(x, b, g, c);
    worst = std::max(worst, std::abs(s / static_cast<double>(ds.n)));
  }
  return {worst < tol::sum_to_zero, "max |mean factor| = " + num(worst) + " over 1000 (j, b, gamma)"};
}

// 2. Langevin gradients against central differences of a from-scratch target.
Outcome gradients() {
  Rng rng(2);
  double worst = 0.0;
  for (auto fam : {Family::gaussian, Family::bernoulli, Family::poisson}) {
    const auto ds = btpnn::testing::random_dataset(60, 3, fam, 102);
    const auto marg = ds.marginals(MarginalKind::empirical);
    const double offset = response_offset(ds);
    PriorConfig cfg;
    cfg.lambda = 0.5;
    cfg.q_lambda.reset();
    for (int r = 0; r < 100; ++r) {
      std::vector<std::size_t> vars;
      for (std::size_t j = 0; j < 3; ++j) {
        if (rng.uniform() < 0.5) vars.push_back(j);
      }
      if (vars.empty()) vars.push_back(rng.index(3));
      const auto term = btpnn::testing::random_term(vars, rng);
      std::vector<double> rest(ds.n);
      for (double& v : rest) v = 0.3 * rng.normal();
      const double eta = fam == Family::gaussian ? 0.2 + rng.uniform() : 1.0;
      const auto tt = term_target(ds, marg, term, rest, offset, eta, cfg, false);
      if (!tt.valid) return {false, "invalid target at a valid term"};
      const auto theta = pack_term(term);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
        auto up = theta, dn = theta;
        up[i] += h;
        dn[i] -= h;
        BasisTerm tu = term, td = term;
        unpack_term(up, tu);
        unpack_term(dn, td);
        const double fd = (oracle::term_log_target(ds, marg, tu, rest, offset, eta, cfg) -
                           oracle::term_log_target(ds, marg, td, rest, offset, eta, cfg)) /
                          (2 * h);
        worst = std::max(worst, std::abs(fd - tt.grad[i]) / std::max({1.0, std::abs(fd), std::abs(tt.grad[i])}));
      }
    }
  }
  return {worst < tol::gradient_rel, "max relative error = " + num(worst) + " over 300 terms, 3 families"};
}

double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  return d;
}

// 3. With the likelihood switched off the chain must sample the prior.
Outcome prior_recovery() {
  const auto ds = btpnn::testing::random_dataset(10, 3, Family::gaussian, 103);
  PriorConfig cfg;
  cfg.lambda = 1.0;
  cfg.q_lambda.reset();
  cfg.K_max = 5;
  cfg.C0 = 0.3;
  cfg.step_size = 0.05;
  ChainConfig chain;
  chain.burn_in = 1000;
  chain.iterations = 100000;
  chain.thin = 1;
  chain.seed = 3;
  chain.flat_likelihood = true;
  chain.marginal_kind = MarginalKind::uniform;
  const auto run = run_chain(ds, cfg, chain);

  std::vector<double> k_freq(cfg.K_max + 1, 0.0), d_freq(ds.p, 0.0);
  std::vector<double> betas, bands;
  double terms = 0.0;
  for (std::size_t s = 0; s < run.samples.size(); ++s) {
    const auto& st = run.samples.states[s];
    k_freq[st.size()] += 1.0;
    for (const auto& t : st.terms) {
      d_freq[t.vars.size() - 1] += 1.0;
      terms += 1.0;
      if (s % 5 == 0) {
        betas.push_back(t.beta);
        bands.push_back(t.bandwidths[0]);
      }
    }
  }
  double tv_k = 0.0;
  for (std::size_t k = 0; k <= cfg.K_max; ++k) {
    tv_k += std::abs(k_freq[k] / static_cast<double>(run.samples.size()) - oracle::prior_K(k, cfg.K_max, cfg.C0, ds.n));
  }
  tv_k *= 0.5;
  double tv_d = 0.0;
  for (std::size_t d = 1; d <= ds.p; ++d) {
    const double prior = oracle::prior_subset(d, ds.p, cfg.alpha_adding, cfg.gamma_adding) * oracle::choose(ds.p, d);
    tv_d += std::abs(d_freq[d - 1] / terms - prior);
  }
  tv_d *= 0.5;
  const boost::math::normal_distribution<double> beta_prior(0.0, std::sqrt(cfg.sigma_beta2));
  const boost::math::gamma_distribution<double> band_prior(cfg.a_gamma, cfg.b_gamma);
  const double ks_beta = ks_statistic(betas, [&](double x) { return boost::math::cdf(beta_prior, x); });
  const double ks_band = ks_statistic(bands, [&](double x) { return boost::math::cdf(band_prior, x); });
  const bool ok = tv_k <= tol::prior_tv && tv_d <= tol::prior_tv && ks_beta <= tol::prior_ks && ks_band <= tol::prior_ks;
  return {ok, "TV(K) = " + num(tv_k) + ", TV(|S|) = " + num(tv_d) + ", KS(beta) = " + num(ks_beta) +
                  ", KS(gamma) = " + num(ks_band)};
}

// 4. Gibbs sigma2 draws against the inverse-gamma full conditional.
Outcome gibbs_moments() {
  const auto ds = btpnn::testing::random_dataset(200, 2, Family::gaussian, 104);
  const auto marg = ds.marginals(MarginalKind::empirical);
  PriorConfig cfg;
  cfg.lambda = 0.3;
  cfg.q_lambda.reset();
  ChainConfig chain;
  chain.seed = 4;
  const double offset = response_offset(ds);
  Sampler sampler(ds, marg, cfg, chain, offset, 0);
  ModelState st;
  st.eta = 1.0;
  st.terms.push_back({{0}, {0.5}, {0.1}, 0.5});
  st.terms.push_back({{0, 1}, {0.3, 0.7}, {0.2, 0.05}, -0.2});
  sampler.set_state(st);
  const auto f = model_values(st, ds, marg);
  double ssr = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) ssr += std::pow(ds.y[i] - offset - f[i], 2);
  const double a = (static_cast<double>(ds.n) + cfg.v) / 2.0;
  const double b = (ssr + cfg.v * *cfg.lambda) / 2.0;
  const double mean = b / (a - 1.0);
  const double var = b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0));

  const int n = 100000;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) {
    sampler.gibbs_sigma2();
    x[i] = sampler.state().eta;
  }
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  // Second central moment about the known mean, and its standard error
  // from the draws themselves.
  double s2 = 0.0, s4 = 0.0;
  for (double v : x) {
    const double d2 = (v - mean) * (v - mean);
    s2 += d2;
    s4 += d2 * d2;
  }
  s2 /= n;
  s4 /= n;
  const double z_mean = std::abs(m - mean) / std::sqrt(var / n);
  const double z_var = std::abs(s2 - var) / std::sqrt((s4 - s2 * s2) / n);
  return {z_mean <= tol::gibbs_se && z_var <= tol::gibbs_se,
          "mean off by " + num(z_mean) + " SE, variance off by " + num(z_var) + " SE (100000 draws)"};
}

// 5. Closed-form acceptance ratios against branch-by-branch enumeration.
Outcome ratio_oracle() {
  const std::size_t p = 4;
  Rng rng(5);
  double worst = 0.0;
  int checked = 0;
  while (checked < 500) {
    PriorConfig c;
    c.lambda = 1.0;
    c.q_lambda.reset();
    c.K_max = 8;
    c.C0 = 0.2 * rng.uniform();
    c.M = 0.5 + 5.0 * rng.uniform();
    c.alpha_adding = 0.1 + 0.85 * rng.uniform();
    c.gamma_adding = 0.2 + 3.0 * rng.uniform();
    c.omega = {0.2 + rng.uniform(), 0.2 + rng.uniform(), 0.2 + rng.uniform(), 0.2 + rng.uniform()};
    const auto w = c.input_weights(p);
    auto random_set = [&] {
      std::vector<std::size_t> s;
      for (std::size_t j = 0; j < p; ++j) {
        if (rng.uniform() < 0.5) s.push_back(j);
      }
      if (s.empty()) s.push_back(rng.index(p));
      return s;
    };
    const auto from = random_set();
    std::vector<std::size_t> outside;
    for (std::size_t j = 0; j < p; ++j) {
      if (!oracle::contains(from, j)) outside.push_back(j);
    }
    const auto probs = move_probabilities(from.size(), p, c);
    const double u = rng.uniform();
    double mine = 0.0, ref = 0.0;
    if (u < 0.25) {
      // Birth against a random population of sets, some of them full.
      std::vector<std::vector<std::size_t>> sets;
      const std::size_t K = rng.index(c.K_max);
      for (std::size_t k = 0; k < K; ++k) sets.push_back(rng.uniform() < 0.2 ? std::vector<std::size_t>{0, 1, 2, 3} : random_set());
      std::vector<const std::vector<std::size_t>*> ptrs;
      for (const auto& s : sets) ptrs.push_back(&s);
      mine = log_birth_ratio(from, ptrs, c, 500, p, w);
      ref = oracle::log_birth_ratio(from, sets, c, 500, p, c.omega);
    } else if (u < 0.5 && probs.adding > 0.0) {
      const std::size_t j = outside[rng.index(outside.size())];
      mine = log_subset_move_ratio(SubsetMove::adding, from, j, p, c, p, w);
      ref = oracle::log_subset_ratio(from, oracle::with(from, j), c, p, c.omega);
    } else if (u < 0.75 && probs.deleting > 0.0) {
      const std::size_t j = from[rng.index(from.size())];
      mine = log_subset_move_ratio(SubsetMove::deleting, from, p, j, c, p, w);
      ref = oracle::log_subset_ratio(from, oracle::without(from, j), c, p, c.omega);
    } else if (u >= 0.75 && probs.changing > 0.0) {
      const std::size_t j_in = outside[rng.index(outside.size())];
      const std::size_t j_out = from[rng.index(from.size())];
      mine = log_subset_move_ratio(SubsetMove::changing, from, j_in, j_out, c, p, w);
      ref = oracle::log_subset_ratio(from, oracle::with(oracle::without(from, j_out), j_in), c, p, c.omega);
    } else {
      continue;
    }
    // Relative error of the ratio itself.
    worst = std::max(worst, std::abs(std::expm1(mine - ref)));
    ++checked;
  }
  return {worst < tol::ratio_rel, "max relative error = " + num(worst) + " over 500 proposals"};
}

ChainConfig benchmark_chain(std::uint64_t seed, std::size_t chains) {
  ChainConfig chain;
  chain.burn_in = 2000;
  chain.iterations = 2000;
  chain.thin = 4;
  chain.seed = seed;
  chain.n_chains = chains;
  return chain;
}

// 6. Component selection on f2.
Outcome selection_f2() {
  SyntheticSpec spec;
  spec.function = SyntheticFunction::f2;
  spec.n = 2000;
  spec.p = 10;
  spec.seed = 6;
  const auto synth = generate(spec);
  const auto run = run_chain(synth.data, PriorConfig{}, benchmark_chain(6, 2));
  const auto imp = importance_scores(run.samples, synth.data);
  const double a1 = component_selection_auroc(imp, synth.truth, 1, spec.p);
  const double a2 = component_selection_auroc(imp, synth.truth, 2, spec.p);
  const auto it = imp.find(VarSet{2, 4, 5});
  const double triple = it == imp.end() ? 0.0 : it->second;
  return {a1 >= tol::selection_auroc && a2 >= tol::selection_auroc && triple > 0.0,
          "AUROC order 1 = " + num(a1) + ", order 2 = " + num(a2) + ", importance {3,5,6} = " + num(triple)};
}

// 7. Predictive accuracy on f1.
Outcome accuracy_f1() {
  SyntheticSpec spec;
  spec.function = SyntheticFunction::f1;
  spec.n = 2000;
  spec.seed = 7;
  const auto synth = generate(spec);
  const auto split = train_test_split(synth.data, 0.2, 7);
  const auto run = run_chain(split.train, PriorConfig{}, benchmark_chain(7, 1));
  const double err = rmse(predictive_points(run.samples, split.test), split.test.y);
  const double sigma = std::sqrt(synth.noise_variance);
  return {err <= tol::rmse_over_sigma * sigma,
          "test RMSE = " + num(err) + ", noise sd = " + num(sigma) + ", ratio = " + num(err / sigma)};
}

// 8. Calibration on a logistic signal.
Outcome calibration_bernoulli() {
  SyntheticSpec spec;
  spec.function = SyntheticFunction::bernoulli_linear;
  spec.n = 5000;
  spec.seed = 8;
  const auto synth = generate(spec);
  const auto split = train_test_split(synth.data, 0.2, 8);
  const auto run = run_chain(split.train, PriorConfig{}, benchmark_chain(8, 1));
  const auto probs = predictive_points(run.samples, split.test);
  // P(y=1) + P(y=0) from the predictive density must be exactly one.
  auto ones = split.test, zeros = split.test;
  std::fill(ones.y.begin(), ones.y.end(), 1.0);
  std::fill(zeros.y.begin(), zeros.y.end(), 0.0);
  const auto d1 = predictive_densities(run.samples, ones);
  const auto d0 = predictive_densities(run.samples, zeros);
  double norm_err = 0.0;
  for (std::size_t i = 0; i < d1.size(); ++i) {
    norm_err = std::max(norm_err, std::abs(d1[i] + d0[i] - 1.0));
    norm_err = std::max(norm_err, std::abs(d1[i] - probs[i]));
  }
  std::vector<int> labels(split.test.n);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(split.test.y[i]);
  const double e = ece(probs, labels, 15);
  return {e <= tol::ece && norm_err < 1e-12, "ECE(15 bins) = " + num(e) + ", normalization error = " + num(norm_err)};
}

// 9. Sample CRPS of a standard normal predictive at y = 0.
Outcome crps_standard_normal() {
  PosteriorSamples s;
  s.meta.p = 1;
  s.meta.family = Family::gaussian;
  s.meta.marginals = {Marginal::uniform()};
  ModelState st;
  st.eta = 1.0;
  s.states = {st, st};
  s.chain = {0, 0};
  Rng rng(9);
  const std::vector<double> row{0.5};
  const double got = crps(s, row, 0.0, rng, 10000);
  const double closed = 2.0 / std::sqrt(2.0 * kPi) - 1.0 / std::sqrt(kPi);
  return {std::abs(got - closed) < tol::crps_abs, "CRPS = " + num(got) + " vs closed form " + num(closed)};
}

// 10. Two fits with the same seed write identical files.
Outcome determinism() {
  btpnn::testing::TempDir dir("acceptance_det");
  const auto ds = btpnn::testing::random_dataset(80, 3, Family::gaussian, 110);
  write_csv(dir.file("data.csv"), ds, "y");
  FitConfig cfg;
  cfg.chain.burn_in = 50;
  cfg.chain.iterations = 100;
  cfg.chain.n_chains = 2;
  cfg.chain.seed = 10;
  btpnn::testing::write_file(dir.file("cfg.json"), fit_config_to_json(cfg).dump(2));
  cli::FitOptions a{dir.file("cfg.json"), dir.file("data.csv"), dir.file("a"), std::nullopt, std::nullopt, "", ""};
  cli::FitOptions b = a;
  b.out_dir = dir.file("b");
  cli::cmd_fit(a);
  cli::cmd_fit(b);
  bool same = true;
  for (const char* f : {"samples.jsonl", "trace.csv"}) {
    same = same && btpnn::testing::slurp(dir.file(std::string("a/") + f)) == btpnn::testing::slurp(dir.file(std::string("b/") + f));
  }
  const auto ma = json::parse(btpnn::testing::slurp(dir.file("a/manifest.json")));
  const auto mb = json::parse(btpnn::testing::slurp(dir.file("b/manifest.json")));
  same = same && ma["samples_hash"] == mb["samples_hash"];
  return {same, same ? "samples.jsonl and trace.csv byte-identical" : "outputs differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sum-to-zero", sum_to_zero},
      {"gradients", gradients},
      {"prior-recovery", prior_recovery},
      {"gibbs-sigma2", gibbs_moments},
      {"ratio-oracle", ratio_oracle},
      {"selection-f2", selection_f2},
      {"accuracy-f1", accuracy_f1},
      {"calibration-bernoulli", calibration_bernoulli},
      {"crps-normal", crps_standard_normal},
      {"determinism", determinism},
  };
  // Optional filter: run only the named criteria.
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, check] = criteria[i];
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << (i + 1) << ' ' << name << ": " << o.detail << " [" << num(secs)
              << "s]" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
