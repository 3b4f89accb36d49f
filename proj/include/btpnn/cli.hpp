#pragma once

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btpnn/bench.hpp"
#include "btpnn/inference.hpp"
#include "btpnn/io.hpp"
#include "btpnn/mcmc.hpp"

namespace btpnn::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest representation that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + path + "'");
  return out;
}

inline json versions() {
  return {{"btpnn", kVersion},
          {"rng", Rng::kName},
          {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
#if defined(__VERSION__)
          {"compiler", __VERSION__}
#else
          {"compiler", "unknown"}
#endif
  };
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot read '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

/// Run manifest written next to every file output.
struct Manifest {
  json body = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  explicit Manifest(const std::string& command) {
    body["command"] = command;
    body["versions"] = versions();
  }

  void write(const std::string& path, const json& outputs) {
    body["outputs"] = outputs;
    body["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto out = open_output(path);
    out << body.dump(2) << '\n';
  }
};

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
  std::string omega_path;
  std::string manifest_path;  // rerun from a previous manifest
};

struct FitResult {
  std::string samples_path;
  std::string trace_path;
  std::string manifest_path;
  std::size_t n_samples = 0;
  MoveStats stats;
};

inline FitResult cmd_fit(const FitOptions& opts) {
  Manifest manifest("fit");
  FitConfig cfg;
  std::string config_path = opts.config_path;
  std::string data_path = opts.data_path;
  std::string omega_path = opts.omega_path;
  std::optional<std::string> expected_hash;
  if (!opts.manifest_path.empty()) {
    json m;
    try {
      m = json::parse(read_text(opts.manifest_path));
      if (m.at("command").get<std::string>() != "fit") {
        throw ValidationError(opts.manifest_path + ": not a fit manifest");
      }
      cfg = parse_fit_config(m.at("config_resolved").dump(), opts.manifest_path);
      config_path = m.at("config").get<std::string>();
      if (data_path.empty()) data_path = m.at("data").get<std::string>();
      expected_hash = m.at("dataset_fingerprint").get<std::string>();
    } catch (const json::exception& e) {
      throw ValidationError(opts.manifest_path + ": " + e.what());
    }
  } else {
    if (config_path.empty()) throw ValidationError("fit needs --config or --manifest");
    cfg = load_fit_config(config_path);
    if (omega_path.empty()) omega_path = cfg.omega_path;
  }
  if (data_path.empty()) throw ValidationError("fit needs --data");
  if (opts.seed) cfg.chain.seed = *opts.seed;
  if (opts.chains) cfg.chain.n_chains = *opts.chains;
  cfg.chain.validate();

  Dataset ds = load_csv(data_path, cfg.target, cfg.family);
  const std::string fingerprint = hex64(ds.fingerprint());
  if (expected_hash && *expected_hash != fingerprint) {
    throw ValidationError("dataset '" + data_path + "' does not match the manifest fingerprint");
  }
  if (!omega_path.empty()) {
    cfg.prior.omega = load_omega_csv(omega_path, ds.p);
    cfg.omega_path.clear();
  }
  cfg.prior.validate(ds.p);
  // Record the lambda actually used so a manifest rerun does not depend on
  // the OLS step.
  cfg.prior = resolve_lambda(cfg.prior, ds);

  auto run = run_chain(ds, cfg.prior, cfg.chain);
  run.samples.meta.target = cfg.target;

  fs::create_directories(opts.out_dir);
  FitResult res;
  res.samples_path = (fs::path(opts.out_dir) / "samples.jsonl").string();
  res.trace_path = (fs::path(opts.out_dir) / "trace.csv").string();
  res.manifest_path = (fs::path(opts.out_dir) / "manifest.json").string();
  write_samples(res.samples_path, run.samples);
  write_trace(res.trace_path, run.trace);
  res.n_samples = run.samples.size();
  res.stats = run.stats;

  manifest.body["config"] = config_path;
  manifest.body["config_resolved"] = fit_config_to_json(cfg);
  manifest.body["data"] = data_path;
  manifest.body["dataset_fingerprint"] = fingerprint;
  manifest.body["seed"] = cfg.chain.seed;
  manifest.body["chains"] = cfg.chain.n_chains;
  manifest.body["samples_hash"] = file_hash(res.samples_path);
  manifest.write(res.manifest_path, {{"samples", res.samples_path}, {"trace", res.trace_path}});
  return res;
}

// ---------------------------------------------------------------------------
// predict / importance / components

namespace detail {

inline Dataset rows_for(const PosteriorSamples& samples, const std::string& data_path) {
  return load_csv_with_schema(data_path, samples.meta.columns, samples.meta.transforms, samples.meta.family,
                              samples.meta.target)
      .data;
}

inline Manifest samples_manifest(const std::string& command, const std::string& samples_path,
                                 const std::string& data_path, const PosteriorSamples& samples, const Dataset& rows) {
  Manifest m(command);
  m.body["config"] = nullptr;
  m.body["samples"] = samples_path;
  m.body["data"] = data_path;
  m.body["dataset_fingerprint"] = hex64(rows.fingerprint());
  m.body["seed"] = samples.meta.seed;
  return m;
}

/// Dataset from raw rows (column-major) laid out like the samples' schema.
inline Dataset rows_from_raw(const SamplesMeta& meta, std::vector<double> raw, std::size_t n) {
  Dataset ds;
  ds.n = n;
  ds.p = meta.p;
  ds.raw = std::move(raw);
  ds.y.assign(n, 0.0);
  ds.family = meta.family;
  ds.columns = meta.columns;
  ds.transforms = meta.transforms;
  apply_transforms(ds);
  return ds;
}

/// Raw grid values for column j: 101 (1-D) or 41 (2-D) evenly spaced points
/// over the training range, or {0, 1} for one-hot columns.
inline std::vector<double> grid_values(const SamplesMeta& meta, std::size_t j, std::size_t points) {
  if (meta.columns[j].origin == ColumnOrigin::one_hot) return {0.0, 1.0};
  const auto& ref = meta.transforms[j].reference();
  const double lo = ref.front(), hi = ref.back();
  if (lo == hi) return {lo};
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) {
    g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return g;
}

}  // namespace detail

struct PredictOptions {
  std::string samples_path;
  std::string data_path;
  std::string out_path;
};

inline void cmd_predict(const PredictOptions& opts) {
  const auto samples = read_samples(opts.samples_path);
  if (samples.empty()) throw ValidationError("samples file '" + opts.samples_path + "' holds no draws");
  const Dataset rows = detail::rows_for(samples, opts.data_path);
  auto manifest = detail::samples_manifest("predict", opts.samples_path, opts.data_path, samples, rows);
  const Family family = samples.meta.family;
  const auto f = posterior_values(samples, rows);
  auto out = open_output(opts.out_path);
  out << "row,prediction";
  if (family == Family::gaussian) out << ",lower_2.5,upper_97.5";
  if (family == Family::bernoulli) out << ",probability";
  out << '\n';
  std::vector<double> means(f.size()), vars(f.size());
  for (std::size_t i = 0; i < rows.n; ++i) {
    double mean = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) {
      means[s] = samples.meta.offset + f[s][i];
      vars[s] = samples.states[s].eta;
      mean += mean_response(family, means[s]);
    }
    mean /= static_cast<double>(f.size());
    out << (i + 1) << ',';
    switch (family) {
      case Family::gaussian:
        out << fmt(mean) << ',' << fmt(gaussian_mixture_quantile(means, vars, 0.025)) << ','
            << fmt(gaussian_mixture_quantile(means, vars, 0.975));
        break;
      case Family::bernoulli: out << (mean >= 0.5 ? 1 : 0) << ',' << fmt(mean); break;
      case Family::poisson: out << fmt(mean); break;
    }
    out << '\n';
  }
  out.close();
  manifest.write(opts.out_path + ".manifest.json", {{"predictions", opts.out_path}});
}

struct ImportanceOptionsCli {
  std::string samples_path;
  std::string data_path;
  std::string out_path;  // empty: stdout
  std::size_t top = 0;   // 0: all
  bool normalize = false;
};

/// Importance table sorted by decreasing score (ties by set).
inline std::vector<std::pair<VarSet, double>> ranked_importance(const PosteriorSamples& samples, const Dataset& rows,
                                                                bool normalize) {
  ImportanceOptions o;
  o.normalize = normalize;
  const auto scores = importance_scores(samples, rows, o);
  std::vector<std::pair<VarSet, double>> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

inline void cmd_importance(const ImportanceOptionsCli& opts, std::ostream& stdout_stream) {
  const auto samples = read_samples(opts.samples_path);
  const Dataset rows = detail::rows_for(samples, opts.data_path);
  auto ranked = ranked_importance(samples, rows, opts.normalize);
  if (opts.top > 0 && ranked.size() > opts.top) ranked.resize(opts.top);
  std::ostringstream table;
  table << "rank,set,order,score\n";
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    table << (r + 1) << ',' << format_var_set(ranked[r].first) << ',' << ranked[r].first.size() << ','
          << fmt(ranked[r].second) << '\n';
  }
  if (opts.out_path.empty()) {
    stdout_stream << table.str();
    return;
  }
  auto manifest = detail::samples_manifest("importance", opts.samples_path, opts.data_path, samples, rows);
  {
    auto out = open_output(opts.out_path);
    out << table.str();
  }
  manifest.write(opts.out_path + ".manifest.json", {{"importance", opts.out_path}});
}

struct ComponentsOptions {
  std::string samples_path;
  std::string data_path;
  std::string set;
  std::string out_path;  // empty: stdout
};

inline void cmd_components(const ComponentsOptions& opts, std::ostream& stdout_stream) {
  const auto samples = read_samples(opts.samples_path);
  const Dataset data = detail::rows_for(samples, opts.data_path);
  const VarSet set = parse_var_set(opts.set, samples.meta.p);
  const auto& meta = samples.meta;

  Dataset rows;
  if (set.size() <= 2) {
    const std::size_t points = set.size() == 1 ? 101 : 41;
    std::vector<std::vector<double>> axes;
    for (auto j : set) axes.push_back(detail::grid_values(meta, j, points));
    const std::size_t n = set.size() == 1 ? axes[0].size() : axes[0].size() * axes[1].size();
    // Coordinates outside the set do not enter f_S; fill them with the
    // first training row.
    std::vector<double> raw(n * meta.p);
    for (std::size_t j = 0; j < meta.p; ++j) {
      for (std::size_t i = 0; i < n; ++i) raw[j * n + i] = data.raw[j * data.n];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (set.size() == 1) {
        raw[set[0] * n + i] = axes[0][i];
      } else {
        raw[set[0] * n + i] = axes[0][i / axes[1].size()];
        raw[set[1] * n + i] = axes[1][i % axes[1].size()];
      }
    }
    rows = detail::rows_from_raw(meta, std::move(raw), n);
  } else {
    rows = data;
  }
  const auto band = component_estimate(samples, set, rows);

  std::ostringstream table;
  for (auto j : set) table << csv_field(meta.columns[j].name) << ',';
  table << "estimate,lower_2.5,upper_97.5\n";
  for (std::size_t i = 0; i < rows.n; ++i) {
    for (auto j : set) table << fmt(rows.raw[j * rows.n + i]) << ',';
    table << fmt(band.mean[i]) << ',' << fmt(band.lo[i]) << ',' << fmt(band.hi[i]) << '\n';
  }
  if (opts.out_path.empty()) {
    stdout_stream << table.str();
    return;
  }
  auto manifest = detail::samples_manifest("components", opts.samples_path, opts.data_path, samples, data);
  manifest.body["set"] = format_var_set(set, ',');
  {
    auto out = open_output(opts.out_path);
    out << table.str();
  }
  manifest.write(opts.out_path + ".manifest.json", {{"components", opts.out_path}});
}

// ---------------------------------------------------------------------------
// bench

struct BenchSpec {
  SyntheticSpec synthetic;
  double test_fraction = 0.2;
  FitConfig fit;
};

/// Default fit settings for synthetic benchmarks.
inline FitConfig default_bench_fit() {
  FitConfig c;
  c.chain.burn_in = 1000;
  c.chain.iterations = 1000;
  c.chain.n_chains = 1;
  return c;
}

inline BenchSpec parse_bench_spec(const std::string& text, const std::string& label) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(label + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError(label + ": spec must be a JSON object");
  static const std::set<std::string> keys{"function_id", "n", "p", "snr", "seed", "test_fraction", "fit"};
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ValidationError(label + ": unknown key '" + key + "'");
  }
  BenchSpec b;
  try {
    if (!j.contains("function_id")) throw ValidationError(label + ": missing required key 'function_id'");
    b.synthetic.function = synthetic_function_from_string(j.at("function_id").get<std::string>());
    if (j.contains("n")) b.synthetic.n = j.at("n").get<std::size_t>();
    if (j.contains("p")) b.synthetic.p = j.at("p").get<std::size_t>();
    if (j.contains("snr")) b.synthetic.snr = j.at("snr").get<double>();
    if (j.contains("seed")) b.synthetic.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("test_fraction")) b.test_fraction = j.at("test_fraction").get<double>();
    json fit = fit_config_to_json(default_bench_fit());
    if (j.contains("fit")) {
      if (!j.at("fit").is_object()) throw ValidationError(label + ": 'fit' must be an object");
      if (j.at("fit").contains("lambda")) fit.erase("q_lambda");
      fit.update(j.at("fit"));
    }
    fit["family"] = to_string(synthetic_family(b.synthetic.function));
    if (!j.contains("fit") || !j.at("fit").contains("seed")) fit["seed"] = b.synthetic.seed;
    b.fit = parse_fit_config(fit.dump(), label + " (fit)");
  } catch (const json::exception& e) {
    throw ValidationError(label + ": " + e.what());
  }
  b.synthetic.validate();
  return b;
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Generates data, fits on a training split and scores the fit.
inline json run_bench(const BenchSpec& spec, const SyntheticData& synth) {
  const Split split = train_test_split(synth.data, spec.test_fraction, spec.synthetic.seed);
  spec.fit.prior.validate(split.train.p);
  auto run = run_chain(split.train, spec.fit.prior, spec.fit.chain);
  const auto& samples = run.samples;
  const Family family = samples.meta.family;

  const auto pred = predictive_points(samples, split.test);
  json metrics;
  metrics["rmse"] = rmse(pred, split.test.y);
  metrics["nll"] = nll(samples, split.test);
  metrics["crps"] =
      family == Family::gaussian ? json(mean_crps(samples, split.test, spec.synthetic.seed)) : json(nullptr);
  if (family == Family::bernoulli) {
    std::vector<int> labels(split.test.n);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(split.test.y[i]);
    metrics["ece"] = ece(pred, labels, 15);
    metrics["auroc"] = auroc(pred, labels);
  }

  const auto importance = importance_scores(samples, split.train);
  json selection;
  for (std::size_t d = 1; d <= 3; ++d) {
    bool any = false;
    for (const auto& [s, r] : synth.truth) any = any || (s.size() == d && r == 1);
    selection[std::to_string(d)] =
        any ? json(component_selection_auroc(importance, synth.truth, d, spec.synthetic.p)) : json(nullptr);
  }

  json acceptance;
  auto rate = [](const MoveCounter& c) { return c.rate(); };
  acceptance["birth"] = rate(run.stats.birth);
  acceptance["death"] = rate(run.stats.death);
  acceptance["adding"] = rate(run.stats.adding);
  acceptance["deleting"] = rate(run.stats.deleting);
  acceptance["changing"] = rate(run.stats.changing);
  acceptance["langevin"] = rate(run.stats.langevin);

  double mean_K = 0.0;
  for (const auto& s : samples.states) mean_K += static_cast<double>(s.size());
  mean_K /= static_cast<double>(samples.size());

  json report;
  report["function_id"] = to_string(spec.synthetic.function);
  report["family"] = to_string(family);
  report["n"] = spec.synthetic.n;
  report["p"] = spec.synthetic.p;
  report["snr"] = spec.synthetic.snr;
  report["seed"] = spec.synthetic.seed;
  report["n_train"] = split.train.n;
  report["n_test"] = split.test.n;
  report["noise_variance"] = family == Family::gaussian ? json(synth.noise_variance) : json(nullptr);
  report["n_samples"] = samples.size();
  report["mean_K"] = mean_K;
  report["metrics"] = metrics;
  report["component_selection_auroc"] = selection;
  report["acceptance"] = acceptance;
  return report;
}

/// CSV of the generated data plus a sidecar JSON of the signal sets.
inline void export_synthetic(const SyntheticData& synth, const std::string& csv_path) {
  write_csv(csv_path, synth.data, "y");
  json sets = json::array();
  for (const auto& [s, r] : synth.truth) {
    if (!r) continue;
    json one = json::array();
    for (auto j : s) one.push_back(j + 1);
    sets.push_back(one);
  }
  auto out = open_output(csv_path + ".truth.json");
  out << json{{"signal_sets", sets}, {"noise_variance", synth.noise_variance}}.dump(2) << '\n';
}

struct BenchOptions {
  std::string spec_path;
  std::string out_path;
  std::string data_out;  // optional CSV export of the generated data
};

inline void cmd_bench(const BenchOptions& opts) {
  Manifest manifest("bench");
  const auto spec = parse_bench_spec(read_text(opts.spec_path), opts.spec_path);
  const auto synth = generate(spec.synthetic);
  const json report = run_bench(spec, synth);
  {
    auto out = open_output(opts.out_path);
    out << report.dump(2) << '\n';
  }
  json outputs = {{"report", opts.out_path}};
  if (!opts.data_out.empty()) {
    export_synthetic(synth, opts.data_out);
    outputs["data"] = opts.data_out;
  }
  manifest.body["config"] = opts.spec_path;
  manifest.body["dataset_fingerprint"] = hex64(synth.data.fingerprint());
  manifest.body["seed"] = spec.synthetic.seed;
  manifest.write(opts.out_path + ".manifest.json", outputs);
}

// ---------------------------------------------------------------------------
// Entry point

/// Parses arguments and runs one subcommand. Returns the process exit code:
/// 0 on success, 2 for invalid input, 3 for anything else.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Bayesian tensor-product neural network sampler"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitOptions fit;
  std::uint64_t seed = 0;
  std::size_t chains = 0;
  auto* fit_cmd = app.add_subcommand("fit", "Run the MCMC sampler on a CSV dataset");
  fit_cmd->add_option("--config", fit.config_path, "Flat JSON prior/chain config");
  fit_cmd->add_option("--data", fit.data_path, "Training CSV");
  fit_cmd->add_option("--out", fit.out_dir, "Output directory")->required();
  auto* seed_opt = fit_cmd->add_option("--seed", seed, "Overrides the config seed");
  auto* chains_opt = fit_cmd->add_option("--chains", chains, "Overrides the config chain count");
  fit_cmd->add_option("--omega", fit.omega_path, "Two-column CSV of input weights");
  fit_cmd->add_option("--manifest", fit.manifest_path, "Rerun from a fit manifest");

  PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Posterior predictions for CSV rows");
  predict_cmd->add_option("--samples", predict.samples_path)->required();
  predict_cmd->add_option("--data", predict.data_path)->required();
  predict_cmd->add_option("--out", predict.out_path)->required();

  ImportanceOptionsCli importance;
  auto* importance_cmd = app.add_subcommand("importance", "Rank components by importance score");
  importance_cmd->add_option("--samples", importance.samples_path)->required();
  importance_cmd->add_option("--data", importance.data_path)->required();
  importance_cmd->add_option("--top", importance.top, "Keep the N highest scores");
  importance_cmd->add_flag("--normalize", importance.normalize, "Divide by the top score");
  importance_cmd->add_option("--out", importance.out_path, "CSV path (default: stdout)");

  ComponentsOptions components;
  auto* components_cmd = app.add_subcommand("components", "Estimated component curve with credible band");
  components_cmd->add_option("--samples", components.samples_path)->required();
  components_cmd->add_option("--data", components.data_path)->required();
  components_cmd->add_option("--set", components.set, "1-based variable list, e.g. 1,6")->required();
  components_cmd->add_option("--out", components.out_path, "CSV path (default: stdout)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Synthetic benchmark: generate, fit, score");
  bench_cmd->add_option("--spec", bench.spec_path)->required();
  bench_cmd->add_option("--out", bench.out_path, "report.json path")->required();
  bench_cmd->add_option("--data-out", bench.data_out, "Also export the generated data as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (fit_cmd->parsed()) {
      if (seed_opt->count()) fit.seed = seed;
      if (chains_opt->count()) fit.chains = chains;
      const auto res = cmd_fit(fit);
      out << "wrote " << res.n_samples << " draws to " << res.samples_path << '\n';
    } else if (predict_cmd->parsed()) {
      cmd_predict(predict);
    } else if (importance_cmd->parsed()) {
      cmd_importance(importance, out);
    } else if (components_cmd->parsed()) {
      cmd_components(components, out);
    } else if (bench_cmd->parsed()) {
      cmd_bench(bench);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace btpnn::cli
