#pragma once

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "btpnn/data.hpp"
#include "btpnn/inference.hpp"
#include "btpnn/mcmc.hpp"
#include "btpnn/prior.hpp"
#include "btpnn/samples.hpp"

namespace btpnn {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Posterior samples as JSON lines: one metadata line, then one state per line.
// Variable indices are 1-based on disk.

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

inline json meta_to_json(const SamplesMeta& m) {
  json cols = json::array();
  for (std::size_t j = 0; j < m.columns.size(); ++j) {
    const auto& c = m.columns[j];
    cols.push_back({{"name", c.name},
                    {"origin", c.origin == ColumnOrigin::continuous ? "continuous" : "one_hot"},
                    {"source", c.source},
                    {"level", c.level},
                    {"reference", m.transforms[j].reference()}});
  }
  return {{"type", "meta"},
          {"seed", m.seed},
          {"rng", m.rng},
          {"n_chains", m.n_chains},
          {"burn_in", m.burn_in},
          {"iterations", m.iterations},
          {"thin", m.thin},
          {"data", {{"n", m.n}, {"p", m.p}, {"hash", hex64(m.data_hash)}}},
          {"family", to_string(m.family)},
          {"marginal_kind", to_string(m.marginal_kind)},
          {"offset", m.offset},
          {"target", m.target},
          {"columns", cols}};
}

inline SamplesMeta meta_from_json(const json& j) {
  SamplesMeta m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.rng = j.at("rng").get<std::string>();
  m.n_chains = j.at("n_chains").get<std::size_t>();
  m.burn_in = j.at("burn_in").get<std::size_t>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.thin = j.at("thin").get<std::size_t>();
  m.n = j.at("data").at("n").get<std::size_t>();
  m.p = j.at("data").at("p").get<std::size_t>();
  m.data_hash = parse_hex64(j.at("data").at("hash").get<std::string>());
  m.family = family_from_string(j.at("family").get<std::string>());
  m.marginal_kind = marginal_kind_from_string(j.at("marginal_kind").get<std::string>());
  m.offset = j.at("offset").get<double>();
  m.target = j.value("target", std::string{});
  for (const auto& c : j.at("columns")) {
    ColumnMeta cm;
    cm.name = c.at("name").get<std::string>();
    cm.origin = c.at("origin").get<std::string>() == "one_hot" ? ColumnOrigin::one_hot : ColumnOrigin::continuous;
    cm.source = c.at("source").get<std::string>();
    cm.level = c.at("level").get<std::string>();
    m.columns.push_back(cm);
    m.transforms.emplace_back(c.at("reference").get<std::vector<double>>());
  }
  if (m.columns.size() != m.p) throw ValidationError("samples metadata lists " + std::to_string(m.columns.size()) +
                                                     " columns but p=" + std::to_string(m.p));
  m.marginals = marginals_from_meta(m);
  return m;
}

inline json state_to_json(const ModelState& s, std::size_t chain) {
  json terms = json::array();
  for (const auto& t : s.terms) {
    std::vector<std::size_t> one_based(t.vars);
    for (auto& v : one_based) ++v;
    terms.push_back({{"S", one_based}, {"b", t.knots}, {"gamma", t.bandwidths}, {"beta", t.beta}});
  }
  return {{"chain", chain}, {"K", s.terms.size()}, {"terms", terms}, {"eta", s.eta}};
}

inline ModelState state_from_json(const json& j, std::size_t p) {
  ModelState s;
  s.eta = j.at("eta").get<double>();
  for (const auto& tj : j.at("terms")) {
    BasisTerm t;
    for (auto v : tj.at("S").get<std::vector<std::size_t>>()) {
      if (v == 0) throw ValidationError("variable indices in samples are 1-based");
      t.vars.push_back(v - 1);
    }
    t.knots = tj.at("b").get<std::vector<double>>();
    t.bandwidths = tj.at("gamma").get<std::vector<double>>();
    t.beta = tj.at("beta").get<double>();
    validate_term(t, p);
    s.terms.push_back(std::move(t));
  }
  if (j.at("K").get<std::size_t>() != s.terms.size()) throw ValidationError("state K does not match its term count");
  return s;
}

inline void write_samples(std::ostream& out, const PosteriorSamples& samples) {
  out << meta_to_json(samples.meta).dump() << '\n';
  for (std::size_t i = 0; i < samples.states.size(); ++i) {
    out << state_to_json(samples.states[i], samples.chain.empty() ? 0 : samples.chain[i]).dump() << '\n';
  }
}

inline void write_samples(const std::string& path, const PosteriorSamples& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + path + "'");
  write_samples(out, samples);
}

inline PosteriorSamples read_samples(std::istream& in, const std::string& label = "samples") {
  PosteriorSamples s;
  std::string line;
  std::size_t lineno = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_meta) {
        if (j.value("type", std::string{}) != "meta") throw ValidationError("first line must be the metadata record");
        s.meta = meta_from_json(j);
        have_meta = true;
        continue;
      }
      s.states.push_back(state_from_json(j, s.meta.p));
      s.chain.push_back(j.value("chain", std::size_t{0}));
    } catch (const json::exception& e) {
      throw ValidationError(label + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(label + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_meta) throw ValidationError(label + ": missing metadata line");
  return s;
}

inline PosteriorSamples read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open samples file '" + path + "'");
  return read_samples(in, path);
}

// ---------------------------------------------------------------------------
// Flat JSON config holding prior and chain keys.

struct FitConfig {
  PriorConfig prior;
  ChainConfig chain;
  std::string target = "y";
  Family family = Family::gaussian;
  std::string omega_path;
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) line += text[i] == '\n' ? 1 : 0;
  return line;
}

inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

}  // namespace detail

inline const std::set<std::string>& prior_keys() {
  static const std::set<std::string> keys{"C0",      "K_max",   "alpha_adding", "gamma_adding", "sigma_beta2",
                                          "a_gamma", "b_gamma", "v",            "q_add",        "q_delete",
                                          "q_change", "M",      "step_size"};
  return keys;
}

inline json prior_to_json(const PriorConfig& c) {
  json j = {{"C0", c.C0},           {"K_max", c.K_max},         {"alpha_adding", c.alpha_adding},
            {"gamma_adding", c.gamma_adding}, {"sigma_beta2", c.sigma_beta2}, {"a_gamma", c.a_gamma},
            {"b_gamma", c.b_gamma}, {"v", c.v},                 {"q_add", c.q_add},
            {"q_delete", c.q_delete}, {"q_change", c.q_change}, {"M", c.M},
            {"step_size", c.step_size}};
  if (c.lambda) j["lambda"] = *c.lambda;
  if (c.q_lambda) j["q_lambda"] = *c.q_lambda;
  if (!c.omega.empty()) j["omega"] = c.omega;
  return j;
}

inline json chain_to_json(const ChainConfig& c) {
  return {{"burn_in", c.burn_in},
          {"iterations", c.iterations},
          {"thin", c.thin},
          {"seed", c.seed},
          {"n_chains", c.n_chains},
          {"marginal_kind", to_string(c.marginal_kind)},
          {"sigma2_update", c.sigma2_update == Sigma2Update::conjugate ? "conjugate" : "mean-ssr"},
          {"initial_K", c.initial_K}};
}

inline json fit_config_to_json(const FitConfig& c) {
  json j = prior_to_json(c.prior);
  j.update(chain_to_json(c.chain));
  j["target"] = c.target;
  j["family"] = to_string(c.family);
  if (!c.omega_path.empty()) j["omega_path"] = c.omega_path;
  return j;
}

/// Parses a flat config. Every prior key is required (exactly one of lambda
/// and q_lambda); chain keys fall back to their defaults. `text` is used to
/// point error messages at a line.
inline FitConfig parse_fit_config(const std::string& text, const std::string& label = "config") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(label + ":" + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError(label + ": config must be a JSON object");
  static const std::set<std::string> chain_keys{"burn_in", "iterations", "thin", "seed", "n_chains",
                                                "marginal_kind", "sigma2_update", "initial_K"};
  static const std::set<std::string> other_keys{"lambda", "q_lambda", "omega", "omega_path", "target", "family"};
  for (const auto& [key, value] : j.items()) {
    if (!prior_keys().count(key) && !chain_keys.count(key) && !other_keys.count(key)) {
      throw ValidationError(label + ":" + std::to_string(detail::line_of_key(text, key)) + ": unknown key '" + key + "'");
    }
  }
  FitConfig c;
  auto where = [&](const std::string& key) { return label + ":" + std::to_string(detail::line_of_key(text, key)) + ": "; };
  try {
    for (const auto& key : prior_keys()) {
      if (!j.contains(key)) throw ValidationError(label + ": missing required key '" + key + "'");
    }
    auto num = [&](const std::string& key) {
      if (!j.at(key).is_number()) throw ValidationError(where(key) + "'" + key + "' must be a number");
      return j.at(key).get<double>();
    };
    auto count = [&](const std::string& key) {
      if (!j.at(key).is_number_unsigned()) throw ValidationError(where(key) + "'" + key + "' must be a non-negative integer");
      return j.at(key).get<std::size_t>();
    };
    c.prior.C0 = num("C0");
    c.prior.K_max = count("K_max");
    c.prior.alpha_adding = num("alpha_adding");
    c.prior.gamma_adding = num("gamma_adding");
    c.prior.sigma_beta2 = num("sigma_beta2");
    c.prior.a_gamma = num("a_gamma");
    c.prior.b_gamma = num("b_gamma");
    c.prior.v = num("v");
    c.prior.q_add = num("q_add");
    c.prior.q_delete = num("q_delete");
    c.prior.q_change = num("q_change");
    c.prior.M = num("M");
    c.prior.step_size = num("step_size");
    c.prior.lambda.reset();
    c.prior.q_lambda.reset();
    if (j.contains("lambda")) c.prior.lambda = num("lambda");
    if (j.contains("q_lambda")) c.prior.q_lambda = num("q_lambda");
    if (j.contains("lambda") == j.contains("q_lambda")) {
      throw ValidationError(label + ": exactly one of 'lambda' and 'q_lambda' must be given");
    }
    if (j.contains("omega")) c.prior.omega = j.at("omega").get<std::vector<double>>();
    if (std::abs(c.prior.q_add + c.prior.q_delete + c.prior.q_change - 1.0) > 1e-9) {
      throw ValidationError(where("q_change") + "q_add + q_delete + q_change must equal 1");
    }
    if (j.contains("burn_in")) c.chain.burn_in = count("burn_in");
    if (j.contains("iterations")) c.chain.iterations = count("iterations");
    if (j.contains("thin")) c.chain.thin = count("thin");
    if (j.contains("seed")) c.chain.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_chains")) c.chain.n_chains = count("n_chains");
    if (j.contains("initial_K")) c.chain.initial_K = count("initial_K");
    if (j.contains("marginal_kind")) c.chain.marginal_kind = marginal_kind_from_string(j.at("marginal_kind").get<std::string>());
    if (j.contains("sigma2_update")) {
      const auto v = j.at("sigma2_update").get<std::string>();
      if (v == "conjugate") {
        c.chain.sigma2_update = Sigma2Update::conjugate;
      } else if (v == "mean-ssr") {
        c.chain.sigma2_update = Sigma2Update::mean_ssr;
      } else {
        throw ValidationError(where("sigma2_update") + "sigma2_update must be 'conjugate' or 'mean-ssr'");
      }
    }
    if (j.contains("target")) c.target = j.at("target").get<std::string>();
    if (j.contains("family")) c.family = family_from_string(j.at("family").get<std::string>());
    if (j.contains("omega_path")) c.omega_path = j.at("omega_path").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(label + ": " + e.what());
  }
  c.chain.validate();
  return c;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FitConfig load_fit_config(const std::string& path) { return parse_fit_config(read_text(path), path); }

/// Two-column CSV (1-based column index, weight) of input-importance weights.
/// Columns not listed are an error; the result has one weight per column.
inline std::vector<double> load_omega_csv(const std::string& path, std::size_t p) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw ValidationError(path + ": expected two columns (column index, weight)");
  std::vector<double> w(p, -1.0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double idx, weight;
    if (!detail::parse_double(t.rows[r][0], idx) || !detail::parse_double(t.rows[r][1], weight) ||
        idx != std::floor(idx) || idx < 1 || idx > static_cast<double>(p)) {
      throw ValidationError(path + ":" + std::to_string(r + 2) + ": invalid column index or weight");
    }
    w[static_cast<std::size_t>(idx) - 1] = weight;
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (!(w[j] > 0.0)) throw ValidationError(path + ": missing or non-positive weight for column " + std::to_string(j + 1));
  }
  return w;
}

inline void write_trace(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write '" + path + "'");
  out.precision(17);
  out << "chain,iteration,K,loglik,sigma2,acc_birth,acc_death,acc_adding,acc_deleting,acc_changing,acc_langevin\n";
  for (const auto& r : rows) {
    out << r.chain << ',' << r.iteration << ',' << r.K << ',' << r.loglik << ',' << r.sigma2 << ','
        << r.stats.birth.rate() << ',' << r.stats.death.rate() << ',' << r.stats.adding.rate() << ','
        << r.stats.deleting.rate() << ',' << r.stats.changing.rate() << ',' << r.stats.langevin.rate() << '\n';
  }
}

/// 1-based "1,6" style list into a sorted 0-based set.
inline VarSet parse_var_set(const std::string& text, std::size_t p) {
  VarSet s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!detail::parse_double(item, v) || v != std::floor(v) || v < 1 || v > static_cast<double>(p)) {
      throw ValidationError("invalid variable index '" + item + "' (expected 1.." + std::to_string(p) + ")");
    }
    s.push_back(static_cast<std::size_t>(v) - 1);
  }
  if (s.empty()) throw ValidationError("empty variable set");
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ValidationError("repeated variable index in set");
  return s;
}

inline std::string format_var_set(const VarSet& s, char sep = ' ') {
  std::string out;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (a) out.push_back(sep);
    out += std::to_string(s[a] + 1);
  }
  return out;
}

}  // namespace btpnn
