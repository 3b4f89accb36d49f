#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "btpnn/core.hpp"

namespace btpnn {

enum class ColumnOrigin { continuous, one_hot };

struct ColumnMeta {
  std::string name;
  ColumnOrigin origin = ColumnOrigin::continuous;
  std::string source;  // originating CSV column
  std::string level;   // one-hot level, empty for continuous columns
};

/// Maps raw values of one column into [0,1] using a reference sample.
///
/// A value present in the reference maps to its average rank divided by the
/// reference size, so the reference itself gets its rank transform. Any other
/// value maps to the fraction of reference points at or below it.
class ColumnTransform {
 public:
  ColumnTransform() = default;
  explicit ColumnTransform(std::vector<double> reference) : sorted_(std::move(reference)) {
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double v) const {
    const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), v);
    const auto hi = std::upper_bound(lo, sorted_.end(), v);
    const double n = static_cast<double>(sorted_.size());
    const auto below = static_cast<double>(lo - sorted_.begin());
    const auto through = static_cast<double>(hi - sorted_.begin());
    if (hi != lo) return (below + 1.0 + through) / 2.0 / n;
    return through / n;
  }

  const std::vector<double>& reference() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// Average-rank transform of a column, divided by its length.
inline std::vector<double> rank_transform(std::span<const double> raw) {
  ColumnTransform t(std::vector<double>(raw.begin(), raw.end()));
  std::vector<double> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [&](double v) { return t(v); });
  return out;
}

enum class MarginalKind { empirical, uniform };

inline std::string to_string(MarginalKind k) { return k == MarginalKind::empirical ? "empirical" : "uniform"; }

inline MarginalKind marginal_kind_from_string(const std::string& s) {
  if (s == "empirical") return MarginalKind::empirical;
  if (s == "uniform") return MarginalKind::uniform;
  throw ValidationError("unknown marginal_kind '" + s + "' (expected empirical or uniform)");
}

/// Distribution of one input coordinate against which basis factors are
/// centered. Empirical marginals keep the distinct sample values with their
/// relative frequencies.
struct Marginal {
  MarginalKind kind = MarginalKind::uniform;
  std::vector<double> values;   // sorted, distinct
  std::vector<double> weights;  // relative frequency of each value, sums to 1

  static Marginal uniform() { return {}; }

  static Marginal empirical(std::span<const double> sample) {
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    Marginal m;
    m.kind = MarginalKind::empirical;
    const double inv = 1.0 / static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size();) {
      std::size_t j = i;
      while (j < s.size() && s[j] == s[i]) ++j;
      m.values.push_back(s[i]);
      m.weights.push_back(static_cast<double>(j - i) * inv);
      i = j;
    }
    return m;
  }
};

/// Preprocessed design matrix plus the raw values it came from.
///
/// `x` and `raw` are column-major n×p. Continuous columns of `x` are the
/// transforms of `raw`; one-hot columns are copied unchanged.
struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> x;
  std::vector<double> raw;
  std::vector<double> y;
  Family family = Family::gaussian;
  std::vector<ColumnMeta> columns;
  std::vector<ColumnTransform> transforms;  // one per column; unused for one-hot

  std::span<const double> col(std::size_t j) const { return {x.data() + j * n, n}; }
  std::span<const double> raw_col(std::size_t j) const { return {raw.data() + j * n, n}; }
  double at(std::size_t i, std::size_t j) const { return x[j * n + i]; }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> r(p);
    for (std::size_t j = 0; j < p; ++j) r[j] = x[j * n + i];
    return r;
  }

  std::vector<Marginal> marginals(MarginalKind kind) const {
    std::vector<Marginal> out;
    out.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
      out.push_back(kind == MarginalKind::empirical ? Marginal::empirical(col(j)) : Marginal::uniform());
    }
    return out;
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = fnv1a(&n, sizeof n);
    h = fnv1a(&p, sizeof p, h);
    h = fnv1a(raw.data(), raw.size() * sizeof(double), h);
    return fnv1a(y.data(), y.size() * sizeof(double), h);
  }
};

inline void check_response(Family family, double v, std::size_t row) {
  const auto where = " at data row " + std::to_string(row + 1);
  if (!std::isfinite(v)) throw ValidationError("non-finite response" + where);
  if (family == Family::bernoulli && v != 0.0 && v != 1.0) {
    throw ValidationError("bernoulli response must be 0 or 1" + where);
  }
  if (family == Family::poisson && (v < 0.0 || v != std::floor(v))) {
    throw ValidationError("poisson response must be a non-negative integer" + where);
  }
}

/// Builds x from raw values with the given transforms (one per column).
inline void apply_transforms(Dataset& ds) {
  ds.x = ds.raw;
  for (std::size_t j = 0; j < ds.p; ++j) {
    if (ds.columns[j].origin != ColumnOrigin::continuous) continue;
    for (std::size_t i = 0; i < ds.n; ++i) ds.x[j * ds.n + i] = ds.transforms[j](ds.raw[j * ds.n + i]);
  }
}

/// Assembles a dataset whose continuous columns are rank-transformed against
/// themselves. `raw` is column-major n×p.
inline Dataset make_dataset(std::vector<double> raw, std::vector<double> y, Family family,
                            std::vector<ColumnMeta> columns) {
  Dataset ds;
  ds.n = y.size();
  ds.p = columns.size();
  if (ds.n < 2) throw ValidationError("dataset needs at least 2 rows, got " + std::to_string(ds.n));
  if (ds.p < 1) throw ValidationError("dataset needs at least 1 feature column");
  if (raw.size() != ds.n * ds.p) throw ValidationError("raw matrix size does not match n*p");
  for (std::size_t i = 0; i < ds.n; ++i) check_response(family, y[i], i);
  ds.raw = std::move(raw);
  ds.y = std::move(y);
  ds.family = family;
  ds.columns = std::move(columns);
  ds.transforms.resize(ds.p);
  for (std::size_t j = 0; j < ds.p; ++j) {
    if (ds.columns[j].origin == ColumnOrigin::continuous) {
      auto c = ds.raw_col(j);
      ds.transforms[j] = ColumnTransform(std::vector<double>(c.begin(), c.end()));
    }
  }
  apply_transforms(ds);
  return ds;
}

/// Rows `idx` of `ds`, mapped through `transforms` instead of refitting.
inline Dataset select_rows(const Dataset& ds, std::span<const std::size_t> idx,
                           const std::vector<ColumnTransform>* transforms) {
  Dataset out;
  out.n = idx.size();
  out.p = ds.p;
  out.family = ds.family;
  out.columns = ds.columns;
  out.raw.resize(out.n * out.p);
  out.y.resize(out.n);
  for (std::size_t r = 0; r < out.n; ++r) {
    out.y[r] = ds.y[idx[r]];
    for (std::size_t j = 0; j < ds.p; ++j) out.raw[j * out.n + r] = ds.raw[j * ds.n + idx[r]];
  }
  if (transforms != nullptr) {
    out.transforms = *transforms;
  } else {
    out.transforms.resize(out.p);
    for (std::size_t j = 0; j < out.p; ++j) {
      if (out.columns[j].origin == ColumnOrigin::continuous) {
        auto c = out.raw_col(j);
        out.transforms[j] = ColumnTransform(std::vector<double>(c.begin(), c.end()));
      }
    }
  }
  apply_transforms(out);
  return out;
}

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

/// Random row partition with floor(test_fraction * n) test rows. The
/// training part is re-ranked on its own rows and the test part is mapped
/// through the training transforms.
inline Split train_test_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0,1)");
  }
  // Test size rounds down; the small slack absorbs products like 0.9 * 5.
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(ds.n) + 1e-9));
  if (n_test == 0 || n_test >= ds.n) {
    throw ValidationError("split of " + std::to_string(ds.n) + " rows at fraction " +
                          std::to_string(test_fraction) + " leaves an empty part");
  }
  std::vector<std::size_t> perm(ds.n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, 0x5e11);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Split s;
  s.test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test_rows.begin(), s.test_rows.end());
  std::sort(s.train_rows.begin(), s.train_rows.end());
  s.train = select_rows(ds, s.train_rows, nullptr);
  s.test = select_rows(ds, s.test_rows, &s.train.transforms);
  return s;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty() && cur.back() == '\r') cur.pop_back();
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace detail

/// Header plus string cells, validated for a consistent width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("column '" + name + "' not found in CSV header");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open CSV file '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV file '" + path + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.header = detail::split_csv_line(line);
  for (auto& h : t.header) h = detail::trim(h);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.rows.empty()) throw ValidationError("CSV file '" + path + "' has no data rows");
  return t;
}

/// Loads a CSV into a Dataset. Columns whose cells are mostly numeric are
/// continuous; the rest are one-hot encoded with levels in sorted order.
/// Rows are reported 1-based counting data rows only.
inline Dataset load_csv(const std::string& path, const std::string& target_column, Family family) {
  const CsvTable t = read_csv(path);
  const std::size_t target = t.column(target_column);
  const std::size_t n = t.rows.size();

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!detail::parse_double(t.rows[i][target], y[i])) {
      throw ValidationError("unparseable response '" + t.rows[i][target] + "' at data row " + std::to_string(i + 1));
    }
  }

  std::vector<ColumnMeta> meta;
  std::vector<double> raw_cols;  // appended column by column
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == target) continue;
    std::size_t numeric = 0;
    for (const auto& r : t.rows) {
      double v;
      numeric += detail::parse_double(r[c], v) ? 1 : 0;
    }
    if (2 * numeric > n) {
      for (std::size_t i = 0; i < n; ++i) {
        double v;
        if (!detail::parse_double(t.rows[i][c], v)) {
          throw ValidationError("non-numeric cell '" + t.rows[i][c] + "' in numeric column '" + t.header[c] +
                                "' at data row " + std::to_string(i + 1));
        }
        raw_cols.push_back(v);
      }
      meta.push_back({t.header[c], ColumnOrigin::continuous, t.header[c], ""});
    } else {
      std::vector<std::string> levels;
      for (std::size_t i = 0; i < n; ++i) {
        const auto cell = detail::trim(t.rows[i][c]);
        if (cell.empty()) {
          throw ValidationError("missing value in column '" + t.header[c] + "' at data row " + std::to_string(i + 1));
        }
        levels.push_back(cell);
      }
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      for (const auto& level : levels) {
        for (std::size_t i = 0; i < n; ++i) raw_cols.push_back(detail::trim(t.rows[i][c]) == level ? 1.0 : 0.0);
        meta.push_back({t.header[c] + "=" + level, ColumnOrigin::one_hot, t.header[c], level});
      }
    }
  }
  return make_dataset(std::move(raw_cols), std::move(y), family, std::move(meta));
}

/// Loads rows laid out like an existing column schema and maps them through
/// the given transforms. The target column is optional; when absent y is
/// filled with zeros and `has_target` is false.
struct FeatureRows {
  Dataset data;
  bool has_target = false;
};

inline FeatureRows load_csv_with_schema(const std::string& path, const std::vector<ColumnMeta>& columns,
                                        const std::vector<ColumnTransform>& transforms, Family family,
                                        const std::string& target_column) {
  const CsvTable t = read_csv(path);
  const std::size_t n = t.rows.size();
  FeatureRows out;
  Dataset& ds = out.data;
  ds.n = n;
  ds.p = columns.size();
  ds.family = family;
  ds.columns = columns;
  ds.transforms = transforms;
  ds.raw.resize(ds.n * ds.p);
  ds.y.assign(n, 0.0);

  const auto tgt = std::find(t.header.begin(), t.header.end(), target_column);
  if (!target_column.empty() && tgt != t.header.end()) {
    out.has_target = true;
    const auto c = static_cast<std::size_t>(tgt - t.header.begin());
    for (std::size_t i = 0; i < n; ++i) {
      if (!detail::parse_double(t.rows[i][c], ds.y[i])) {
        throw ValidationError("unparseable response '" + t.rows[i][c] + "' at data row " + std::to_string(i + 1));
      }
      check_response(family, ds.y[i], i);
    }
  }

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t j = 0; j < ds.p; ++j) {
    const auto& m = columns[j];
    const std::size_t c = t.column(m.source);
    if (m.origin == ColumnOrigin::continuous) {
      for (std::size_t i = 0; i < n; ++i) {
        double v;
        if (!detail::parse_double(t.rows[i][c], v)) {
          throw ValidationError("non-numeric cell '" + t.rows[i][c] + "' in numeric column '" + m.source +
                                "' at data row " + std::to_string(i + 1));
        }
        ds.raw[j * n + i] = v;
      }
    } else {
      groups[m.source].push_back(j);
      for (std::size_t i = 0; i < n; ++i) ds.raw[j * n + i] = detail::trim(t.rows[i][c]) == m.level ? 1.0 : 0.0;
    }
  }
  for (const auto& [source, cols] : groups) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (auto j : cols) s += ds.raw[j * n + i];
      if (s != 1.0) {
        throw ValidationError("column '" + source + "' has a level unseen in training at data row " +
                              std::to_string(i + 1));
      }
    }
  }
  apply_transforms(ds);
  return out;
}

/// Writes a dataset's raw values as CSV with the response last.
inline void write_csv(const std::string& path, const Dataset& ds, const std::string& target_column) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write '" + path + "'");
  out.precision(17);
  for (std::size_t j = 0; j < ds.p; ++j) out << ds.columns[j].name << ',';
  out << target_column << '\n';
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.p; ++j) out << ds.raw[j * ds.n + i] << ',';
    out << ds.y[i] << '\n';
  }
}

}  // namespace btpnn
