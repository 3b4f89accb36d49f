#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "btpnn/btpnn.hpp"

namespace btpnn::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("btpnn_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// n x p dataset of uniform inputs with a response drawn for `family`.
inline Dataset random_dataset(std::size_t n, std::size_t p, Family family, std::uint64_t seed) {
  Rng rng(seed, 77);
  std::vector<double> raw(n * p);
  for (double& v : raw) v = rng.uniform();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = std::sin(3.0 * raw[i]) - 0.5 + (p > 1 ? raw[n + i] * raw[i] : 0.0);
    switch (family) {
      case Family::gaussian: y[i] = f + 0.3 * rng.normal(); break;
      case Family::bernoulli: y[i] = rng.uniform() < sigmoid(2.0 * f) ? 1.0 : 0.0; break;
      case Family::poisson:
        y[i] = static_cast<double>(std::poisson_distribution<int>(std::exp(f))(rng.engine()));
        break;
    }
  }
  std::vector<ColumnMeta> cols;
  for (std::size_t j = 0; j < p; ++j) cols.push_back({"x" + std::to_string(j + 1), ColumnOrigin::continuous, "x" + std::to_string(j + 1), ""});
  return make_dataset(std::move(raw), std::move(y), family, std::move(cols));
}

/// Random valid term over `vars` with knots inside the data range.
inline BasisTerm random_term(std::vector<std::size_t> vars, Rng& rng) {
  BasisTerm t;
  t.vars = std::move(vars);
  for (std::size_t a = 0; a < t.vars.size(); ++a) {
    t.knots.push_back(0.1 + 0.8 * rng.uniform());
    t.bandwidths.push_back(0.02 + 0.3 * rng.uniform());
  }
  t.beta = rng.normal();
  return t;
}

}  // namespace btpnn::testing
