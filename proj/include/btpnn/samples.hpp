#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btpnn/data.hpp"
#include "btpnn/likelihood.hpp"

namespace btpnn {

struct SamplesMeta {
  std::uint64_t seed = 0;
  std::string rng = Rng::kName;
  std::size_t n_chains = 1;
  std::size_t burn_in = 0;
  std::size_t iterations = 0;
  std::size_t thin = 1;
  std::size_t n = 0;
  std::size_t p = 0;
  std::uint64_t data_hash = 0;
  Family family = Family::gaussian;
  MarginalKind marginal_kind = MarginalKind::empirical;
  double offset = 0.0;  // y-mean for gaussian, link of the mean otherwise
  std::string target;
  std::vector<ColumnMeta> columns;
  std::vector<ColumnTransform> transforms;
  std::vector<Marginal> marginals;  // rebuilt on load, not serialized
};

/// Post-burn-in draws in chain order; `chain[i]` names the chain of state i.
struct PosteriorSamples {
  SamplesMeta meta;
  std::vector<ModelState> states;
  std::vector<std::size_t> chain;

  bool empty() const { return states.empty(); }
  std::size_t size() const { return states.size(); }
};

/// Marginals implied by the stored training transforms: continuous columns
/// map their reference sample through the transform, one-hot columns use the
/// stored 0/1 reference as-is.
inline std::vector<Marginal> marginals_from_meta(const SamplesMeta& meta) {
  std::vector<Marginal> out;
  out.reserve(meta.columns.size());
  for (std::size_t j = 0; j < meta.columns.size(); ++j) {
    if (meta.marginal_kind == MarginalKind::uniform) {
      out.push_back(Marginal::uniform());
      continue;
    }
    const auto& ref = meta.transforms[j].reference();
    std::vector<double> v(ref.size());
    if (meta.columns[j].origin == ColumnOrigin::continuous) {
      for (std::size_t i = 0; i < ref.size(); ++i) v[i] = meta.transforms[j](ref[i]);
    } else {
      v = ref;
    }
    out.push_back(Marginal::empirical(v));
  }
  return out;
}

/// Training transforms for every column, including a raw reference for
/// one-hot columns so their empirical marginal can be rebuilt.
inline std::vector<ColumnTransform> stored_transforms(const Dataset& train) {
  std::vector<ColumnTransform> out(train.p);
  for (std::size_t j = 0; j < train.p; ++j) {
    auto c = train.raw_col(j);
    out[j] = ColumnTransform(std::vector<double>(c.begin(), c.end()));
  }
  return out;
}

}  // namespace btpnn
