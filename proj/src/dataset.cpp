#include "fewdp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fewdp/rng.hpp"

namespace fewdp {

std::vector<std::size_t> FewShotDataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::size_t FewShotDataset::count_of(Split s) const {
  std::size_t n = 0;
  for (auto t : split)
    if (t == s) ++n;
  return n;
}

void FewShotDataset::validate() const {
  const std::size_t n = labels.size();
  if (split.size() != n) throw std::invalid_argument("dataset: split tags do not cover examples");
  if (features.size() != n * static_cast<std::size_t>(dim))
    throw std::invalid_argument("dataset: feature matrix shape mismatch");
  std::vector<std::size_t> per_class(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::invalid_argument("dataset: label out of range at index " + std::to_string(i));
    if (split[i] == Split::train) ++per_class[static_cast<std::size_t>(labels[i])];
  }
  if (shots > 0) {
    for (int c = 0; c < classes; ++c) {
      const std::size_t have = per_class[static_cast<std::size_t>(c)];
      if (have != static_cast<std::size_t>(shots) && count_of(Split::val) == 0)
        throw std::invalid_argument("dataset: class " + std::to_string(c) + " has " +
                                    std::to_string(have) + " training shots, expected " +
                                    std::to_string(shots));
    }
  }
}

namespace {

std::vector<double> unit_gaussian_vector(Philox& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double nrm = 0.0;
  for (auto& x : v) {
    x = rng.next_gaussian();
    nrm += x * x;
  }
  nrm = std::sqrt(nrm);
  if (nrm > 0)
    for (auto& x : v) x /= nrm;
  return v;
}

void rotate_pairs(std::vector<double>& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
    const double a = v[i];
    const double b = v[i + 1];
    v[i] = c * a - s * b;
    v[i + 1] = s * a + c * b;
  }
}

}  // namespace

std::vector<std::vector<double>> task_means(const SyntheticTaskSpec& spec, bool shifted) {
  std::vector<std::vector<double>> means;
  means.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    Philox rng = Philox::stream(spec.seed, "task-means", static_cast<uint64_t>(c));
    auto m = unit_gaussian_vector(rng, spec.dim);
    for (auto& x : m) x *= spec.separation;
    if (shifted && spec.shift != 0.0) {
      rotate_pairs(m, spec.shift * 1.57079632679489661923);
      Philox srng = Philox::stream(spec.seed, "task-shift", static_cast<uint64_t>(c));
      auto fresh = unit_gaussian_vector(srng, spec.dim);
      for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = (1.0 - spec.shift) * m[i] + spec.shift * spec.separation * fresh[i];
    }
    means.push_back(std::move(m));
  }
  return means;
}

namespace {

FewShotDataset sample_impl(const SyntheticTaskSpec& spec, int train_per_class, int test_per_class,
                           uint64_t sample_seed, bool shifted, std::string_view tag) {
  const auto means = task_means(spec, shifted);
  FewShotDataset ds;
  ds.classes = spec.classes;
  ds.shots = train_per_class;
  ds.dim = spec.dim;
  const std::size_t n =
      static_cast<std::size_t>(spec.classes) * static_cast<std::size_t>(train_per_class + test_per_class);
  ds.features.reserve(n * static_cast<std::size_t>(spec.dim));
  ds.labels.reserve(n);
  ds.split.reserve(n);
  for (int c = 0; c < spec.classes; ++c) {
    Philox rng = Philox::stream(sample_seed ^ spec.seed, tag, static_cast<uint64_t>(c));
    for (int k = 0; k < train_per_class + test_per_class; ++k) {
      for (int j = 0; j < spec.dim; ++j)
        ds.features.push_back(means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                              spec.spread * rng.next_gaussian());
      ds.labels.push_back(c);
      ds.split.push_back(k < train_per_class ? Split::train : Split::test);
    }
  }
  return ds;
}

}  // namespace

FewShotDataset sample_few_shot(const SyntheticTaskSpec& spec, int shots, int test_per_class,
                               uint64_t sample_seed) {
  if (shots < 1) throw std::invalid_argument("sample_few_shot: shots must be >= 1");
  return sample_impl(spec, shots, test_per_class, sample_seed, true, "task-sample");
}

FewShotDataset sample_source(const SyntheticTaskSpec& spec, int per_class, uint64_t sample_seed) {
  return sample_impl(spec, per_class, 0, sample_seed, false, "source-sample");
}

void stratified_holdout(FewShotDataset& data, double val_fraction, uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("stratified_holdout: fraction must be in [0, 1)");
  for (int c = 0; c < data.classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.split[i] == Split::train && data.labels[i] == c) idx.push_back(i);
    const std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(idx.size())));
    if (idx.size() < 2 || n_val == 0) continue;  // keep tiny classes whole
    Philox rng = Philox::stream(seed, "holdout", static_cast<uint64_t>(c));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    for (std::size_t k = 0; k < n_val; ++k) data.split[idx[k]] = Split::val;
  }
}

}  // namespace fewdp
