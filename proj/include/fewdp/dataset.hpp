#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fewdp {

enum class Split : uint8_t { train, val, test };

// Labeled feature vectors organized as C classes with S training shots per
// class plus held-out examples, distinguished by split tags.
struct FewShotDataset {
  int classes = 0;
  int shots = 0;  // S: training examples per class at construction
  int dim = 0;
  std::vector<double> features;  // n x dim, row-major
  std::vector<int> labels;       // 0-based class indices
  std::vector<Split> split;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::vector<std::size_t> indices_of(Split s) const;
  std::size_t count_of(Split s) const;

  // Throws std::invalid_argument if any structural invariant is broken.
  void validate() const;
};

// Gaussian cluster task generator. shift = 0 reproduces the pretraining
// distribution exactly; larger shift rotates feature space and scrambles the
// cluster geometry, standing in for harder transfers.
struct SyntheticTaskSpec {
  uint64_t seed = 1;
  int classes = 5;
  int dim = 16;
  double shift = 0.0;  // in [0, 1]
  double separation = 4.0;
  double spread = 1.0;
};

// Cluster means of the task; shifted=false gives the pretraining geometry.
std::vector<std::vector<double>> task_means(const SyntheticTaskSpec& spec, bool shifted);

// Draws `shots` training examples per class plus `test_per_class` test
// examples per class from the downstream (shifted) distribution.
FewShotDataset sample_few_shot(const SyntheticTaskSpec& spec, int shots, int test_per_class,
                               uint64_t sample_seed);

// Draws the pretraining (source) dataset: per_class examples per class from
// the unshifted distribution, all tagged train.
FewShotDataset sample_source(const SyntheticTaskSpec& spec, int per_class, uint64_t sample_seed);

// Retags a fraction of the train examples as validation, stratified by class.
// Falls back to leaving a class entirely in train when it has too few
// examples to split.
void stratified_holdout(FewShotDataset& data, double val_fraction, uint64_t seed);

}  // namespace fewdp
