#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fewdp/dataset.hpp"
#include "fewdp/model.hpp"
#include "fewdp/rng.hpp"

namespace fewdp {

enum class OptimizerKind { sgd, adam };
const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(std::string_view name);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct DpOptimConfig {
  double clip = 1.0;            // l2 clipping bound
  double sigma = 0.0;           // noise multiplier
  double expected_batch = 10;   // B; q = B / |split|
  double lr = 0.01;
  OptimizerKind optimizer = OptimizerKind::sgd;
  AdamParams adam;
  int epochs = 1;
  bool check_clip = false;      // debug accumulation: assert post-clip norms

  void validate() const;
};

// Calibrated privacy parameters attached to a training run.
struct PrivacySpec {
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;  // noise multiplier; 0 means not calibrated
  double clip = 0.0;
  double q = 0.0;
  long steps = 0;
};

// Each candidate index kept independently with probability q.
std::vector<std::size_t> poisson_batch(std::span<const std::size_t> candidates, double q,
                                       Philox& rng);

// g * min(1, clip / ||g||2); zero vector passes through.
std::vector<double> clip_grad(std::vector<double> g, double clip);

struct OptimizerState {
  std::vector<double> m1, m2;
  long t = 0;
};

struct StepDiag {
  std::size_t realized_batch = 0;
  double max_clipped_norm = 0.0;
};

// One DP-SGD/DP-Adam step: privatized gradient
//   (sum_i clip(g_i) + N(0, sigma^2 clip^2 I)) / B
// applied to the trainable subset only. Empty batches still inject noise.
StepDiag dp_step(ModelState& model, const FewShotDataset& data,
                 std::span<const std::size_t> batch, const DpOptimConfig& cfg,
                 OptimizerState& opt, Philox& noise_rng);

struct TrainResult {
  long steps = 0;  // realized T for accounting
};

// Private: Poisson batches of expected size B, clip+noise per dp_step.
// Non-private (privacy == nullopt): shuffled mini-batches, plain mean
// gradient, no clipping or noise.
TrainResult train(ModelState& model, const FewShotDataset& data,
                  std::span<const std::size_t> train_indices, const DpOptimConfig& cfg,
                  const std::optional<PrivacySpec>& privacy, uint64_t seed);
TrainResult train(ModelState& model, const FewShotDataset& data, Split split,
                  const DpOptimConfig& cfg, const std::optional<PrivacySpec>& privacy,
                  uint64_t seed);

// Steps per epoch the trainer will realize for a split of size n.
long steps_per_epoch(std::size_t n, double expected_batch);

}  // namespace fewdp
