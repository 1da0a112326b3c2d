#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "fewdp/accountant.hpp"
#include "fewdp/dataset.hpp"
#include "fewdp/dp_optim.hpp"
#include "fewdp/model.hpp"

namespace fewdp {

struct HyperRanges {
  int epochs_lo = 1, epochs_hi = 200;
  double lr_lo = 1e-7, lr_hi = 1e-2;  // log scale
  int batch_lo = 10;                  // upper bound is |D| at sample time
  double clip_lo = 0.2, clip_hi = 10.0;
};

struct HyperChoice {
  int epochs = 40;
  double lr = 1e-3;
  int batch = 10;
  double clip = 1.0;
};

enum class TunerKind { random_search, parzen };
TunerKind tuner_from_name(std::string_view name);
const char* tuner_name(TunerKind k);

struct ProtocolOptions {
  HyperRanges ranges;
  int tuner_budget = 20;
  TunerKind tuner = TunerKind::random_search;
  std::optional<double> delta_override;  // default: 1 / |D|
  int test_per_class = 200;
  AccountantKind accountant = AccountantKind::rdp;
  OptimizerKind optimizer = OptimizerKind::adam;
  double val_fraction = 0.3;
};

// One sweep cell: a (shots, epsilon, mode) configuration trained per seed.
struct CellOutcome {
  int shots = 0;
  double epsilon = 0.0;  // infinity for non-private
  ParamMode mode = ParamMode::head;
  uint64_t seed = 0;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  long steps = 0;
  double sigma = 0.0;
  double delta = 0.0;
  HyperChoice chosen;
  int tuner_trials = 0;
};

struct SweepResult {
  std::vector<CellOutcome> rows;
  // Median test accuracy over the seeds of a cell; NaN if the cell is empty.
  double median_test(int shots, double epsilon, ParamMode mode) const;
  double median_train(int shots, double epsilon, ParamMode mode) const;
};

double median(std::vector<double> values);

struct PretrainConfig {
  int hidden = 20;
  int feature_dim = 16;
  int per_class = 200;
  int epochs = 40;
  double lr = 2e-3;
  int batch = 40;
};

// Non-private full training on the unshifted source task, then the adapter
// sites are reset to identity and the head discarded. Depends only on the
// task, so every experiment seed sees the same backbone.
ModelState pretrain_backbone(const SyntheticTaskSpec& task, const PretrainConfig& cfg);

// Samples |D| = C*S, tunes on a 70/30 split under the given budget, retrains
// the best candidate on all of D, and evaluates on the held-out test split.
CellOutcome run_protocol(const SyntheticTaskSpec& task, const ModelState& pretrained, int shots,
                         ParamMode mode, std::optional<double> epsilon, uint64_t seed,
                         const ProtocolOptions& opts);

// 100 * (acc_all - acc_head) / acc_all
double transfer_difficulty(double acc_all, double acc_head);

enum class TdBucket { low, medium, high };
const char* td_bucket_name(TdBucket b);
// [0,5] low, (5,10] medium, (10, inf) high
TdBucket td_bucket(double score);

struct ShotMultiplier {
  double min_shots = 0.0;
  double multiplier = 0.0;
  bool clamped_at_grid_start = false;
  bool clamped_to_one = false;
  bool exceeds_grid = false;  // accuracy target never reached on the grid
};

// Minimum S on the linearly interpolated dp curve reaching the non-private
// accuracy at s_ref, divided by s_ref. Curves are (S, median accuracy) pairs
// sorted by S; non-monotone curves are allowed.
ShotMultiplier shot_multiplier(std::span<const std::pair<double, double>> np_curve,
                               std::span<const std::pair<double, double>> dp_curve, double s_ref);

enum class Regime { interpolating, regularized };
const char* regime_name(Regime r);

struct RegimeReport {
  double gap = 0.0;  // train - test
  Regime regime = Regime::regularized;
};

RegimeReport regime_report(double train_acc, double test_acc);

}  // namespace fewdp
