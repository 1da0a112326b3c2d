#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fewdp/accountant.hpp"
#include "fewdp/dataset.hpp"
#include "fewdp/model.hpp"
#include "fewdp/protocol.hpp"

namespace fewdp {

class UndefinedMetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class VarianceMode { per_example, pooled };
VarianceMode variance_mode_from_name(std::string_view name);
const char* variance_mode_name(VarianceMode v);

// Fixed hyperparameters shared by the target and every shadow model.
struct AttackTrainerConfig {
  HyperChoice hp;
  OptimizerKind optimizer = OptimizerKind::adam;
  ParamMode mode = ParamMode::head;
  std::optional<double> epsilon;  // nullopt: non-private
  std::optional<double> delta;    // default 1 / |D|
  AccountantKind accountant = AccountantKind::rdp;
};

struct ShadowPopulation {
  FewShotDataset pool;                         // 2|D| candidate examples
  std::vector<ModelState> models;              // target + shadows
  std::vector<std::vector<uint8_t>> in_mask;   // models x pool
  double sigma = 0.0;                          // calibrated for the nominal |D|
  double delta = 0.0;
  std::optional<double> epsilon;
};

// Trains 1 + shadows models on independent 50% subsets of a 2|D| pool drawn
// from the task (|D| = classes * shots). Every pool example is guaranteed at
// least two IN and two OUT models; deficient columns are resampled.
ShadowPopulation build_population(const SyntheticTaskSpec& task, const ModelState& pretrained,
                                  int shots, int shadows, const AttackTrainerConfig& cfg,
                                  uint64_t seed);

// log(p_true / (1 - p_true)), clamped to +/-40.
double logit_confidence(const ModelState& model, std::span<const double> x, int y);

// log N(observed; mu_in, s_in^2) - log N(observed; mu_out, s_out^2)
double lira_score(std::span<const double> in_conf, std::span<const double> out_conf,
                  double observed, VarianceMode vm = VarianceMode::per_example,
                  double var_floor = 1e-3);

struct RocSummary {
  double tpr_at_fpr_1e3 = 0.0;
  double tpr_at_fpr_1e2 = 0.0;
  double tpr_at_fpr_1e1 = 0.0;
  double auc = 0.0;
  double advantage = 0.0;  // max over thresholds of TPR - FPR
};

// Threshold sweep over unique scores; TPR at an FPR target is the best TPR
// among operating points with FPR <= target; AUC by trapezoid.
RocSummary roc_metrics(std::span<const std::pair<double, int>> pairs);

// Full ROC polyline from (0,0) to (1,1) for plotting.
std::vector<std::pair<double, double>> roc_curve(std::span<const std::pair<double, int>> pairs);

struct AttackRecord {
  std::vector<std::pair<double, int>> pairs;  // (score, membership)
  RocSummary summary;
};

// Scores every pool example against every model treated as target, using the
// remaining models' IN/OUT confidences, and pools all pairs into one ROC.
AttackRecord attack_all(const ShadowPopulation& pop,
                        VarianceMode vm = VarianceMode::per_example);

}  // namespace fewdp
