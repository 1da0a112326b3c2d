#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fewdp/dataset.hpp"
#include "fewdp/fedsim.hpp"
#include "fewdp/lira.hpp"
#include "fewdp/protocol.hpp"

namespace fewdp {

// Carries every violation found, not just the first.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

struct TaskConfig {
  uint64_t task_seed = 1;
  int classes = 5;
  int dim = 16;
  double shift = 0.0;
  double separation = 4.0;
  double spread = 1.0;
  int hidden = 20;
  int feature_dim = 16;
  PretrainConfig pretrain;

  SyntheticTaskSpec spec() const {
    return SyntheticTaskSpec{task_seed, classes, dim, shift, separation, spread};
  }
};

struct AccountRequest {
  std::string accountant = "both";  // rdp | prv | both
  double sigma = 1.0;
  double q = 0.01;
  long steps = 1;
  double delta = 1e-5;
  std::optional<double> calibrate_epsilon;  // replaces sigma when present
  std::optional<double> recompute_delta;    // extra row at this delta
};

struct TrainRequest {
  int shots = 10;
  ParamMode mode = ParamMode::head;
  std::optional<double> epsilon;
  std::optional<double> delta;
  HyperChoice hyper;
  OptimizerKind optimizer = OptimizerKind::adam;
  int test_per_class = 200;
};

struct SweepRequest {
  std::vector<int> shots{5, 25, 100};
  std::vector<double> epsilons{std::numeric_limits<double>::infinity()};
  std::vector<ParamMode> modes{ParamMode::head};
  int seeds = 3;
  int tuner_budget = 20;
  TunerKind tuner = TunerKind::random_search;
  int test_per_class = 200;
  std::optional<double> delta;
};

struct AttackRequest {
  int shots = 4;
  ParamMode mode = ParamMode::head;
  std::optional<double> epsilon;
  std::optional<double> delta;
  int shadows = 32;
  HyperChoice hyper;
  OptimizerKind optimizer = OptimizerKind::adam;
  VarianceMode variance = VarianceMode::per_example;
  bool roc_svg = true;
};

struct AnalyzeRequest {
  std::optional<std::pair<double, double>> td;  // acc_all, acc_head
  struct Multiplier {
    std::vector<std::pair<double, double>> np_curve, dp_curve;
    double s_ref = 5;
  };
  std::optional<Multiplier> multiplier;
  std::optional<std::pair<double, double>> regime;  // train, test
};

struct WorkbenchConfig {
  std::string kind;
  uint64_t seed = 1;
  std::string out = "out";
  int threads = 1;

  TaskConfig task;
  AccountRequest account;
  TrainRequest train;
  SweepRequest sweep;
  AttackRequest attack;
  FedConfig fed;
  AnalyzeRequest analyze;
};

// Parses and validates; fills defaults; rejects unknown keys. Throws
// ValidationError listing every violation.
WorkbenchConfig parse_config(const nlohmann::json& j);
WorkbenchConfig load_config(const std::string& path);

// Fully resolved config (defaults filled); load(resolved_json(c)) == c.
nlohmann::json resolved_json(const WorkbenchConfig& c);

}  // namespace fewdp
