#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fewdp/protocol.hpp"
#include "fewdp/rng.hpp"

using namespace fewdp;

namespace {
double round1(double v) { return std::round(v * 10.0) / 10.0; }
}

TEST_CASE("transfer difficulty reproduces the reference table rows") {
  CHECK(round1(transfer_difficulty(91.6, 43.1)) == 52.9);
  CHECK(td_bucket(transfer_difficulty(91.6, 43.1)) == TdBucket::high);
  CHECK(round1(transfer_difficulty(84.2, 77.6)) == 7.8);
  CHECK(td_bucket(transfer_difficulty(84.2, 77.6)) == TdBucket::medium);
  CHECK(transfer_difficulty(55.0, 55.0) == 0.0);
  CHECK(td_bucket(0.0) == TdBucket::low);
  CHECK_THROWS_AS(transfer_difficulty(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(transfer_difficulty(-3.0, 1.0), std::invalid_argument);
}

TEST_CASE("bucket boundaries go to the lower bucket") {
  CHECK(td_bucket(5.0) == TdBucket::low);
  CHECK(td_bucket(std::nextafter(5.0, 6.0)) == TdBucket::medium);
  CHECK(td_bucket(10.0) == TdBucket::medium);
  CHECK(td_bucket(std::nextafter(10.0, 11.0)) == TdBucket::high);
}

TEST_CASE("shot multiplier reproduces the hand-interpolated value") {
  const std::vector<std::pair<double, double>> np{{5, 74.8}, {10, 90.7}};
  const std::vector<std::pair<double, double>> dp{{25, 56.6}, {50, 81.5}};
  const auto res = shot_multiplier(np, dp, 5);
  CHECK(!res.exceeds_grid);
  CHECK(res.multiplier == doctest::Approx(8.6546).epsilon(1e-3));
  CHECK(std::fabs(res.multiplier - 8.65) <= 0.01);
}

TEST_CASE("identical curves give multiplier one") {
  const std::vector<std::pair<double, double>> curve{{1, 10}, {5, 40}, {10, 60}, {50, 80}};
  for (double s_ref : {5.0, 10.0}) {
    const auto res = shot_multiplier(curve, curve, s_ref);
    CHECK(res.multiplier == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dp curve already above target clamps at the grid start") {
  const std::vector<std::pair<double, double>> np{{5, 20.0}};
  const std::vector<std::pair<double, double>> dp{{25, 56.6}, {50, 81.5}};
  const auto res = shot_multiplier(np, dp, 5);
  CHECK(res.clamped_at_grid_start);
  CHECK(res.min_shots == 25);
  CHECK(res.multiplier <= 25.0 / 5.0);
}

TEST_CASE("dp stronger than non-private clamps the multiplier to one") {
  const std::vector<std::pair<double, double>> np{{5, 30.0}};
  const std::vector<std::pair<double, double>> dp{{1, 50.0}, {10, 80.0}};
  const auto res = shot_multiplier(np, dp, 5);
  CHECK(res.clamped_to_one);
  CHECK(res.multiplier == 1.0);
}

TEST_CASE("unreachable accuracy is flagged as exceeding the grid") {
  const std::vector<std::pair<double, double>> np{{5, 95.0}};
  const std::vector<std::pair<double, double>> dp{{25, 56.6}, {50, 81.5}};
  const auto res = shot_multiplier(np, dp, 5);
  CHECK(res.exceeds_grid);
}

TEST_CASE("missing s_ref and empty curves are input errors") {
  const std::vector<std::pair<double, double>> np{{5, 74.8}};
  const std::vector<std::pair<double, double>> dp{{25, 56.6}, {50, 81.5}};
  CHECK_THROWS_AS(shot_multiplier(np, dp, 7), std::invalid_argument);
  CHECK_THROWS_AS(shot_multiplier({}, dp, 5), std::invalid_argument);
  CHECK_THROWS_AS(shot_multiplier(np, {}, 5), std::invalid_argument);
}

TEST_CASE("shot multiplier is scale consistent") {
  Philox rng = Philox::stream(3, "curves", 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::pair<double, double>> np, dp;
    double s = 1.0;
    for (int i = 0; i < 6; ++i) {
      np.emplace_back(s, 30.0 + 60.0 * rng.next_double());
      dp.emplace_back(s, 20.0 + 60.0 * rng.next_double());
      s *= 2.0;
    }
    np[0].second = 10.0;  // keep the target reachable sometimes
    const double s_ref = np[2].first;
    const auto base = shot_multiplier(np, dp, s_ref);
    const double k = 3.0;
    auto np_k = np, dp_k = dp;
    for (auto& [x, y] : np_k) x *= k;
    for (auto& [x, y] : dp_k) x *= k;
    const auto scaled = shot_multiplier(np_k, dp_k, s_ref * k);
    CHECK(scaled.exceeds_grid == base.exceeds_grid);
    if (!base.exceeds_grid) {
      CHECK(scaled.min_shots == doctest::Approx(base.min_shots * k).epsilon(1e-9));
      CHECK(scaled.multiplier == doctest::Approx(base.multiplier).epsilon(1e-9));
    }
  }
}

TEST_CASE("regime report") {
  const auto a = regime_report(1.00, 0.60);
  CHECK(a.gap == doctest::Approx(0.40));
  CHECK(a.regime == Regime::interpolating);
  const auto b = regime_report(0.55, 0.52);
  CHECK(b.gap == doctest::Approx(0.03));
  CHECK(b.regime == Regime::regularized);
  CHECK_THROWS_AS(regime_report(1.2, 0.5), std::invalid_argument);
}

TEST_CASE("median is order independent") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({1.0, 2.0, 3.0}) == 2.0);
  CHECK(median({4.0, 1.0}) == doctest::Approx(2.5));
  CHECK(std::isnan(median({})));
}

TEST_CASE("sweep medians ignore seed order") {
  SweepResult fwd, rev;
  for (int s = 0; s < 3; ++s) {
    CellOutcome row;
    row.shots = 10;
    row.epsilon = 2.0;
    row.mode = ParamMode::film;
    row.seed = static_cast<uint64_t>(s);
    row.test_accuracy = 0.5 + 0.1 * s;
    fwd.rows.push_back(row);
  }
  rev.rows.assign(fwd.rows.rbegin(), fwd.rows.rend());
  CHECK(fwd.median_test(10, 2.0, ParamMode::film) == rev.median_test(10, 2.0, ParamMode::film));
}

TEST_CASE("protocol respects the tuner budget and the delta convention") {
  SyntheticTaskSpec task;
  task.seed = 3;
  task.classes = 3;
  task.dim = 8;
  PretrainConfig pc;
  pc.hidden = 8;
  pc.feature_dim = 6;
  pc.per_class = 50;
  pc.epochs = 15;
  const ModelState backbone = pretrain_backbone(task, pc);

  ProtocolOptions opts;
  opts.tuner_budget = 5;
  opts.test_per_class = 30;
  opts.ranges.epochs_hi = 30;  // keep the unit test quick
  const auto cell = run_protocol(task, backbone, 10, ParamMode::head, std::nullopt, 11, opts);
  CHECK(cell.tuner_trials == 5);
  CHECK(cell.delta == doctest::Approx(1.0 / 30.0));
  CHECK(cell.test_accuracy >= 0.0);
  CHECK(cell.test_accuracy <= 1.0);
  CHECK(cell.steps > 0);

  opts.delta_override = 1e-5;
  const auto cell2 = run_protocol(task, backbone, 10, ParamMode::head, 4.0, 11, opts);
  CHECK(cell2.delta == 1e-5);
  CHECK(cell2.sigma > 0.0);
}

TEST_CASE("parzen tuner stays within budget and ranges") {
  SyntheticTaskSpec task;
  task.seed = 4;
  task.classes = 3;
  task.dim = 8;
  PretrainConfig pc;
  pc.hidden = 8;
  pc.feature_dim = 6;
  pc.per_class = 40;
  pc.epochs = 10;
  const ModelState backbone = pretrain_backbone(task, pc);
  ProtocolOptions opts;
  opts.tuner = TunerKind::parzen;
  opts.tuner_budget = 12;
  opts.test_per_class = 20;
  opts.ranges.epochs_hi = 25;
  const auto cell = run_protocol(task, backbone, 8, ParamMode::head, std::nullopt, 5, opts);
  CHECK(cell.tuner_trials == 12);
  CHECK(cell.chosen.epochs >= 1);
  CHECK(cell.chosen.epochs <= 25);
  CHECK(cell.chosen.lr >= 1e-7);
  CHECK(cell.chosen.lr <= 1e-2);
  CHECK(cell.chosen.clip >= 0.2);
  CHECK(cell.chosen.clip <= 10.0);
}
