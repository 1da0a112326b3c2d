#include "fewdp/protocol.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fewdp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TunerKind tuner_from_name(std::string_view name) {
  if (name == "random") return TunerKind::random_search;
  if (name == "parzen") return TunerKind::parzen;
  throw std::invalid_argument("unknown tuner: " + std::string(name));
}

const char* tuner_name(TunerKind k) {
  return k == TunerKind::random_search ? "random" : "parzen";
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double SweepResult::median_test(int shots, double epsilon, ParamMode mode) const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.shots == shots && r.mode == mode &&
        ((std::isinf(epsilon) && std::isinf(r.epsilon)) || r.epsilon == epsilon))
      v.push_back(r.test_accuracy);
  return median(std::move(v));
}

double SweepResult::median_train(int shots, double epsilon, ParamMode mode) const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.shots == shots && r.mode == mode &&
        ((std::isinf(epsilon) && std::isinf(r.epsilon)) || r.epsilon == epsilon))
      v.push_back(r.train_accuracy);
  return median(std::move(v));
}

ModelState pretrain_backbone(const SyntheticTaskSpec& task, const PretrainConfig& cfg) {
  const FewShotDataset src = sample_source(task, cfg.per_class, task.seed ^ 0x5052455452ULL);
  ModelState model =
      make_model(task.dim, cfg.hidden, cfg.feature_dim, task.classes, ParamMode::all, task.seed);
  DpOptimConfig opt;
  opt.lr = cfg.lr;
  opt.expected_batch = cfg.batch;
  opt.epochs = cfg.epochs;
  opt.optimizer = OptimizerKind::adam;
  train(model, src, Split::train, opt, std::nullopt, task.seed ^ 0x42414B424F4EULL);
  fold_film(model);
  zero_head(model);
  return model;
}

namespace {

struct Trial {
  HyperChoice hp;
  double val_acc = -1.0;
};

HyperChoice sample_uniform(const HyperRanges& r, int batch_hi, Philox& rng) {
  HyperChoice hp;
  hp.epochs = r.epochs_lo + static_cast<int>(rng.next_below(
                  static_cast<uint64_t>(r.epochs_hi - r.epochs_lo + 1)));
  hp.lr = rng.log_uniform(r.lr_lo, r.lr_hi);
  const int blo = std::min(r.batch_lo, batch_hi);
  hp.batch = static_cast<int>(std::lround(rng.log_uniform(blo, batch_hi)));
  hp.batch = std::clamp(hp.batch, blo, batch_hi);
  hp.clip = rng.log_uniform(r.clip_lo, r.clip_hi);
  return hp;
}

// Parzen-style proposal: perturb a randomly chosen top-quartile trial in the
// tuner's transformed space, rank a small candidate pool by the ratio of
// good/bad kernel densities, and return the best.
HyperChoice sample_parzen(const HyperRanges& r, int batch_hi, std::vector<Trial>& history,
                          Philox& rng) {
  std::vector<const Trial*> ranked;
  for (const auto& t : history)
    if (t.val_acc >= 0.0) ranked.push_back(&t);
  if (ranked.size() < 8) return sample_uniform(r, batch_hi, rng);
  std::sort(ranked.begin(), ranked.end(),
            [](const Trial* a, const Trial* b) { return a->val_acc > b->val_acc; });
  const std::size_t n_good = std::max<std::size_t>(2, ranked.size() / 4);

  const int blo = std::min(r.batch_lo, batch_hi);
  auto to_vec = [&](const HyperChoice& hp) {
    return std::array<double, 4>{static_cast<double>(hp.epochs), std::log(hp.lr),
                                 std::log(static_cast<double>(hp.batch)), std::log(hp.clip)};
  };
  const std::array<double, 4> width{static_cast<double>(r.epochs_hi - r.epochs_lo),
                                    std::log(r.lr_hi) - std::log(r.lr_lo),
                                    std::max(1e-9, std::log(static_cast<double>(batch_hi)) -
                                                       std::log(static_cast<double>(blo))),
                                    std::log(r.clip_hi) - std::log(r.clip_lo)};
  auto kernel = [&](const std::array<double, 4>& a, const std::array<double, 4>& b,
                    double bw_scale) {
    double s = 0.0;
    for (int d = 0; d < 4; ++d) {
      const double bw = std::max(1e-9, width[static_cast<std::size_t>(d)] * bw_scale);
      const double z = (a[static_cast<std::size_t>(d)] - b[static_cast<std::size_t>(d)]) / bw;
      s += -0.5 * z * z;
    }
    return std::exp(s);
  };

  HyperChoice best{};
  double best_ratio = -1.0;
  for (int cand = 0; cand < 24; ++cand) {
    const Trial* anchor = ranked[rng.next_below(n_good)];
    HyperChoice hp = anchor->hp;
    hp.epochs = std::clamp(
        hp.epochs + static_cast<int>(std::lround(rng.next_gaussian() * 0.15 * width[0])),
        r.epochs_lo, r.epochs_hi);
    hp.lr = std::clamp(std::exp(std::log(hp.lr) + rng.next_gaussian() * 0.15 * width[1]), r.lr_lo,
                       r.lr_hi);
    hp.batch = std::clamp(static_cast<int>(std::lround(std::exp(
                   std::log(static_cast<double>(hp.batch)) + rng.next_gaussian() * 0.15 * width[2]))),
                blo, batch_hi);
    hp.clip = std::clamp(std::exp(std::log(hp.clip) + rng.next_gaussian() * 0.15 * width[3]),
                         r.clip_lo, r.clip_hi);
    const auto v = to_vec(hp);
    double good = 1e-12, bad = 1e-12;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const double k = kernel(v, to_vec(ranked[i]->hp), 0.25);
      if (i < n_good) good += k;
      else bad += k;
    }
    const double ratio = (good / static_cast<double>(n_good)) /
                         (bad / static_cast<double>(std::max<std::size_t>(1, ranked.size() - n_good)));
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = hp;
    }
  }
  return best;
}

struct TrainedEval {
  double accuracy = 0.0;
  long steps = 0;
  double sigma = 0.0;
  bool ok = false;
};

TrainedEval train_and_eval(const FewShotDataset& data, std::span<const std::size_t> train_idx,
                           std::span<const std::size_t> eval_idx, const ModelState& pretrained,
                           ParamMode mode, const HyperChoice& hp, std::optional<double> epsilon,
                           double delta, const ProtocolOptions& opts, uint64_t seed,
                           ModelState* out_model) {
  TrainedEval ev;
  ModelState model = pretrained;
  model.mode = mode;
  model.classes = pretrained.classes;
  zero_head(model);

  DpOptimConfig cfg;
  cfg.clip = hp.clip;
  cfg.lr = hp.lr;
  cfg.epochs = hp.epochs;
  cfg.expected_batch = std::min<double>(hp.batch, static_cast<double>(train_idx.size()));
  cfg.optimizer = opts.optimizer;

  std::optional<PrivacySpec> privacy;
  if (epsilon.has_value() && std::isfinite(*epsilon)) {
    const double q = cfg.expected_batch / static_cast<double>(train_idx.size());
    const long steps = static_cast<long>(hp.epochs) * steps_per_epoch(train_idx.size(), cfg.expected_batch);
    PrivacySpec ps;
    ps.epsilon = *epsilon;
    ps.delta = delta;
    ps.clip = hp.clip;
    ps.q = q;
    ps.steps = steps;
    try {
      ps.sigma = calibrate_sigma(PrivacyBudget{*epsilon, delta}, q, steps, opts.accountant);
    } catch (const CalibrationError&) {
      return ev;  // candidate unusable at this budget
    }
    ev.sigma = ps.sigma;
    privacy = ps;
  }
  const TrainResult tr = train(model, data, train_idx, cfg, privacy, seed);
  ev.steps = tr.steps;
  ev.accuracy = accuracy(model, data, eval_idx);
  ev.ok = true;
  if (out_model) *out_model = std::move(model);
  return ev;
}

}  // namespace

CellOutcome run_protocol(const SyntheticTaskSpec& task, const ModelState& pretrained, int shots,
                         ParamMode mode, std::optional<double> epsilon, uint64_t seed,
                         const ProtocolOptions& opts) {
  if (shots < 1) throw std::invalid_argument("run_protocol: shots must be >= 1");
  FewShotDataset data = sample_few_shot(task, shots, opts.test_per_class, seed);
  const std::size_t d_size = data.count_of(Split::train);
  const double delta =
      opts.delta_override.value_or(1.0 / static_cast<double>(d_size));

  // 70/30 tuning split (stratified)
  FewShotDataset tuning = data;
  stratified_holdout(tuning, opts.val_fraction, seed);
  const auto tune_train = tuning.indices_of(Split::train);
  const auto tune_val = tuning.indices_of(Split::val);
  const auto full_train = data.indices_of(Split::train);
  const auto test_idx = data.indices_of(Split::test);

  // tuning must never see the test split
  {
    std::vector<char> is_test(data.size(), 0);
    for (auto i : test_idx) is_test[i] = 1;
    for (auto i : tune_train)
      if (is_test[i]) throw std::logic_error("run_protocol: tuning split overlaps test");
    for (auto i : tune_val)
      if (is_test[i]) throw std::logic_error("run_protocol: validation split overlaps test");
  }

  const int batch_hi = static_cast<int>(d_size);
  std::vector<Trial> history;
  Philox tuner_rng = Philox::stream(seed, "tuner", task.seed);
  HyperChoice best_hp;
  double best_val = -1.0;
  int trials = 0;
  const std::span<const std::size_t> tr_idx =
      tune_val.empty() ? std::span<const std::size_t>(full_train) : std::span<const std::size_t>(tune_train);
  const std::span<const std::size_t> va_idx =
      tune_val.empty() ? std::span<const std::size_t>(full_train) : std::span<const std::size_t>(tune_val);
  for (int t = 0; t < opts.tuner_budget; ++t) {
    HyperChoice hp = opts.tuner == TunerKind::parzen
                         ? sample_parzen(opts.ranges, batch_hi, history, tuner_rng)
                         : sample_uniform(opts.ranges, batch_hi, tuner_rng);
    const TrainedEval ev = train_and_eval(tuning, tr_idx, va_idx, pretrained, mode, hp, epsilon,
                                          delta, opts, seed + 7919 * static_cast<uint64_t>(t + 1),
                                          nullptr);
    ++trials;
    history.push_back(Trial{hp, ev.ok ? ev.accuracy : -1.0});
    if (ev.ok && ev.accuracy > best_val) {
      best_val = ev.accuracy;
      best_hp = hp;
    }
  }

  // retrain the winning configuration on all of D
  ModelState final_model;
  const TrainedEval fin = train_and_eval(data, full_train, test_idx, pretrained, mode, best_hp,
                                         epsilon, delta, opts, seed, &final_model);
  CellOutcome out;
  out.shots = shots;
  out.epsilon = epsilon.has_value() ? *epsilon : kInf;
  out.mode = mode;
  out.seed = seed;
  out.test_accuracy = fin.accuracy;
  out.train_accuracy = accuracy(final_model, data, full_train);
  out.steps = fin.steps;
  out.sigma = fin.sigma;
  out.delta = delta;
  out.chosen = best_hp;
  out.tuner_trials = trials;
  return out;
}

double transfer_difficulty(double acc_all, double acc_head) {
  if (!(acc_all > 0.0)) throw std::invalid_argument("transfer_difficulty: acc_all must be > 0");
  return 100.0 * (acc_all - acc_head) / acc_all;
}

const char* td_bucket_name(TdBucket b) {
  switch (b) {
    case TdBucket::low: return "low";
    case TdBucket::medium: return "medium";
    case TdBucket::high: return "high";
  }
  return "unknown";
}

TdBucket td_bucket(double score) {
  if (score <= 5.0) return TdBucket::low;
  if (score <= 10.0) return TdBucket::medium;
  return TdBucket::high;
}

ShotMultiplier shot_multiplier(std::span<const std::pair<double, double>> np_curve,
                               std::span<const std::pair<double, double>> dp_curve, double s_ref) {
  if (np_curve.empty() || dp_curve.empty())
    throw std::invalid_argument("shot_multiplier: curves must be non-empty");
  for (auto curve : {np_curve, dp_curve})
    for (std::size_t i = 0; i + 1 < curve.size(); ++i)
      if (curve[i + 1].first <= curve[i].first)
        throw std::invalid_argument("shot_multiplier: curves must be sorted by shots");
  double target = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [s, acc] : np_curve)
    if (s == s_ref) target = acc;
  if (std::isnan(target))
    throw std::invalid_argument("shot_multiplier: s_ref not present in the non-private curve");

  ShotMultiplier out;
  if (dp_curve.front().second >= target) {
    out.min_shots = dp_curve.front().first;
    out.clamped_at_grid_start = true;
  } else {
    bool found = false;
    for (std::size_t i = 0; i + 1 < dp_curve.size() && !found; ++i) {
      const auto [s0, a0] = dp_curve[i];
      const auto [s1, a1] = dp_curve[i + 1];
      if (a1 >= target && a1 != a0) {
        const double t = (target - a0) / (a1 - a0);
        out.min_shots = s0 + t * (s1 - s0);
        found = true;
      } else if (a1 >= target) {
        out.min_shots = s1;
        found = true;
      }
    }
    if (!found) {
      out.exceeds_grid = true;
      out.min_shots = kInf;
      out.multiplier = kInf;
      return out;
    }
  }
  out.multiplier = out.min_shots / s_ref;
  if (out.multiplier < 1.0) {
    out.multiplier = 1.0;
    out.clamped_to_one = true;
  }
  return out;
}

const char* regime_name(Regime r) {
  return r == Regime::interpolating ? "interpolating" : "regularized";
}

RegimeReport regime_report(double train_acc, double test_acc) {
  if (!(train_acc >= 0.0 && train_acc <= 1.0) || !(test_acc >= 0.0 && test_acc <= 1.0))
    throw std::invalid_argument("regime_report: accuracies must be in [0, 1]");
  RegimeReport rep;
  rep.gap = train_acc - test_acc;
  rep.regime = train_acc >= 0.99 ? Regime::interpolating : Regime::regularized;
  return rep;
}

}  // namespace fewdp
