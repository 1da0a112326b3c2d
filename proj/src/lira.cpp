#include "fewdp/lira.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fewdp/dp_optim.hpp"
#include "fewdp/threading.hpp"

namespace fewdp {

VarianceMode variance_mode_from_name(std::string_view name) {
  if (name == "per_example") return VarianceMode::per_example;
  if (name == "pooled") return VarianceMode::pooled;
  throw std::invalid_argument("unknown variance mode: " + std::string(name));
}

const char* variance_mode_name(VarianceMode v) {
  return v == VarianceMode::per_example ? "per_example" : "pooled";
}

double logit_confidence(const ModelState& model, std::span<const double> x, int y) {
  const auto probs = forward(model, x);
  const double p = probs[static_cast<std::size_t>(y)];
  if (p <= 0.0) return -40.0;
  if (p >= 1.0) return 40.0;
  const double l = std::log(p / (1.0 - p));
  return std::clamp(l, -40.0, 40.0);
}

ShadowPopulation build_population(const SyntheticTaskSpec& task, const ModelState& pretrained,
                                  int shots, int shadows, const AttackTrainerConfig& cfg,
                                  uint64_t seed) {
  if (shadows < 2) throw std::invalid_argument("build_population: need at least 2 shadow models");
  ShadowPopulation pop;
  pop.pool = sample_few_shot(task, 2 * shots, 0, seed ^ 0x4D49412DULL);
  const std::size_t pool_n = pop.pool.size();
  const std::size_t n_models = static_cast<std::size_t>(shadows) + 1;

  // Independent 50% membership per (model, example); columns with fewer than
  // two IN or OUT models are resampled so every example can be scored with
  // the target excluded.
  pop.in_mask.assign(n_models, std::vector<uint8_t>(pool_n, 0));
  for (std::size_t e = 0; e < pool_n; ++e) {
    Philox rng = Philox::stream(seed, "mia-mask", e);
    for (;;) {
      std::size_t in = 0;
      for (std::size_t m = 0; m < n_models; ++m) {
        const uint8_t bit = rng.next_double() < 0.5 ? 1 : 0;
        pop.in_mask[m][e] = bit;
        in += bit;
      }
      if (in >= 2 && n_models - in >= 2) break;
    }
  }

  const double d_size = static_cast<double>(task.classes) * shots;  // nominal |D|
  pop.delta = cfg.delta.value_or(1.0 / d_size);
  pop.epsilon = cfg.epsilon;
  std::optional<PrivacySpec> privacy;
  if (cfg.epsilon.has_value() && std::isfinite(*cfg.epsilon)) {
    const double b = std::min<double>(cfg.hp.batch, d_size);
    const double q = b / d_size;
    const long steps =
        static_cast<long>(cfg.hp.epochs) * steps_per_epoch(static_cast<std::size_t>(d_size), b);
    PrivacySpec ps;
    ps.epsilon = *cfg.epsilon;
    ps.delta = pop.delta;
    ps.clip = cfg.hp.clip;
    ps.q = q;
    ps.steps = steps;
    ps.sigma = calibrate_sigma(PrivacyBudget{*cfg.epsilon, pop.delta}, q, steps, cfg.accountant);
    pop.sigma = ps.sigma;
    privacy = ps;
  }

  pop.models.assign(n_models, ModelState{});
  parallel_for(n_models, 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t m = b; m < e; ++m) {
      std::vector<std::size_t> train_idx;
      for (std::size_t i = 0; i < pool_n; ++i)
        if (pop.in_mask[m][i]) train_idx.push_back(i);
      ModelState model = pretrained;
      model.mode = cfg.mode;
      zero_head(model);
      DpOptimConfig oc;
      oc.clip = cfg.hp.clip;
      oc.lr = cfg.hp.lr;
      oc.epochs = cfg.hp.epochs;
      oc.expected_batch = cfg.hp.batch;
      oc.optimizer = cfg.optimizer;
      train(model, pop.pool, train_idx, oc, privacy,
            Philox::mix64(seed ^ 0x73686164ULL) + m);
      pop.models[m] = std::move(model);
    }
  });
  return pop;
}

double lira_score(std::span<const double> in_conf, std::span<const double> out_conf,
                  double observed, VarianceMode vm, double var_floor) {
  if (in_conf.empty() || out_conf.empty())
    throw std::invalid_argument("lira_score: confidence lists must be non-empty");
  auto mean_of = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto var_of = [](std::span<const double> v, double mu) {
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size());
  };
  const double mu_in = mean_of(in_conf);
  const double mu_out = mean_of(out_conf);
  double v_in, v_out;
  if (vm == VarianceMode::pooled) {
    const double pooled =
        (var_of(in_conf, mu_in) * static_cast<double>(in_conf.size()) +
         var_of(out_conf, mu_out) * static_cast<double>(out_conf.size())) /
        static_cast<double>(in_conf.size() + out_conf.size());
    v_in = v_out = std::max(pooled, var_floor);
  } else {
    v_in = std::max(var_of(in_conf, mu_in), var_floor);
    v_out = std::max(var_of(out_conf, mu_out), var_floor);
  }
  auto log_pdf = [](double x, double mu, double var) {
    return -0.5 * std::log(var) - 0.5 * (x - mu) * (x - mu) / var;
  };
  return log_pdf(observed, mu_in, v_in) - log_pdf(observed, mu_out, v_out);
}

AttackRecord attack_all(const ShadowPopulation& pop, VarianceMode vm) {
  const std::size_t n_models = pop.models.size();
  const std::size_t pool_n = pop.pool.size();
  if (n_models < 3) throw std::invalid_argument("attack_all: population too small");

  // confidences of every model on every pool example
  std::vector<double> conf(n_models * pool_n);
  parallel_for(n_models, 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t m = b; m < e; ++m)
      for (std::size_t i = 0; i < pool_n; ++i)
        conf[m * pool_n + i] =
            logit_confidence(pop.models[m], pop.pool.row(i), pop.pool.labels[i]);
  });

  AttackRecord rec;
  rec.pairs.reserve(n_models * pool_n);
  std::vector<double> in_list, out_list;
  for (std::size_t target = 0; target < n_models; ++target) {
    for (std::size_t i = 0; i < pool_n; ++i) {
      in_list.clear();
      out_list.clear();
      for (std::size_t m = 0; m < n_models; ++m) {
        if (m == target) continue;
        (pop.in_mask[m][i] ? in_list : out_list).push_back(conf[m * pool_n + i]);
      }
      const double s = lira_score(in_list, out_list, conf[target * pool_n + i], vm);
      rec.pairs.emplace_back(s, pop.in_mask[target][i] ? 1 : 0);
    }
  }
  rec.summary = roc_metrics(rec.pairs);
  return rec;
}

namespace {

struct SweepPoint {
  double fpr, tpr;
};

std::vector<SweepPoint> roc_sweep(std::span<const std::pair<double, int>> pairs) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& [s, m] : pairs) (m ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetricError("roc_metrics: need at least one member and one non-member");
  std::vector<std::pair<double, int>> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second > b.second;
  });
  std::vector<SweepPoint> pts;
  pts.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == s) {
      (sorted[i].second ? tp : fp) += 1;
      ++i;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return pts;
}

}  // namespace

RocSummary roc_metrics(std::span<const std::pair<double, int>> pairs) {
  const auto pts = roc_sweep(pairs);
  RocSummary out;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  for (const auto& p : pts) {
    out.auc += 0.5 * (p.tpr + prev_tpr) * (p.fpr - prev_fpr);
    out.advantage = std::max(out.advantage, p.tpr - p.fpr);
    if (p.fpr <= 1e-3) out.tpr_at_fpr_1e3 = std::max(out.tpr_at_fpr_1e3, p.tpr);
    if (p.fpr <= 1e-2) out.tpr_at_fpr_1e2 = std::max(out.tpr_at_fpr_1e2, p.tpr);
    if (p.fpr <= 1e-1) out.tpr_at_fpr_1e1 = std::max(out.tpr_at_fpr_1e1, p.tpr);
    prev_fpr = p.fpr;
    prev_tpr = p.tpr;
  }
  return out;
}

std::vector<std::pair<double, double>> roc_curve(std::span<const std::pair<double, int>> pairs) {
  const auto pts = roc_sweep(pairs);
  std::vector<std::pair<double, double>> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.emplace_back(p.fpr, p.tpr);
  return out;
}

}  // namespace fewdp
