#include "fewdp/runner.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "fewdp/io.hpp"
#include "fewdp/lira.hpp"
#include "fewdp/threading.hpp"

namespace fewdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string eps_label(double e) { return std::isinf(e) ? "inf" : format_double(e); }

struct OutputWriter {
  std::string dir;
  std::string stem;
  RunOutputs* out;

  std::string path(const std::string& suffix) const { return dir + "/" + stem + suffix; }

  void csv(const std::string& suffix, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    const std::string p = path(suffix);
    write_csv(p, header, rows);
    out->files.push_back(p);
  }
  void json(const std::string& suffix, const nlohmann::json& j) {
    const std::string p = path(suffix);
    write_json(p, j);
    out->files.push_back(p);
  }
  void svg(const std::string& suffix, std::span<const PlotSeries> series, const PlotOptions& po) {
    const std::string p = path(suffix);
    emit_plot(series, po, p);
    out->files.push_back(p);
  }
};

void run_account(const WorkbenchConfig& cfg, OutputWriter& w, RunOutputs& out) {
  const auto& a = cfg.account;
  std::vector<AccountantKind> kinds;
  if (a.accountant == "rdp" || a.accountant == "both") kinds.push_back(AccountantKind::rdp);
  if (a.accountant == "prv" || a.accountant == "both") kinds.push_back(AccountantKind::prv);

  const std::vector<std::string> header{"accountant", "sigma", "q", "steps", "delta", "epsilon"};
  std::vector<std::vector<std::string>> rows;
  nlohmann::json entries = nlohmann::json::array();
  for (auto kind : kinds) {
    double sigma = a.sigma;
    if (a.calibrate_epsilon)
      sigma = calibrate_sigma(PrivacyBudget{*a.calibrate_epsilon, a.delta}, a.q, a.steps, kind);
    std::vector<double> deltas{a.delta};
    if (a.recompute_delta) deltas.push_back(*a.recompute_delta);
    for (double d : deltas) {
      const double eps = account_epsilon(kind, MechanismParams{sigma, a.q, a.steps}, d);
      rows.push_back({accountant_name(kind), format_double(sigma), format_double(a.q),
                      std::to_string(a.steps), format_double(d), format_double(eps)});
      entries.push_back({{"accountant", accountant_name(kind)},
                         {"sigma", sigma},
                         {"q", a.q},
                         {"steps", a.steps},
                         {"delta", d},
                         {"epsilon", eps}});
    }
  }
  w.csv("_table.csv", header, rows);
  out.summary = {{"kind", "account"}, {"rows", entries}};
  w.json("_summary.json", out.summary);
  out.stdout_text = to_csv(header, rows);
}

std::vector<std::string> outcome_row(const CellOutcome& r) {
  return {std::to_string(r.shots),       eps_label(r.epsilon),
          mode_name(r.mode),             std::to_string(r.seed),
          format_double(r.test_accuracy), format_double(r.train_accuracy),
          std::to_string(r.steps),       format_double(r.sigma),
          format_double(r.delta),        std::to_string(r.chosen.epochs),
          format_double(r.chosen.lr),    std::to_string(r.chosen.batch),
          format_double(r.chosen.clip),  std::to_string(r.tuner_trials)};
}

const std::vector<std::string> kOutcomeHeader{
    "shots", "epsilon", "mode", "seed", "test_accuracy", "train_accuracy", "steps",
    "sigma", "delta",   "epochs", "lr", "batch",         "clip",           "tuner_trials"};

nlohmann::json outcome_json(const CellOutcome& r) {
  return {{"shots", r.shots},
          {"epsilon", std::isinf(r.epsilon) ? nlohmann::json("inf") : nlohmann::json(r.epsilon)},
          {"mode", mode_name(r.mode)},
          {"seed", r.seed},
          {"test_accuracy", r.test_accuracy},
          {"train_accuracy", r.train_accuracy},
          {"steps", r.steps},
          {"sigma", r.sigma},
          {"delta", r.delta},
          {"hyper",
           {{"epochs", r.chosen.epochs},
            {"lr", r.chosen.lr},
            {"batch", r.chosen.batch},
            {"clip", r.chosen.clip}}},
          {"tuner_trials", r.tuner_trials}};
}

void run_train(const WorkbenchConfig& cfg, OutputWriter& w, RunOutputs& out) {
  const SyntheticTaskSpec task = cfg.task.spec();
  const ModelState backbone = pretrain_backbone(task, cfg.task.pretrain);
  FewShotDataset data = sample_few_shot(task, cfg.train.shots, cfg.train.test_per_class, cfg.seed);
  const auto train_idx = data.indices_of(Split::train);
  const auto test_idx = data.indices_of(Split::test);
  const double d_size = static_cast<double>(train_idx.size());
  const double delta = cfg.train.delta.value_or(1.0 / d_size);

  ModelState model = backbone;
  model.mode = cfg.train.mode;
  zero_head(model);
  DpOptimConfig oc;
  oc.clip = cfg.train.hyper.clip;
  oc.lr = cfg.train.hyper.lr;
  oc.epochs = cfg.train.hyper.epochs;
  oc.expected_batch = std::min<double>(cfg.train.hyper.batch, d_size);
  oc.optimizer = cfg.train.optimizer;

  std::optional<PrivacySpec> privacy;
  double sigma = 0.0;
  if (cfg.train.epsilon) {
    PrivacySpec ps;
    ps.epsilon = *cfg.train.epsilon;
    ps.delta = delta;
    ps.clip = oc.clip;
    ps.q = oc.expected_batch / d_size;
    ps.steps = static_cast<long>(oc.epochs) * steps_per_epoch(train_idx.size(), oc.expected_batch);
    ps.sigma = calibrate_sigma(PrivacyBudget{ps.epsilon, delta}, ps.q, ps.steps,
                               AccountantKind::rdp);
    sigma = ps.sigma;
    privacy = ps;
  }
  const TrainResult tr = train(model, data, train_idx, oc, privacy, cfg.seed);
  const double train_acc = accuracy(model, data, train_idx);
  const double test_acc = accuracy(model, data, test_idx);
  const RegimeReport regime = regime_report(train_acc, test_acc);

  CellOutcome row;
  row.shots = cfg.train.shots;
  row.epsilon = cfg.train.epsilon.value_or(kInf);
  row.mode = cfg.train.mode;
  row.seed = cfg.seed;
  row.test_accuracy = test_acc;
  row.train_accuracy = train_acc;
  row.steps = tr.steps;
  row.sigma = sigma;
  row.delta = delta;
  row.chosen = cfg.train.hyper;
  w.csv("_results.csv", kOutcomeHeader, {outcome_row(row)});
  out.summary = {{"kind", "train"},
                 {"result", outcome_json(row)},
                 {"regime", {{"gap", regime.gap}, {"regime", regime_name(regime.regime)}}}};
  w.json("_summary.json", out.summary);
  out.stdout_text = "train: test_accuracy=" + format_double(test_acc) +
                    " train_accuracy=" + format_double(train_acc) +
                    " steps=" + std::to_string(tr.steps) + "\n";
}

void run_sweep(const WorkbenchConfig& cfg, OutputWriter& w, RunOutputs& out) {
  const SyntheticTaskSpec task = cfg.task.spec();
  const ModelState backbone = pretrain_backbone(task, cfg.task.pretrain);
  ProtocolOptions opts;
  opts.tuner_budget = cfg.sweep.tuner_budget;
  opts.tuner = cfg.sweep.tuner;
  opts.test_per_class = cfg.sweep.test_per_class;
  opts.delta_override = cfg.sweep.delta;

  SweepResult result;
  for (int shots : cfg.sweep.shots)
    for (double eps : cfg.sweep.epsilons)
      for (ParamMode mode : cfg.sweep.modes)
        for (int s = 0; s < cfg.sweep.seeds; ++s) {
          const uint64_t run_seed = cfg.seed + static_cast<uint64_t>(s);
          const std::optional<double> eps_opt =
              std::isinf(eps) ? std::nullopt : std::optional<double>(eps);
          result.rows.push_back(
              run_protocol(task, backbone, shots, mode, eps_opt, run_seed, opts));
        }

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : result.rows) rows.push_back(outcome_row(r));
  w.csv("_results.csv", kOutcomeHeader, rows);

  nlohmann::json cells = nlohmann::json::array();
  for (int shots : cfg.sweep.shots)
    for (double eps : cfg.sweep.epsilons)
      for (ParamMode mode : cfg.sweep.modes) {
        cells.push_back({{"shots", shots},
                         {"epsilon", std::isinf(eps) ? nlohmann::json("inf") : nlohmann::json(eps)},
                         {"mode", mode_name(mode)},
                         {"median_test_accuracy", result.median_test(shots, eps, mode)},
                         {"median_train_accuracy", result.median_train(shots, eps, mode)}});
      }
  out.summary = {{"kind", "sweep"}, {"cells", cells}};
  w.json("_summary.json", out.summary);

  // accuracy-vs-shots curves, one series per (mode, epsilon)
  if (cfg.sweep.shots.size() >= 2) {
    std::vector<PlotSeries> series;
    for (ParamMode mode : cfg.sweep.modes)
      for (double eps : cfg.sweep.epsilons) {
        PlotSeries s;
        s.name = std::string(mode_name(mode)) + " eps=" + eps_label(eps);
        for (int shots : cfg.sweep.shots)
          s.points.emplace_back(shots, result.median_test(shots, eps, mode));
        series.push_back(std::move(s));
      }
    PlotOptions po;
    po.title = "accuracy vs shots";
    po.xlabel = "shots per class";
    po.ylabel = "median test accuracy";
    w.svg("_curves.svg", series, po);
  }
  out.stdout_text = "sweep: " + std::to_string(result.rows.size()) + " runs\n";
}

void run_attack(const WorkbenchConfig& cfg, OutputWriter& w, RunOutputs& out) {
  const SyntheticTaskSpec task = cfg.task.spec();
  const ModelState backbone = pretrain_backbone(task, cfg.task.pretrain);
  AttackTrainerConfig tc;
  tc.hp = cfg.attack.hyper;
  tc.optimizer = cfg.attack.optimizer;
  tc.mode = cfg.attack.mode;
  tc.epsilon = cfg.attack.epsilon;
  tc.delta = cfg.attack.delta;
  const ShadowPopulation pop =
      build_population(task, backbone, cfg.attack.shots, cfg.attack.shadows, tc, cfg.seed);
  const AttackRecord rec = attack_all(pop, cfg.attack.variance);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(rec.pairs.size());
  for (const auto& [score, member] : rec.pairs)
    rows.push_back({format_double(score), std::to_string(member)});
  w.csv("_pairs.csv", {"score", "member"}, rows);

  out.summary = {{"kind", "attack"},
                 {"tpr_at_fpr",
                  {{"1e-3", rec.summary.tpr_at_fpr_1e3},
                   {"1e-2", rec.summary.tpr_at_fpr_1e2},
                   {"1e-1", rec.summary.tpr_at_fpr_1e1}}},
                 {"auc", rec.summary.auc},
                 {"advantage", rec.summary.advantage},
                 {"models", pop.models.size()},
                 {"pool", pop.pool.size()},
                 {"sigma", pop.sigma},
                 {"delta", pop.delta},
                 {"epsilon", pop.epsilon ? nlohmann::json(*pop.epsilon) : nlohmann::json("inf")}};
  w.json("_metrics.json", out.summary);

  if (cfg.attack.roc_svg) {
    PlotSeries s;
    s.name = "attack";
    s.points = roc_curve(rec.pairs);
    PlotOptions po;
    po.title = "attack ROC";
    po.xlabel = "false positive rate";
    po.ylabel = "true positive rate";
    po.log_log = true;
    po.floor = 1e-5;
    std::vector<PlotSeries> series{std::move(s)};
    w.svg("_roc.svg", series, po);
  }
  out.stdout_text = "attack: auc=" + format_double(rec.summary.auc) +
                    " advantage=" + format_double(rec.summary.advantage) + "\n";
}

void run_fedsim(const WorkbenchConfig& cfg, OutputWriter& w, RunOutputs& out) {
  const SyntheticTaskSpec task = cfg.task.spec();
  const ModelState backbone = pretrain_backbone(task, cfg.task.pretrain);
  const FedResult res = fed_train(task, backbone, cfg.fed, cfg.seed);

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : res.log)
    rows.push_back({std::to_string(r.round), format_double(r.accuracy), format_double(r.clip),
                    format_double(r.payload)});
  w.csv("_rounds.csv", {"round", "accuracy", "clip_B", "payload_params"}, rows);

  nlohmann::json privacy = nlohmann::json::object();
  if (cfg.fed.epsilon) {
    privacy = {{"epsilon_target", *cfg.fed.epsilon},
               {"epsilon_realized", res.realized_epsilon},
               {"delta", res.ledger.delta},
               {"sigma", res.ledger.sigma},
               {"q", res.ledger.q},
               {"rounds", res.ledger.rounds}};
  } else {
    privacy = {{"epsilon_target", "inf"}};
  }
  out.summary = {{"kind", "fedsim"},
                 {"final_accuracy", res.final_accuracy},
                 {"payload_params", comm_cost(res.global, cfg.fed.mode)},
                 {"privacy", privacy}};
  w.json("_summary.json", out.summary);
  out.stdout_text = "fedsim: final_accuracy=" + format_double(res.final_accuracy) + "\n";
}

void run_analyze(const WorkbenchConfig& cfg, OutputWriter& w, RunOutputs& out) {
  nlohmann::json j{{"kind", "analyze"}};
  if (cfg.analyze.td) {
    const double score = transfer_difficulty(cfg.analyze.td->first, cfg.analyze.td->second);
    j["td"] = {{"score", score}, {"bucket", td_bucket_name(td_bucket(score))}};
  }
  if (cfg.analyze.multiplier) {
    const auto res = shot_multiplier(cfg.analyze.multiplier->np_curve,
                                     cfg.analyze.multiplier->dp_curve,
                                     cfg.analyze.multiplier->s_ref);
    j["multiplier"] = {{"min_shots", res.exceeds_grid ? nlohmann::json("exceeds_grid")
                                                      : nlohmann::json(res.min_shots)},
                       {"multiplier", res.exceeds_grid ? nlohmann::json("exceeds_grid")
                                                       : nlohmann::json(res.multiplier)},
                       {"clamped_at_grid_start", res.clamped_at_grid_start},
                       {"clamped_to_one", res.clamped_to_one}};
  }
  if (cfg.analyze.regime) {
    const RegimeReport rep = regime_report(cfg.analyze.regime->first, cfg.analyze.regime->second);
    j["regime"] = {{"gap", rep.gap}, {"regime", regime_name(rep.regime)}};
  }
  out.summary = j;
  w.json("_analysis.json", j);
  out.stdout_text = j.dump(2) + "\n";
}

}  // namespace

RunOutputs run_workbench(const WorkbenchConfig& cfg) {
  set_thread_count(cfg.threads);
  std::filesystem::create_directories(cfg.out);
  RunOutputs out;
  OutputWriter w{cfg.out, cfg.kind + "_seed" + std::to_string(cfg.seed), &out};

  // frozen copy of the resolved configuration
  w.json("_config.json", resolved_json(cfg));

  if (cfg.kind == "account") run_account(cfg, w, out);
  else if (cfg.kind == "train") run_train(cfg, w, out);
  else if (cfg.kind == "sweep") run_sweep(cfg, w, out);
  else if (cfg.kind == "attack") run_attack(cfg, w, out);
  else if (cfg.kind == "fedsim") run_fedsim(cfg, w, out);
  else if (cfg.kind == "analyze") run_analyze(cfg, w, out);
  else throw std::invalid_argument("unknown kind: " + cfg.kind);
  return out;
}

}  // namespace fewdp
