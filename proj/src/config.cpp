#include "fewdp/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fewdp {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out = "configuration invalid:";
  for (const auto& p : parts) out += "\n  - " + p;
  return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tracks which keys were consumed and records every violation instead of
// failing fast. Owns its snapshot of the object so callers may pass
// temporaries.
class ObjectReader {
 public:
  ObjectReader(nlohmann::json j, std::string prefix, std::vector<std::string>& errs)
      : j_(std::move(j)), prefix_(std::move(prefix)), errs_(errs) {
    if (!j_.is_object()) errs_.push_back(prefix_.empty() ? "config must be a JSON object"
                                                         : prefix_ + " must be an object");
  }

  bool has(const std::string& key) {
    return j_.is_object() && j_.contains(key) && !j_.at(key).is_null();
  }

  std::string name(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  double number(const std::string& key, double def, double lo = -kInf, double hi = kInf) {
    mark(key);
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) {
      errs_.push_back(name(key) + " must be a number");
      return def;
    }
    const double x = v.get<double>();
    if (x < lo || x > hi) {
      errs_.push_back(name(key) + " must be in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got " + std::to_string(x));
      return def;
    }
    return x;
  }

  long integer(const std::string& key, long def, long lo, long hi) {
    mark(key);
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) {
      errs_.push_back(name(key) + " must be an integer");
      return def;
    }
    const long x = v.get<long>();
    if (x < lo || x > hi) {
      errs_.push_back(name(key) + " must be in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got " + std::to_string(x));
      return def;
    }
    return x;
  }

  uint64_t u64(const std::string& key, uint64_t def) {
    mark(key);
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer()) {
      errs_.push_back(name(key) + " must be a non-negative integer");
      return def;
    }
    return v.get<uint64_t>();
  }

  bool boolean(const std::string& key, bool def) {
    mark(key);
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) {
      errs_.push_back(name(key) + " must be a boolean");
      return def;
    }
    return v.get<bool>();
  }

  std::string str(const std::string& key, const std::string& def) {
    mark(key);
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) {
      errs_.push_back(name(key) + " must be a string");
      return def;
    }
    return v.get<std::string>();
  }

  std::string str_choice(const std::string& key, const std::string& def,
                         const std::set<std::string>& allowed) {
    const std::string v = str(key, def);
    if (!allowed.count(v)) {
      std::string msg = name(key) + " must be one of {";
      bool first = true;
      for (const auto& a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
      }
      errs_.push_back(msg + "}, got '" + v + "'");
      return def;
    }
    return v;
  }

  // number, or the string "inf" meaning non-private
  std::optional<double> epsilon_opt(const std::string& key) {
    mark(key);
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(key);
    if (v.is_string()) {
      if (v.get<std::string>() == "inf") return std::nullopt;
      errs_.push_back(name(key) + " must be a positive number or \"inf\"");
      return std::nullopt;
    }
    if (!v.is_number() || !(v.get<double>() > 0.0)) {
      errs_.push_back(name(key) + " must be a positive number or \"inf\"");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<double> number_opt(const std::string& key, double lo, double hi) {
    mark(key);
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(key);
    if (!v.is_number() || v.get<double>() < lo || v.get<double>() > hi) {
      errs_.push_back(name(key) + " must be a number in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<long> integer_opt(const std::string& key, long lo, long hi) {
    mark(key);
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long>() < lo || v.get<long>() > hi) {
      errs_.push_back(name(key) + " must be an integer in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
      return std::nullopt;
    }
    return v.get<long>();
  }

  nlohmann::json raw(const std::string& key) {
    mark(key);
    if (!has(key)) return nlohmann::json();
    return j_.at(key);
  }

  void done() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) errs_.push_back("unknown key: " + name(it.key()));
  }

 private:
  void mark(const std::string& key) { seen_.insert(key); }

  nlohmann::json j_;
  std::string prefix_;
  std::vector<std::string>& errs_;
  std::set<std::string> seen_;
};

std::vector<std::pair<double, double>> parse_curve(const nlohmann::json& v,
                                                   const std::string& name,
                                                   std::vector<std::string>& errs) {
  std::vector<std::pair<double, double>> out;
  if (!v.is_array()) {
    errs.push_back(name + " must be an array of [shots, accuracy] pairs");
    return out;
  }
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      errs.push_back(name + " entries must be [shots, accuracy] number pairs");
      return {};
    }
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

TaskConfig parse_task(nlohmann::json j, std::vector<std::string>& errs) {
  TaskConfig t;
  if (j.is_null()) j = nlohmann::json::object();  // absent block: all defaults
  ObjectReader r(std::move(j), "task", errs);
  t.task_seed = r.u64("task_seed", t.task_seed);
  t.classes = static_cast<int>(r.integer("classes", t.classes, 2, 1000));
  t.dim = static_cast<int>(r.integer("dim", t.dim, 2, 4096));
  t.shift = r.number("shift", t.shift, 0.0, 1.0);
  t.separation = r.number("separation", t.separation, 0.0, 1e6);
  t.spread = r.number("spread", t.spread, 1e-9, 1e6);
  t.hidden = static_cast<int>(r.integer("hidden", t.hidden, 1, 4096));
  t.feature_dim = static_cast<int>(r.integer("feature_dim", t.feature_dim, 1, 4096));
  if (r.has("pretrain")) {
    ObjectReader p(r.raw("pretrain"), "task.pretrain", errs);
    t.pretrain.per_class = static_cast<int>(p.integer("per_class", t.pretrain.per_class, 1, 100000));
    t.pretrain.epochs = static_cast<int>(p.integer("epochs", t.pretrain.epochs, 1, 10000));
    t.pretrain.lr = p.number("lr", t.pretrain.lr, 1e-9, 10.0);
    t.pretrain.batch = static_cast<int>(p.integer("batch", t.pretrain.batch, 1, 1000000));
    p.done();
  }
  t.pretrain.hidden = t.hidden;
  t.pretrain.feature_dim = t.feature_dim;
  r.done();
  return t;
}

HyperChoice parse_hyper(ObjectReader& r, std::vector<std::string>& errs, long d_size) {
  HyperChoice hp;
  hp.epochs = static_cast<int>(r.integer("epochs", hp.epochs, 1, 200));
  hp.lr = r.number("lr", hp.lr, 1e-7, 1e-2);
  hp.batch = static_cast<int>(r.integer("batch", hp.batch, 1, 1000000000));
  hp.clip = r.number("clip", hp.clip, 0.2, 10.0);
  if (d_size > 0 && hp.batch > d_size)
    errs.push_back(r.name("batch") + ": batch size " + std::to_string(hp.batch) +
                   " exceeds |D| = " + std::to_string(d_size));
  return hp;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> v)
    : std::runtime_error(join(v)), violations(std::move(v)) {}

WorkbenchConfig parse_config(const nlohmann::json& j) {
  std::vector<std::string> errs;
  WorkbenchConfig c;
  ObjectReader r(j, "", errs);
  c.kind = r.str_choice("kind", "", {"account", "train", "sweep", "attack", "fedsim", "analyze"});
  if (c.kind.empty()) errs.push_back("kind is required");
  c.seed = r.u64("seed", c.seed);
  c.out = r.str("out", c.out);
  c.threads = static_cast<int>(r.integer("threads", c.threads, 1, 256));

  if (c.kind == "account") {
    c.account.accountant = r.str_choice("accountant", "both", {"rdp", "prv", "both"});
    c.account.sigma = r.number("sigma", c.account.sigma, 1e-9, 1e9);
    c.account.q = r.number("q", c.account.q, 0.0, 1.0);
    c.account.steps = r.integer("steps", c.account.steps, 0, 100000000);
    c.account.delta = r.number("delta", c.account.delta, 1e-300, 0.999999);
    if (r.has("calibrate_epsilon"))
      c.account.calibrate_epsilon = r.number_opt("calibrate_epsilon", 1e-9, 1e6);
    else r.raw("calibrate_epsilon");
    if (r.has("recompute_delta"))
      c.account.recompute_delta = r.number_opt("recompute_delta", 1e-300, 0.999999);
    else r.raw("recompute_delta");
  } else if (c.kind == "train") {
    c.task = parse_task(r.raw("task"), errs);
    c.train.shots = static_cast<int>(r.integer("shots", c.train.shots, 1, 100000));
    c.train.mode = mode_from_name(r.str_choice("mode", "head", {"head", "film", "all"}));
    c.train.epsilon = r.epsilon_opt("epsilon");
    c.train.delta = r.number_opt("delta", 1e-300, 0.999999);
    c.train.hyper = parse_hyper(r, errs, static_cast<long>(c.task.classes) * c.train.shots);
    c.train.optimizer = optimizer_from_name(r.str_choice("optimizer", "adam", {"sgd", "adam"}));
    c.train.test_per_class = static_cast<int>(r.integer("test_per_class", 200, 1, 100000));
  } else if (c.kind == "sweep") {
    c.task = parse_task(r.raw("task"), errs);
    if (r.has("shots")) {
      c.sweep.shots.clear();
      for (const auto& v : r.raw("shots")) {
        if (!v.is_number_integer() || v.get<long>() < 1) {
          errs.push_back("shots entries must be positive integers");
          break;
        }
        c.sweep.shots.push_back(v.get<int>());
      }
    } else r.raw("shots");
    if (r.has("epsilons")) {
      c.sweep.epsilons.clear();
      for (const auto& v : r.raw("epsilons")) {
        if (v.is_string() && v.get<std::string>() == "inf")
          c.sweep.epsilons.push_back(kInf);
        else if (v.is_number() && v.get<double>() > 0.0)
          c.sweep.epsilons.push_back(v.get<double>());
        else {
          errs.push_back("epsilons entries must be positive numbers or \"inf\"");
          break;
        }
      }
    } else r.raw("epsilons");
    if (r.has("modes")) {
      c.sweep.modes.clear();
      for (const auto& v : r.raw("modes")) {
        if (!v.is_string()) {
          errs.push_back("modes entries must be strings");
          break;
        }
        try {
          c.sweep.modes.push_back(mode_from_name(v.get<std::string>()));
        } catch (const std::invalid_argument& e) {
          errs.push_back(e.what());
        }
      }
    } else r.raw("modes");
    c.sweep.seeds = static_cast<int>(r.integer("seeds", c.sweep.seeds, 1, 64));
    c.sweep.tuner_budget = static_cast<int>(r.integer("tuner_budget", 20, 1, 1000));
    c.sweep.tuner = tuner_from_name(r.str_choice("tuner", "random", {"random", "parzen"}));
    c.sweep.test_per_class = static_cast<int>(r.integer("test_per_class", 200, 1, 100000));
    c.sweep.delta = r.number_opt("delta", 1e-300, 0.999999);
  } else if (c.kind == "attack") {
    c.task = parse_task(r.raw("task"), errs);
    c.attack.shots = static_cast<int>(r.integer("shots", c.attack.shots, 1, 100000));
    c.attack.mode = mode_from_name(r.str_choice("mode", "head", {"head", "film", "all"}));
    c.attack.epsilon = r.epsilon_opt("epsilon");
    c.attack.delta = r.number_opt("delta", 1e-300, 0.999999);
    c.attack.shadows = static_cast<int>(r.integer("shadows", c.attack.shadows, 2, 4096));
    c.attack.hyper = parse_hyper(r, errs, static_cast<long>(c.task.classes) * c.attack.shots);
    c.attack.optimizer = optimizer_from_name(r.str_choice("optimizer", "adam", {"sgd", "adam"}));
    c.attack.variance =
        variance_mode_from_name(r.str_choice("variance", "per_example", {"per_example", "pooled"}));
    c.attack.roc_svg = r.boolean("roc_svg", true);
  } else if (c.kind == "fedsim") {
    c.task = parse_task(r.raw("task"), errs);
    auto& f = c.fed;
    f.rounds = static_cast<int>(r.integer("rounds", f.rounds, 1, 1000000));
    f.cohort = static_cast<int>(r.integer("cohort", f.cohort, 1, 1000000));
    if (r.has("accounting_cohort")) {
      const auto v = r.integer_opt("accounting_cohort", 1, 100000000);
      if (v) f.accounting_cohort = static_cast<int>(*v);
    } else r.raw("accounting_cohort");
    f.n_clients = static_cast<int>(r.integer("n_clients", f.n_clients, 1, 100000000));
    f.shots = static_cast<int>(r.integer("shots", f.shots, 1, 100000));
    f.test_per_class = static_cast<int>(r.integer("test_per_class", f.test_per_class, 1, 100000));
    f.distribution = distribution_from_name(
        r.str_choice("distribution", "iid", {"iid", "heterogeneous"}));
    f.dirichlet_alpha = r.number("dirichlet_alpha", f.dirichlet_alpha, 1e-6, 1e6);
    f.client_cap = static_cast<std::size_t>(r.integer("client_cap", 512, 1, 1000000));
    f.local_epochs = static_cast<int>(r.integer("local_epochs", f.local_epochs, 0, 1000));
    f.local_batch = static_cast<int>(r.integer("local_batch", f.local_batch, 1, 1000000));
    f.client_lr = r.number("client_lr", f.client_lr, 1e-9, 100.0);
    f.server_lr = r.number("server_lr", f.server_lr, 1e-9, 100.0);
    f.server_optimizer =
        optimizer_from_name(r.str_choice("server_optimizer", "adam", {"sgd", "adam"}));
    f.mode = mode_from_name(r.str_choice("mode", "film", {"head", "film", "all"}));
    f.epsilon = r.epsilon_opt("epsilon");
    f.delta_override = r.number_opt("delta", 1e-300, 0.999999);
    f.adaptive_clip = r.boolean("adaptive_clip", f.adaptive_clip);
    f.clip_init = r.number("clip_init", f.clip_init, 1e-9, 1e9);
    f.clip_quantile = r.number("clip_quantile", f.clip_quantile, 1e-6, 0.999999);
    f.clip_lr = r.number("clip_lr", f.clip_lr, 1e-6, 10.0);
    f.accountant = accountant_from_name(r.str_choice("accountant", "rdp", {"rdp", "prv"}));
    if (f.cohort > f.n_clients)
      errs.push_back("cohort: must not exceed n_clients (" + std::to_string(f.cohort) + " > " +
                     std::to_string(f.n_clients) + ")");
  } else if (c.kind == "analyze") {
    if (r.has("td")) {
      ObjectReader t(r.raw("td"), "td", errs);
      const double all = t.number("acc_all", 0.0, -1e9, 1e9);
      const double head = t.number("acc_head", 0.0, -1e9, 1e9);
      t.done();
      c.analyze.td = std::make_pair(all, head);
    } else r.raw("td");
    if (r.has("multiplier")) {
      ObjectReader m(r.raw("multiplier"), "multiplier", errs);
      AnalyzeRequest::Multiplier mult;
      mult.np_curve = parse_curve(m.raw("np_curve"), "multiplier.np_curve", errs);
      mult.dp_curve = parse_curve(m.raw("dp_curve"), "multiplier.dp_curve", errs);
      mult.s_ref = m.number("s_ref", 5.0, 1e-9, 1e9);
      m.done();
      c.analyze.multiplier = std::move(mult);
    } else r.raw("multiplier");
    if (r.has("regime")) {
      ObjectReader g(r.raw("regime"), "regime", errs);
      const double tr = g.number("train_accuracy", 0.0, 0.0, 1.0);
      const double te = g.number("test_accuracy", 0.0, 0.0, 1.0);
      g.done();
      c.analyze.regime = std::make_pair(tr, te);
    } else r.raw("regime");
  }
  if (!c.kind.empty()) r.done();
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return c;
}

WorkbenchConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

namespace {

nlohmann::json task_json(const TaskConfig& t) {
  return nlohmann::json{
      {"task_seed", t.task_seed}, {"classes", t.classes}, {"dim", t.dim}, {"shift", t.shift},
      {"separation", t.separation}, {"spread", t.spread}, {"hidden", t.hidden},
      {"feature_dim", t.feature_dim},
      {"pretrain",
       {{"per_class", t.pretrain.per_class},
        {"epochs", t.pretrain.epochs},
        {"lr", t.pretrain.lr},
        {"batch", t.pretrain.batch}}}};
}

nlohmann::json eps_json(const std::optional<double>& e) {
  if (!e.has_value() || std::isinf(*e)) return "inf";
  return *e;
}

}  // namespace

nlohmann::json resolved_json(const WorkbenchConfig& c) {
  nlohmann::json j{{"kind", c.kind}, {"seed", c.seed}, {"out", c.out}, {"threads", c.threads}};
  if (c.kind == "account") {
    j["accountant"] = c.account.accountant;
    j["sigma"] = c.account.sigma;
    j["q"] = c.account.q;
    j["steps"] = c.account.steps;
    j["delta"] = c.account.delta;
    if (c.account.calibrate_epsilon) j["calibrate_epsilon"] = *c.account.calibrate_epsilon;
    if (c.account.recompute_delta) j["recompute_delta"] = *c.account.recompute_delta;
  } else if (c.kind == "train") {
    j["task"] = task_json(c.task);
    j["shots"] = c.train.shots;
    j["mode"] = mode_name(c.train.mode);
    j["epsilon"] = eps_json(c.train.epsilon);
    if (c.train.delta) j["delta"] = *c.train.delta;
    j["epochs"] = c.train.hyper.epochs;
    j["lr"] = c.train.hyper.lr;
    j["batch"] = c.train.hyper.batch;
    j["clip"] = c.train.hyper.clip;
    j["optimizer"] = optimizer_name(c.train.optimizer);
    j["test_per_class"] = c.train.test_per_class;
  } else if (c.kind == "sweep") {
    j["task"] = task_json(c.task);
    j["shots"] = c.sweep.shots;
    nlohmann::json eps = nlohmann::json::array();
    for (double e : c.sweep.epsilons)
      eps.push_back(std::isinf(e) ? nlohmann::json("inf") : nlohmann::json(e));
    j["epsilons"] = eps;
    nlohmann::json modes = nlohmann::json::array();
    for (auto m : c.sweep.modes) modes.push_back(mode_name(m));
    j["modes"] = modes;
    j["seeds"] = c.sweep.seeds;
    j["tuner_budget"] = c.sweep.tuner_budget;
    j["tuner"] = tuner_name(c.sweep.tuner);
    j["test_per_class"] = c.sweep.test_per_class;
    if (c.sweep.delta) j["delta"] = *c.sweep.delta;
  } else if (c.kind == "attack") {
    j["task"] = task_json(c.task);
    j["shots"] = c.attack.shots;
    j["mode"] = mode_name(c.attack.mode);
    j["epsilon"] = eps_json(c.attack.epsilon);
    if (c.attack.delta) j["delta"] = *c.attack.delta;
    j["shadows"] = c.attack.shadows;
    j["epochs"] = c.attack.hyper.epochs;
    j["lr"] = c.attack.hyper.lr;
    j["batch"] = c.attack.hyper.batch;
    j["clip"] = c.attack.hyper.clip;
    j["optimizer"] = optimizer_name(c.attack.optimizer);
    j["variance"] = variance_mode_name(c.attack.variance);
    j["roc_svg"] = c.attack.roc_svg;
  } else if (c.kind == "fedsim") {
    j["task"] = task_json(c.task);
    const auto& f = c.fed;
    j["rounds"] = f.rounds;
    j["cohort"] = f.cohort;
    if (f.accounting_cohort) j["accounting_cohort"] = *f.accounting_cohort;
    j["n_clients"] = f.n_clients;
    j["shots"] = f.shots;
    j["test_per_class"] = f.test_per_class;
    j["distribution"] = distribution_name(f.distribution);
    j["dirichlet_alpha"] = f.dirichlet_alpha;
    j["client_cap"] = f.client_cap;
    j["local_epochs"] = f.local_epochs;
    j["local_batch"] = f.local_batch;
    j["client_lr"] = f.client_lr;
    j["server_lr"] = f.server_lr;
    j["server_optimizer"] = optimizer_name(f.server_optimizer);
    j["mode"] = mode_name(f.mode);
    j["epsilon"] = eps_json(f.epsilon);
    if (f.delta_override) j["delta"] = *f.delta_override;
    j["adaptive_clip"] = f.adaptive_clip;
    j["clip_init"] = f.clip_init;
    j["clip_quantile"] = f.clip_quantile;
    j["clip_lr"] = f.clip_lr;
    j["accountant"] = accountant_name(f.accountant);
  } else if (c.kind == "analyze") {
    if (c.analyze.td)
      j["td"] = {{"acc_all", c.analyze.td->first}, {"acc_head", c.analyze.td->second}};
    if (c.analyze.multiplier) {
      nlohmann::json np = nlohmann::json::array(), dp = nlohmann::json::array();
      for (const auto& [s, a] : c.analyze.multiplier->np_curve) np.push_back({s, a});
      for (const auto& [s, a] : c.analyze.multiplier->dp_curve) dp.push_back({s, a});
      j["multiplier"] = {{"np_curve", np}, {"dp_curve", dp}, {"s_ref", c.analyze.multiplier->s_ref}};
    }
    if (c.analyze.regime)
      j["regime"] = {{"train_accuracy", c.analyze.regime->first},
                     {"test_accuracy", c.analyze.regime->second}};
  }
  return j;
}

}  // namespace fewdp
