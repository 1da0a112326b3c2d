#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fewdp/config.hpp"
#include "fewdp/runner.hpp"

namespace {

int run_kind(const std::string& kind, const std::string& config_path, uint64_t* seed,
             std::string* out_dir, int* threads) {
  fewdp::WorkbenchConfig cfg = fewdp::load_config(config_path);
  if (cfg.kind != kind)
    throw std::invalid_argument("config kind '" + cfg.kind + "' does not match subcommand '" +
                                kind + "'");
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.out = *out_dir;
  if (threads) cfg.threads = *threads;
  const fewdp::RunOutputs out = fewdp::run_workbench(cfg);
  std::cout << out.stdout_text;
  return 0;
}

nlohmann::json error_json(const std::string& type, const std::string& message) {
  return nlohmann::json{{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot differential-privacy workbench"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  bool seed_set = false, out_set = false, threads_set = false;

  for (const std::string kind : {"account", "train", "sweep", "attack", "fedsim", "analyze"}) {
    auto* sub = app.add_subcommand(kind, "run a '" + kind + "' configuration");
    sub->add_option("--config", config_path, "path to the JSON configuration")->required();
    sub->add_option("--seed", seed, "override the configured seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_dir, "override the output directory")
        ->each([&](const std::string&) { out_set = true; });
    sub->add_option("--threads", threads, "worker threads")
        ->each([&](const std::string&) { threads_set = true; });
  }

  CLI11_PARSE(app, argc, argv);

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    return run_kind(kind, config_path, seed_set ? &seed : nullptr, out_set ? &out_dir : nullptr,
                    threads_set ? &threads : nullptr);
  } catch (const fewdp::ValidationError& e) {
    nlohmann::json j = error_json("validation", e.what());
    j["error"]["violations"] = e.violations;
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const fewdp::CalibrationError& e) {
    nlohmann::json j = error_json("calibration", e.what());
    j["error"]["sigma_lo"] = e.sigma_lo;
    j["error"]["sigma_hi"] = e.sigma_hi;
    j["error"]["eps_at_lo"] = e.eps_at_lo;
    j["error"]["eps_at_hi"] = e.eps_at_hi;
    std::cerr << j.dump() << "\n";
    return 3;
  } catch (const fewdp::GridExhaustionError& e) {
    std::cerr << error_json("grid_exhaustion", e.what()).dump() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << error_json("error", e.what()).dump() << "\n";
    return 1;
  }
}
