#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fewdp/config.hpp"
#include "fewdp/io.hpp"
#include "fewdp/runner.hpp"

using namespace fewdp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fewdp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.0, 1.0, -1.5, 3.141592653589793, 1e-300, 6.02214076e23, 0.1}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("csv quoting follows rfc 4180") {
  CHECK(csv_quote("plain") == "plain");
  CHECK(csv_quote("a,b") == "\"a,b\"");
  CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_quote("line\nbreak") == "\"line\nbreak\"");
  const std::string csv = to_csv({"a", "b"}, {{"1", "x,y"}});
  CHECK(csv == "a,b\r\n1,\"x,y\"\r\n");
}

TEST_CASE("minimal account config loads with defaults") {
  const nlohmann::json j{{"kind", "account"}, {"sigma", 4.0}, {"q", 0.1}, {"steps", 100},
                         {"delta", 1e-5}};
  const WorkbenchConfig c = parse_config(j);
  CHECK(c.kind == "account");
  CHECK(c.seed == 1);
  CHECK(c.threads == 1);
  CHECK(c.account.accountant == "both");
  CHECK(c.account.sigma == 4.0);
}

TEST_CASE("unknown keys are rejected with the offending name") {
  const nlohmann::json j{{"kind", "account"}, {"sigma", 1.0}, {"sigmma", 2.0}};
  try {
    parse_config(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(e.violations.size() == 1);
    CHECK(e.violations[0].find("sigmma") != std::string::npos);
  }
}

TEST_CASE("batch larger than the dataset is a named violation") {
  const nlohmann::json j{{"kind", "train"},
                         {"task", {{"classes", 5}}},
                         {"shots", 4},
                         {"batch", 100}};
  try {
    parse_config(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(e.violations.size() == 1);
    CHECK(e.violations[0].find("batch") != std::string::npos);
    CHECK(e.violations[0].find("20") != std::string::npos);  // |D| = 5*4
  }
}

TEST_CASE("range violations accumulate instead of failing fast") {
  const nlohmann::json j{{"kind", "train"}, {"clip", 0.05}, {"lr", 5.0}, {"epochs", 1000}};
  try {
    parse_config(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.violations.size() == 3);
  }
}

TEST_CASE("config round-trips through its resolved form") {
  const nlohmann::json j{{"kind", "sweep"},
                         {"seed", 9},
                         {"task", {{"classes", 3}, {"shift", 0.5}}},
                         {"shots", {5, 10}},
                         {"epsilons", {1.0, "inf"}},
                         {"modes", {"head", "film"}},
                         {"seeds", 2}};
  const WorkbenchConfig c = parse_config(j);
  const nlohmann::json r1 = resolved_json(c);
  const WorkbenchConfig c2 = parse_config(r1);
  const nlohmann::json r2 = resolved_json(c2);
  CHECK(r1.dump() == r2.dump());
  CHECK(c2.sweep.epsilons.size() == 2);
  CHECK(std::isinf(c2.sweep.epsilons[1]));
}

TEST_CASE("svg rendering is deterministic and validates input") {
  std::vector<PlotSeries> series(3);
  for (int s = 0; s < 3; ++s) {
    series[static_cast<std::size_t>(s)].name = "s" + std::to_string(s);
    for (int i = 0; i < 5; ++i)
      series[static_cast<std::size_t>(s)].points.emplace_back(i, 0.1 * s + 0.05 * i);
  }
  PlotOptions po;
  po.title = "t";
  const std::string a = render_svg(series, po);
  const std::string b = render_svg(series, po);
  CHECK(a == b);
  std::size_t polylines = 0;
  for (std::size_t pos = a.find("<polyline"); pos != std::string::npos;
       pos = a.find("<polyline", pos + 1))
    ++polylines;
  CHECK(polylines == 3);

  std::vector<PlotSeries> bad{{"x", {{0.0, 0.0}}}};
  CHECK_THROWS_AS(render_svg(bad, po), std::invalid_argument);
}

TEST_CASE("log-log mode clips at the floor") {
  std::vector<PlotSeries> series{{"roc", {{0.0, 0.0}, {1e-7, 0.5}, {1.0, 1.0}}}};
  PlotOptions po;
  po.log_log = true;
  po.floor = 1e-5;
  const std::string svg = render_svg(series, po);
  // both sub-floor points render at the same x coordinate as an exact 1e-5 point
  std::vector<PlotSeries> floored{{"roc", {{1e-5, 0.0}, {1e-5, 0.5}, {1.0, 1.0}}}};
  CHECK(svg.find("NaN") == std::string::npos);
  CHECK(render_svg(floored, po).substr(0, 200) == svg.substr(0, 200));
}

TEST_CASE("account runs end to end and rewrites identical bytes") {
  const fs::path dir = fresh_dir("account");
  nlohmann::json j{{"kind", "account"}, {"sigma", 2.0}, {"q", 0.5}, {"steps", 50},
                   {"delta", 1e-5}, {"accountant", "rdp"}, {"out", dir.string()}};
  WorkbenchConfig cfg = parse_config(j);
  const RunOutputs out1 = run_workbench(cfg);
  REQUIRE(out1.files.size() >= 2);
  std::vector<std::string> first;
  for (const auto& f : out1.files) first.push_back(slurp(f));
  CHECK(out1.stdout_text.find("accountant,sigma,q,steps,delta,epsilon") != std::string::npos);

  const RunOutputs out2 = run_workbench(cfg);
  REQUIRE(out2.files == out1.files);
  for (std::size_t i = 0; i < out1.files.size(); ++i) CHECK(slurp(out2.files[i]) == first[i]);
}

TEST_CASE("json summaries parse back with full numeric fidelity") {
  const fs::path dir = fresh_dir("jsonfid");
  nlohmann::json j{{"kind", "account"}, {"sigma", 1.7320508075688772}, {"q", 0.3},
                   {"steps", 77}, {"delta", 1e-5}, {"accountant", "rdp"}, {"out", dir.string()}};
  const RunOutputs out = run_workbench(parse_config(j));
  nlohmann::json parsed = nlohmann::json::parse(slurp(out.files.back()));
  const double eps_written = out.summary["rows"][0]["epsilon"].get<double>();
  const double eps_read = parsed["rows"][0]["epsilon"].get<double>();
  CHECK(std::fabs(eps_written - eps_read) <= 1e-12 * std::max(1.0, std::fabs(eps_written)));
}

TEST_CASE("sweep persists one row per cell and seed") {
  const fs::path dir = fresh_dir("sweeprows");
  nlohmann::json j{{"kind", "sweep"},
                   {"out", dir.string()},
                   {"task", {{"classes", 3}, {"dim", 6}, {"hidden", 6}, {"feature_dim", 5},
                             {"pretrain", {{"per_class", 20}, {"epochs", 5}}}}},
                   {"shots", {3}},
                   {"epsilons", {"inf", 8.0}},
                   {"modes", {"head"}},
                   {"seeds", 3},
                   {"tuner_budget", 2},
                   {"test_per_class", 10}};
  const RunOutputs out = run_workbench(parse_config(j));
  std::string csv;
  for (const auto& f : out.files)
    if (f.find("_results.csv") != std::string::npos) csv = slurp(f);
  REQUIRE(!csv.empty());
  std::size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 7);  // header + 2 cells x 3 seeds
  CHECK(out.summary["cells"].size() == 2);
}

TEST_CASE("analyze computes the three first-class metrics") {
  const fs::path dir = fresh_dir("analyze");
  nlohmann::json j{{"kind", "analyze"},
                   {"out", dir.string()},
                   {"td", {{"acc_all", 91.6}, {"acc_head", 43.1}}},
                   {"multiplier",
                    {{"np_curve", {{5, 74.8}, {10, 90.7}}},
                     {"dp_curve", {{25, 56.6}, {50, 81.5}}},
                     {"s_ref", 5}}},
                   {"regime", {{"train_accuracy", 1.0}, {"test_accuracy", 0.6}}}};
  const RunOutputs out = run_workbench(parse_config(j));
  CHECK(out.summary["td"]["bucket"] == "high");
  CHECK(std::fabs(out.summary["multiplier"]["multiplier"].get<double>() - 8.65) <= 0.01);
  CHECK(out.summary["regime"]["regime"] == "interpolating");
}
