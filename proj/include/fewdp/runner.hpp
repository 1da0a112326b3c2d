#pragma once

#include <string>
#include <vector>

#include "fewdp/config.hpp"

namespace fewdp {

struct RunOutputs {
  std::vector<std::string> files;  // everything written, in order
  nlohmann::json summary;
  std::string stdout_text;  // what the CLI prints on success
};

// Executes one workbench run: applies the thread setting, performs the
// experiment for cfg.kind, and writes results plus the frozen resolved config
// under cfg.out.
RunOutputs run_workbench(const WorkbenchConfig& cfg);

}  // namespace fewdp
