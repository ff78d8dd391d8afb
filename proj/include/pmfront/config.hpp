#pragma once

#include <string>

#include "pmfront/sim.hpp"

namespace pmfront::cli {

// Flat key=value run configuration with '#' comments. Unknown keys are
// rejected; every key has a documented default; the effective config is
// echoed into the output directory so a run can be reproduced from it.
struct RunConfig {
  sim::SimConfig sim;
  double wave_tol = 1e-8;     // wavekit speed tolerance (expected-speed probe)
  std::string out_dir = "out";
  std::string u0_file;        // source path for tabulated data (echo only)
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Effective (post-default) key=value text, stable ordering, no timestamps.
std::string render_config(const RunConfig& config);

}  // namespace pmfront::cli
