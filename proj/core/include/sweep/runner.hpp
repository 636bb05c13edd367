#pragma once

#include <string>

#include "sweep/config.hpp"

namespace sweep {

struct RunOverrides {
  std::string out_parent = "out";
  std::string out_exact;  // when set, artifacts go exactly here
  int k_override = -1;
  std::string variant_override;
  std::string case_override;
  double tol_override = -1.0;
};

// Executes one CLI command (simulate | solve | check | converge) against a
// configuration, writes the artifacts, and returns the process exit status.
// check returns 0 iff every verified condition passes.
int run(const ModelConfig& cfg, const std::string& command, const RunOverrides& ov,
        std::string* out_dir = nullptr);

}  // namespace sweep
