#pragma once

// Finite-difference gradient suite over every differentiable module, shared
// by the `gradcheck` command and the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "amaa/camera.hpp"
#include "amaa/grad_check.hpp"
#include "amaa/model.hpp"

namespace amaa {

struct ModuleGradResult {
  std::string module;
  std::vector<std::uint64_t> seeds;
  std::vector<double> max_rel_error;  // per seed
  double tolerance = 0.0;

  double worst() const;
  bool passed() const { return worst() <= tolerance; }
};

/// Names of the modules in suite order.
std::vector<std::string> grad_suite_modules();

/// Checks one module for one seed; throws ConfigError for an unknown name.
GradCheckReport check_module_gradient(const std::string& module, std::uint64_t seed,
                                      const GradCheckOptions& opts = {});

std::vector<ModuleGradResult> run_grad_suite(const std::vector<std::uint64_t>& seeds,
                                             const GradCheckOptions& opts = {});

/// 4x4x4 grid seen by an 8x8 camera, used by the end-to-end check.
CameraGrid micro_grid();
/// Two-class model with every attention and gating path enabled.
ModelConfig micro_model_config();

}  // namespace amaa
