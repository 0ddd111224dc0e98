#pragma once

#include <string>

#include "ctpanel/fit.hpp"
#include "ctpanel/minitoml.hpp"
#include "ctpanel/sim.hpp"

namespace ctpanel {

struct ModelConfig {
  CtModelSpec spec;
  FitOptions fit;
  int report_top_k = 1;
};

/// model.toml: [model] latents/predictors/drift/grouping, [fit] starts, seed,
/// tolerances, threads, [report] top_k.
ModelConfig load_model_config(const std::string& path);

/// design.toml: [design] sizes and seed, [model] dims, [true_params] shared
/// values with optional [true_params.per_group.gN] overrides,
/// [predictor_process.<channel>] generators (plus a "default" entry).
SimDesign load_sim_design(const std::string& path);

}  // namespace ctpanel
