#pragma once

#include "ssde/mle.hpp"
#include "ssde/model.hpp"
#include "ssde/panel.hpp"
#include "ssde/stability.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ssde {

struct Preset {
  std::string name;
  std::string description;
  // Known to violate a documented assumption; kept for demonstrations.
  bool demo_only = false;
  std::string demo_reason;
  int dim = 1;
  ParamVector theta0;
  std::function<StateSpaceModel()> make_model;
  GrowthBox growth_box;
  // Panel of n individuals; empty for single-series presets.
  std::function<PanelModel(int n)> make_panel;
  std::optional<LyapunovSpec> lyapunov;
  // Parameter box used by fits; defaults to Box::around(theta_init, 50).
  std::function<Box(const ParamVector& theta0)> parameter_box;

  Box box_for(const ParamVector& theta0, double half_width = 50.0) const;
};

const std::vector<Preset>& preset_registry();

// Throws config-error listing the available names.
const Preset& find_preset(const std::string& name);

// Preset parameters exposed for tests and demos.
struct GbmLatentParams {
  double a = 1.0;
  double sigma = 0.5;
};

StateSpaceModel make_gbm_latent_model(const GbmLatentParams& params);

// Scalar unit-ratio model with observation drift b_y.
StateSpaceModel make_unit_ratio_model(ObservationFn b_y);

}  // namespace ssde
