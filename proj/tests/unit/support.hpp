#pragma once

#include <random>

#include <Eigen/Dense>

#include "zdshape/harness.hpp"
#include "zdshape/scenario.hpp"

namespace zdtest {

// Resolved once per process; building the zero-dynamics table is the slow part.
inline const zdshape::Scenario& DefaultScenario() {
  static const zdshape::Scenario sc = zdshape::ResolveScenario(zdshape::ScenarioConfig{});
  return sc;
}

// A feasible design near the default optimum.
inline zdshape::DesignParams NominalDesign() { return {0.0706, 0.00265, 0.02, 0.02}; }

inline const zdshape::Stabilization& NominalStabilization() {
  static const zdshape::Stabilization st = zdshape::Stabilize(DefaultScenario(), NominalDesign());
  return st;
}

// Task point on the reference line with a random offset in x and y.
inline Eigen::Vector2d RandomTaskPoint(std::mt19937_64& rng) {
  const auto& sc = DefaultScenario();
  std::uniform_real_distribution<double> ux(sc.x_min + 0.005, sc.x_max - 0.005);
  std::uniform_real_distribution<double> uy(-0.003, 0.003);
  return {ux(rng), sc.reference.y_bar + uy(rng)};
}

inline Eigen::Vector2d RandomVelocity(std::mt19937_64& rng, double scale = 0.3) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng)};
}

}  // namespace zdtest
