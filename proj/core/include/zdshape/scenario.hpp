#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zdshape/mechanism.hpp"
#include "zdshape/zero_dynamics.hpp"

namespace zdshape {

/// r_x(t) = x_c + A cos(2 pi t / T), r_y = y_bar.
struct Reference {
  double x_c = 0.0;
  double amplitude = 0.0;
  double period = 1.0;
  double y_bar = 0.0;

  double Rx(double t) const;
  double RxDot(double t) const;
};

enum class Mode { kTwoParam, kFourParam };
enum class CostKind { kJ1, kJ2 };

struct CostWeights {
  Eigen::Matrix2d q = 100.0 * Eigen::Matrix2d::Identity();
  double r = 10.0;
  Eigen::Matrix2d s = 10.0 * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d l = 200.0 * Eigen::Matrix2d::Identity();
  double c_bar = 0.1;
  double cap = 1e12;
};

struct SwarmConfig {
  int particles = 40;
  int iterations = 200;
  double inertia = 0.729;
  double cognitive = 1.49;
  double social = 1.49;
};

struct GaConfig {
  int population = 40;
  int generations = 200;
  int tournament = 3;
  double blend_alpha = 0.5;
  double mutation_sigma = 0.05;  // fraction of the box span
  double mutation_rate = 0.1;
  int elitism = 1;
};

struct PolishConfig {
  bool enabled = true;
  int max_evaluations = 600;
  double initial_step = 0.05;  // fraction of the box span
  double x_tol = 1e-10;
  double f_tol = 1e-13;
};

struct FeasibilityScanConfig {
  double y_min = 0.05, y_max = 0.15, y_step = 0.005;
  double x_min = -0.2, x_max = 0.2, x_step = 0.001;
  double amplitude_fraction = 0.25;
  double min_abs_gy = 3.0;
};

struct ZdConfig {
  double step = 1e-4;
  int table_nodes = 1025;
  double max_orbit_duration = 20.0;
  std::optional<double> x_min, x_max;  // default: the feasible run
};

struct StabilizerConfig {
  Eigen::Vector3d q_c_diag{1.5e4, 5e4, 100.0};
  double r_c = 1.0;
  double tolerance = 1e-8;
  int max_periods = 200;
};

struct ClosedLoopConfig {
  double step = 1e-4;
  int periods = 10;
  double perturb_x = 0.01;     // fraction of Delta_1
  double perturb_xdot = 0.01;  // fraction of Delta_2
  double perturb_e = 0.005;    // m
  int record_every = 10;
};

/// Everything a run needs. Optional fields are resolved by ResolveScenario.
struct ScenarioConfig {
  std::string name = "scenario";
  MechanismInstance mechanism;
  std::optional<double> q3_rest, q4_rest;
  std::optional<double> ref_x_c, ref_amplitude, ref_y_bar;
  double ref_period = 1.0;
  FeasibilityScanConfig feasibility;
  ZdConfig zd;
  Mode mode = Mode::kTwoParam;
  CostKind cost = CostKind::kJ1;
  std::string solver = "pso";
  CostWeights weights;
  Eigen::Vector4d lower{0.0, 0.0, 0.01, 0.01};
  Eigen::Vector4d upper{1.0, 1.0, 0.03, 0.03};
  SwarmConfig swarm;
  GaConfig ga;
  PolishConfig polish;
  std::uint64_t seed = 1;
  std::optional<DesignParams> design;
  StabilizerConfig stabilizer;
  ClosedLoopConfig closed_loop;
  int scan_resolution = 100;
};

ScenarioConfig ParseScenario(const std::string& json_text);
ScenarioConfig LoadScenario(const std::string& path);
/// Canonical JSON with every field spelled out.
std::string ScenarioToJson(const ScenarioConfig& config);

struct FeasibleLine {
  double y = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
};

struct FeasibilityReport {
  std::vector<FeasibleLine> lines;  // longest run per scanned y
  FeasibleLine best;
  std::vector<SelectorReport> selectors;
};

/// Point test for the region N at nominal depth: reachable on the branch,
/// nonsingular partition, |g_y| above threshold, M_chi positive definite,
/// and both springs produce a restoring zero-dynamics force there.
bool IsFeasiblePoint(const MechanismInstance& m, const Eigen::Vector2d& chi,
                     double min_abs_gy);

/// Longest feasible x-interval at each scanned height.
FeasibilityReport FeasibilityScan(const MechanismInstance& m,
                                  const FeasibilityScanConfig& cfg);

/// Longest feasible x-interval on the single line y.
std::optional<FeasibleLine> FeasibleRun(const MechanismInstance& m, double y,
                                        const FeasibilityScanConfig& cfg);

/// A scenario with all defaults resolved and the zero-dynamics table built.
struct Scenario {
  ScenarioConfig config;
  MechanismInstance mechanism;
  Reference reference;
  double x_min = 0.0, x_max = 0.0;
  std::vector<SelectorReport> selectors;
  std::shared_ptr<const ZdTable> table;
};

Scenario ResolveScenario(const ScenarioConfig& config);

}  // namespace zdshape
