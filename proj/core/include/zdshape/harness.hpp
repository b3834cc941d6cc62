#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zdshape/optimizer.hpp"
#include "zdshape/scenario.hpp"
#include "zdshape/stabilizer.hpp"
#include "zdshape/zero_dynamics.hpp"

namespace zdshape {

/// Normalized distance of (x, x') to a closed orbit, by brute force over the
/// orbit samples refined `densify` times with cubic Hermite interpolation.
class OrbitDistance {
 public:
  OrbitDistance(const Orbit& orbit, const ZdSystem& zd, int densify = 10);
  OrbitDistance(std::vector<double> x, std::vector<double> xdot, double delta1,
                double delta2);

  double operator()(double x, double xdot) const;
  double delta1() const { return delta1_; }
  double delta2() const { return delta2_; }
  std::size_t size() const { return x_.size(); }

 private:
  std::vector<double> x_, xdot_;
  double delta1_, delta2_;
};

/// Input law u(t, chi, chi', PFL terms at the state).
using InputLaw = std::function<double(double, const Eigen::Vector2d&,
                                      const Eigen::Vector2d&, const PflTerms&)>;

struct ClosedLoopRecord {
  std::vector<double> t, x, xdot, y, ydot, u, e, integral, d, tau_ref;
  std::vector<Eigen::Vector4d> q;
  std::vector<double> constraint_residual;
  bool escaped = false;
  std::string diagnostic;

  std::size_t size() const { return t.size(); }
};

struct SimulationOptions {
  double step = 1e-4;
  int record_every = 10;
  bool reconstruct_joints = true;
};

/// RK4 on the minimal form under `law`. Stops with a partial record when the
/// state leaves the model's domain. `distance`, `integral` and `tau_ref` are
/// optional extras recorded alongside.
ClosedLoopRecord SimulatePlant(const MechanismInstance& m, const DesignParams& p,
                               const TaskState& init, double duration,
                               const InputLaw& law, const SimulationOptions& opts,
                               const OrbitDistance* distance = nullptr,
                               const MotionIntegral* integral = nullptr,
                               const std::function<double(double)>& tau_ref = {});

/// Everything the stabilization stage produces for one design.
struct Stabilization {
  DesignParams p;
  std::shared_ptr<const MechanismZd> zd;
  Orbit orbit;
  PeriodicSystem linearization;
  GramianResult gramian;
  std::shared_ptr<const PeriodicGain> gain;
  std::shared_ptr<const MotionIntegral> integral;
  std::shared_ptr<const OrbitalController> controller;
  double riccati_residual = 0.0;  // max over interior samples, P' by differences
  double min_eig_p = 0.0;
};

Stabilization Stabilize(const Scenario& sc, const DesignParams& p);

/// tau on the orbit at time t (periodic), linear interpolation.
double OrbitFeedforward(const Orbit& orbit, double t);

struct ClosedLoopSummary {
  double period = 0.0;
  std::vector<double> period_max_d;  // max d over each period
  double slope = 0.0;                // least-squares slope of log(max d) per period, first 5 periods
  double first_below = -1.0;         // first time after which d stays below 1e-3, -1 if never
  double final_d = 0.0;
};

ClosedLoopRecord ClosedLoop(const Scenario& sc, const Stabilization& st,
                            const TaskState& init, double duration);
/// Initial state displaced from the orbit anchor per the scenario.
TaskState PerturbedInitialState(const Scenario& sc, const Stabilization& st);
ClosedLoopSummary Summarize(const ClosedLoopRecord& rec, double period, int fit_periods = 5);

struct DaeReplay {
  double max_chi_error = 0.0;
  double max_constraint = 0.0;
  std::size_t samples = 0;
};

/// Re-simulates the recorded input through the index-reduced DAE and through
/// the minimal form, both open loop with u interpolated from the record.
DaeReplay ReplayThroughDae(const MechanismInstance& m, const DesignParams& p,
                           const ClosedLoopRecord& rec, double duration, double step);

/// Minimal CSV table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> Column(const std::string& name) const;
};

void WriteCsv(const std::string& path, const CsvTable& table);
CsvTable ReadCsv(const std::string& path);

CsvTable TrajectoryCsv(const Trajectory& traj, const MotionIntegral& integral);
CsvTable ClosedLoopCsv(const ClosedLoopRecord& rec);
CsvTable GainCsv(const PeriodicGain& gain, const PeriodicSystem& sys);
CsvTable GridCsv(const GridScanResult& grid);
CsvTable OrbitCsv(const Orbit& orbit);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color;
  bool dashed = false;
};

struct PlotPanel {
  std::string title, x_label, y_label;
  std::vector<PlotSeries> series;
  bool log_y = false;
};

/// Grid of line-plot panels as a standalone SVG document.
std::string SvgFigure(const std::vector<PlotPanel>& panels, int columns);
/// Heat map of a grid scan (log color scale, infeasible cells hatched).
std::string SvgHeatmap(const CsvTable& grid, const std::string& a_name,
                       const std::string& b_name);

std::uint64_t Fnv1a(const std::string& bytes);
std::string HexHash(std::uint64_t h);
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& content);

struct RunManifest {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> stages;
  std::vector<std::pair<std::string, double>> tolerances;
  std::vector<std::pair<std::string, std::string>> outputs;  // file, hash
  std::string status = "ok";
  std::string error;
  int exit_code = 0;

  std::string ToJson() const;
  std::string Hash() const;
};

/// Regenerates every SVG figure in `dir` from the CSV files found there and
/// returns the files written.
std::vector<std::string> RenderReport(const std::string& dir);

}  // namespace zdshape
