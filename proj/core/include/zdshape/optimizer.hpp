#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zdshape/scenario.hpp"
#include "zdshape/zero_dynamics.hpp"

namespace zdshape {

/// One evaluation as seen by a solver. `objective` is what gets minimized;
/// `violation` ranks infeasible points under the feasibility rule.
struct Evaluation {
  double objective = 0.0;
  double violation = 0.0;
  bool feasible = true;
};

using ObjectiveFn = std::function<Evaluation(const Eigen::VectorXd&)>;

struct Bounds {
  Eigen::VectorXd lower, upper;

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd Clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
};

/// Feasible beats infeasible, then lower objective, then lower violation.
bool Better(const Evaluation& a, const Evaluation& b);

struct SolverResult {
  Eigen::VectorXd x;
  Evaluation best;
  std::vector<double> history;  // best feasible objective per iteration (+inf if none)
  long evaluations = 0;
  std::string termination;
};

/// Global-best particle swarm with clamping and velocity zeroing at the box.
SolverResult PsoMinimize(const ObjectiveFn& f, const Bounds& box,
                         const SwarmConfig& cfg, std::uint64_t seed);

/// Real-coded genetic algorithm with feasibility-rule selection.
SolverResult GaMinimize(const ObjectiveFn& f, const Bounds& box,
                        const GaConfig& cfg, std::uint64_t seed);

/// Nelder-Mead with every vertex clamped to the box.
SolverResult NelderMead(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Bounds& box, const Eigen::VectorXd& x0,
                        const PolishConfig& cfg);

/// -c log(Omega / (1 + Omega)) for Omega > 0, else cap; never above cap.
double Barrier(double omega, double c_bar, double cap);

/// Trapezoidal rule on a uniform grid.
double Trapezoid(const std::vector<double>& f, double h);

/// Tracking part of the cost for a simulated zero-dynamics trajectory:
/// integral of e'Qe + R tau^2 plus the terminal e'Se.
double TrackingCost(const Trajectory& traj,
                    const std::function<double(double)>& rx,
                    const std::function<double(double)>& rx_dot,
                    const CostWeights& w);

struct CostResult {
  double objective = 0.0;    // core + barrier, as the swarm sees it
  double core = 0.0;         // tracking + design term
  double tracking = 0.0;     // J1
  double design_term = 0.0;  // delta' L delta in J2
  double barrier = 0.0;
  double omega = 0.0;
  double x0 = 0.0;
  bool feasible = false;
  bool escaped = false;
  std::string diagnostic;
};

/// Cost of a design for a resolved scenario.
class CostModel {
 public:
  CostModel(const Scenario& sc, Mode mode, CostKind kind);

  int dim() const { return mode_ == Mode::kTwoParam ? 2 : 4; }
  Bounds bounds() const;
  DesignParams Decode(const Eigen::VectorXd& v) const;
  Eigen::VectorXd Encode(const DesignParams& p) const;

  CostResult Evaluate(const DesignParams& p) const;
  /// Barrier-augmented objective used by the swarm.
  Evaluation BarrierObjective(const Eigen::VectorXd& v) const;
  /// Core cost plus Omega violation, used by the genetic solver.
  Evaluation ConstrainedObjective(const Eigen::VectorXd& v) const;

  Mode mode() const { return mode_; }
  CostKind kind() const { return kind_; }
  const Reference& reference() const { return ref_; }
  const CostWeights& weights() const { return w_; }
  std::shared_ptr<const ZdTable> table() const { return table_; }

 private:
  std::shared_ptr<const ZdTable> table_;
  Reference ref_;
  CostWeights w_;
  Mode mode_;
  CostKind kind_;
  Eigen::Vector4d lower_, upper_;
  double step_;
};

struct OptResult {
  DesignParams p_star;
  double j_star = 0.0;
  CostResult cost;
  long evaluations = 0;
  std::vector<double> history;
  std::uint64_t seed = 0;
  std::string solver;
  Mode mode = Mode::kTwoParam;
  CostKind kind = CostKind::kJ1;
  std::string termination;
};

/// Runs "pso" or "ga" on the scenario's cost, then the Nelder-Mead polish if
/// enabled. Throws AllInfeasible when no feasible design was seen.
OptResult Optimize(const Scenario& sc, const std::string& solver,
                   std::uint64_t seed);
OptResult Optimize(const CostModel& model, const ScenarioConfig& cfg,
                   const std::string& solver, std::uint64_t seed);

std::string OptResultToJson(const OptResult& r);
OptResult OptResultFromJson(const std::string& text);

struct GridPoint {
  int i = 0, j = 0;
  double a = 0.0, b = 0.0;
  double value = 0.0;
};

struct GridScanResult {
  std::string axis_a, axis_b;
  std::vector<double> a, b;       // axis samples
  std::vector<double> value;      // row-major over (j along b, i along a): value[j * na + i]
  std::vector<double> omega;
  std::vector<unsigned char> feasible;
  std::vector<GridPoint> local_minima;  // strict over the 8-neighbourhood, feasible only
  std::vector<GridPoint> infeasible;
  GridPoint minimum;

  double At(int i, int j) const { return value[j * a.size() + i]; }
};

/// Axis names: kb, kt, db, dt. Other coordinates stay at `base`.
GridScanResult GridScan(const CostModel& model, const std::string& axis_a,
                        const std::string& axis_b, int resolution,
                        const Eigen::Vector4d& lower,
                        const Eigen::Vector4d& upper,
                        const DesignParams& base = {});

}  // namespace zdshape
