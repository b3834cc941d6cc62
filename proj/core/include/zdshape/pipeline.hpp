#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zdshape/harness.hpp"
#include "zdshape/optimizer.hpp"
#include "zdshape/scenario.hpp"

namespace zdshape {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit code for an error: 1 for invalid input, 2 when no
/// admissible design or state exists, 3 for numerical failures.
int ExitCodeFor(const ZdError& e);

/// Workspace scan of the scenario's mechanism: one row per scanned height.
CsvTable FeasibilityCsv(const FeasibilityReport& report);

/// Cost landscape over two design axes. Bounds come from the scenario.
GridScanResult ScanStage(const Scenario& sc, const std::string& axis_a,
                         const std::string& axis_b, int resolution);

/// Runs the optimizer, or, when the scenario pins a design, evaluates that
/// design alone. Throws AllInfeasible when nothing feasible is found.
OptResult OptimizeStage(const Scenario& sc, const std::string& solver,
                        std::uint64_t seed);

/// Design to use downstream: the optimum if given, else the pinned design,
/// else the library default.
DesignParams DesignFor(const Scenario& sc, const std::optional<OptResult>& result);

struct ZdStageOutput {
  Trajectory trajectory;
  CsvTable zd, reference;
};

/// Zero dynamics from the reference start over one reference period, with
/// the integral of motion anchored at the start.
ZdStageOutput SimulateZdStage(const Scenario& sc, const DesignParams& p);

struct StabilizeDiagnostics {
  double period = 0.0, delta1 = 0.0, delta2 = 0.0, closure_error = 0.0;
  double riccati_residual = 0.0, periodicity_gap = 0.0, min_eig_p = 0.0;
  double gramian_min_eig = 0.0;
  int sweeps = 0;
  double on_orbit_u_error = 0.0;  // max |u - tau| along the orbit samples

  std::string ToJson(const DesignParams& p) const;
};

StabilizeDiagnostics Diagnose(const Stabilization& st);

struct ClosedLoopStageOutput {
  ClosedLoopRecord record;
  ClosedLoopSummary summary;
  DaeReplay replay;
  double max_constraint = 0.0;
  double min_d = 0.0;

  std::string ToJson() const;
};

/// Closed loop from the perturbed anchor for the configured number of
/// periods, followed by the DAE replay of the recorded input.
ClosedLoopStageOutput ClosedLoopStage(const Scenario& sc, const Stabilization& st);

struct RunOptions {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::string solver;  // empty: scenario setting
  bool grid_scan = true;
};

/// Full pipeline: feasibility scan, optimize, simulate-zd, stabilize,
/// closed-loop, report. Writes every artifact plus manifest.json into the
/// output directory; on failure the manifest records the error and exit code.
RunManifest RunScenario(const ScenarioConfig& config, const std::string& scenario_text,
                        const RunOptions& opts);

}  // namespace zdshape
