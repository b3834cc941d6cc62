// Acceptance run: one PASS/FAIL line per criterion item, with every tolerance
// pinned below. Usage: acceptance [--golden-dir DIR] [--update-golden] [groups...]
// where groups are 1..6 (default: all).

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "zdshape/dynamics.hpp"
#include "zdshape/harness.hpp"
#include "zdshape/optimizer.hpp"
#include "zdshape/pipeline.hpp"
#include "zdshape/stabilizer.hpp"

using namespace zdshape;
namespace fs = std::filesystem;

namespace tol {
constexpr double kReducedMass = 5e-4;
constexpr double kSkew = 1e-8;
constexpr double kEnergyDrift = 1e-6;
constexpr double kEnergyHorizon = 10.0;
constexpr double kMinimalVsDae = 1e-8;
constexpr double kStructure = 1e-8;
constexpr double kIntegral = 1e-4;
constexpr double kSmallPeriod = 0.01;
constexpr double kRastrigin = 1e-2;
constexpr int kRastriginHits = 9;
constexpr double kSolverAgreement = 1e-3;
constexpr double kNesting = 1e-6;
constexpr double kOptimizerSeconds = 30 * 60;
constexpr double kRiccatiResidual = 1e-6;
constexpr double kPeriodicityGap = 1e-8;
constexpr double kLtiOracle = 1e-6;
constexpr double kOnOrbitInput = 1e-8;
constexpr double kDistance = 1e-3;
constexpr double kSettlePeriods = 5.0;
constexpr double kStabilizerSeconds = 5 * 60;
constexpr int kMinArtifacts = 8;
}  // namespace tol

namespace {

int failures = 0;

void Report(const std::string& id, bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
void Report(const std::string& id, bool ok, const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  std::printf("%s %-26s %s\n", ok ? "PASS" : "FAIL", id.c_str(), buf);
  std::fflush(stdout);
  if (!ok) ++failures;
}

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const Scenario& Default() {
  static const Scenario sc = ResolveScenario(ScenarioConfig{});
  return sc;
}

Eigen::Vector2d RandomTaskPoint(std::mt19937_64& rng) {
  const Scenario& sc = Default();
  std::uniform_real_distribution<double> ux(sc.x_min + 0.005, sc.x_max - 0.005);
  std::uniform_real_distribution<double> uy(-0.003, 0.003);
  return {ux(rng), sc.reference.y_bar + uy(rng)};
}

// ---------------------------------------------------------------- 1

void Inertia() {
  const LinkTable t = LinkTable::Default();
  const std::array<double, 4> l{0.080, 0.235, 0.052, 0.135};
  const std::array<double, 4> m{0.071, 0.195, 0.049, 0.115};
  const std::array<double, 4> j{0.188e-3, 1.041e-3, 0.035e-3, 0.767e-3};
  bool exact = true;
  for (int i = 0; i < 4; ++i) exact = exact && t.length[i] == l[i] && t.mass[i] == m[i] && t.inertia[i] == j[i];
  Report("1.table", exact, "link lengths, masses and inertias equal the prototype data");
  const double m3 = LinkInertiaFromDepth(t, 0.016, 3).mass;
  const double m4 = LinkInertiaFromDepth(t, 0.0183, 4).mass;
  Report("1.reduced_mass", std::abs(m3 - 0.039) < tol::kReducedMass && std::abs(m4 - 0.105) < tol::kReducedMass,
         "m3(0.016) = %.5f, m4(0.0183) = %.5f (tol %.0e)", m3, m4, tol::kReducedMass);
}

// ---------------------------------------------------------------- 2

void Dynamics() {
  const Scenario& sc = Default();
  const MechanismInstance& m = sc.mechanism;
  const DesignParams p{0.0706, 0.00265, 0.02, 0.02};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);

  double skew = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector4d q = Configuration(m, RandomTaskPoint(rng));
    const Eigen::Vector4d qd(n(rng), n(rng), n(rng), n(rng)), v(n(rng), n(rng), n(rng), n(rng));
    const double h = 1e-6;
    const Eigen::Matrix4d mdot = (MassMatrix(p, m, Eigen::Vector4d(q + h * qd)) -
                                  MassMatrix(p, m, Eigen::Vector4d(q - h * qd))) / (2 * h);
    skew = std::max(skew, std::abs(v.dot((mdot - 2.0 * CoriolisMatrix(p, m, q, qd)) * v)));
  }
  Report("2.skew_symmetry", skew < tol::kSkew, "max |v'(Mdot - 2C)v| over 100 states = %.2e", skew);

  {
    const DynamicParams dp = DynamicParams::FromDesign(m, p);
    Eigen::Vector2d chi(sc.reference.x_c + 0.01, sc.reference.y_bar), v(0.0, 0.0);
    const double e0 = TotalEnergy(dp, m, chi, v), h = 1e-4;
    auto acc = [&](const Eigen::Vector2d& c, const Eigen::Vector2d& cd) {
      return TaskAcceleration(dp, m, c, cd, 0.0);
    };
    double drift = 0.0;
    const long steps = std::lround(tol::kEnergyHorizon / h);
    for (long k = 0; k < steps; ++k) {
      const Eigen::Vector2d a1 = acc(chi, v);
      const Eigen::Vector2d a2 = acc(chi + 0.5 * h * v, v + 0.5 * h * a1);
      const Eigen::Vector2d a3 = acc(chi + 0.5 * h * (v + 0.5 * h * a1), v + 0.5 * h * a2);
      const Eigen::Vector2d a4 = acc(chi + h * (v + 0.5 * h * a2), v + h * a3);
      chi += h * v + h * h / 6.0 * (a1 + a2 + a3);
      v += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
      drift = std::max(drift, std::abs(TotalEnergy(dp, m, chi, v) - e0) / e0);
    }
    Report("2.energy_drift", drift < tol::kEnergyDrift, "max relative drift over %.0f s, u = 0: %.2e",
           tol::kEnergyHorizon, drift);
  }

  {
    const DynamicParams dp = DynamicParams::FromDesign(m, {0.2, 0.05, 0.015, 0.025});
    std::uniform_real_distribution<double> uu(-0.5, 0.5), uv(-0.3, 0.3);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const Eigen::Vector2d chi = RandomTaskPoint(rng), chid(uv(rng), uv(rng));
      const double u = uu(rng);
      const Eigen::Vector4d q = Configuration(m, chi);
      const Eigen::Vector4d qd = TaskToJoint(m, q) * chid;
      const DaeSolution dae = DaeAcceleration(dp, m, q, qd, u);
      const double h = 1e-6;
      const Eigen::Matrix<double, 2, 4> jdot = (OutputJacobian(m, Eigen::Vector4d(q + h * qd)) -
                                                OutputJacobian(m, Eigen::Vector4d(q - h * qd))) / (2 * h);
      const Eigen::Vector2d from_dae = OutputJacobian(m, q) * dae.qddot + jdot * qd;
      worst = std::max(worst, (TaskAcceleration(dp, m, chi, chid, u) - from_dae).cwiseAbs().maxCoeff());
    }
    Report("2.minimal_vs_dae", worst < tol::kMinimalVsDae, "max |chi''| difference over 50 states = %.2e", worst);
  }
}

// ---------------------------------------------------------------- 3

void ZeroDynamicsChecks() {
  const Scenario& sc = Default();
  const DesignParams p{0.0706, 0.00265, 0.02, 0.02};
  double res = 0.0;
  for (int k = 0; k <= 50; ++k) {
    const double x = sc.x_min + (sc.x_max - sc.x_min) * k / 50.0;
    res = std::max(res, ZdCoefficients(p, sc.mechanism, sc.reference.y_bar, x).structure_residual);
  }
  Report("3.quadratic_structure", res < tol::kStructure, "max residual over 51 points = %.2e", res);

  const ZdStageOutput z = SimulateZdStage(sc, p);
  const std::vector<double> xdot = z.zd.Column("xdot"), integral = z.zd.Column("I");
  double scale = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < xdot.size(); ++k) {
    scale = std::max(scale, xdot[k] * xdot[k]);
    worst = std::max(worst, std::abs(integral[k]));
  }
  Report("3.integral_of_motion", worst / scale < tol::kIntegral,
         "max |I| / max x'^2 over one period = %.2e", worst / scale);

  const MechanismZd zd(sc.table, p);
  const double x0 = FindEquilibrium(zd, zd.XMin(), zd.XMax(), sc.reference.x_c).x0;
  const double om = Omega(zd, x0, 1e-3);
  const Orbit o = BuildOrbit(zd, x0 + 1e-4, x0, 1e-4, 20.0);
  const double lin = 2 * std::numbers::pi / std::sqrt(om);
  Report("3.small_amplitude_period", std::abs(o.period - lin) < tol::kSmallPeriod * lin,
         "T = %.6f s vs 2 pi / sqrt(Omega) = %.6f s (rel %.2e)", o.period, lin, std::abs(o.period - lin) / lin);
}

// ---------------------------------------------------------------- 4

struct OptimizerOutcome {
  OptResult pso, ga;
  bool ok = false;
};

double Rastrigin(const Eigen::VectorXd& v) {
  double s = 10.0 * v.size();
  for (int i = 0; i < v.size(); ++i) s += v[i] * v[i] - 10.0 * std::cos(2.0 * std::numbers::pi * v[i]);
  return s;
}

OptimizerOutcome Optimizer() {
  OptimizerOutcome out;
  const Scenario& sc = Default();
  {
    const Bounds box{Eigen::VectorXd::Constant(2, -5.12), Eigen::VectorXd::Constant(2, 5.12)};
    const ObjectiveFn f = [](const Eigen::VectorXd& v) { return Evaluation{Rastrigin(v), 0.0, true}; };
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      if (PsoMinimize(f, box, sc.config.swarm, seed).x.cwiseAbs().maxCoeff() < tol::kRastrigin) ++hits;
    }
    Report("4.rastrigin", hits >= tol::kRastriginHits, "PSO %dx%d reached the origin within %.0e for %d/10 seeds",
           sc.config.swarm.particles, sc.config.swarm.iterations, tol::kRastrigin, hits);
  }

  const auto t0 = std::chrono::steady_clock::now();
  out.pso = Optimize(sc, "pso", sc.config.seed);
  const double pso_seconds = Seconds(t0);
  out.ga = Optimize(sc, "ga", sc.config.seed);
  const double dkb = std::abs(out.pso.p_star.k_b - out.ga.p_star.k_b);
  const double dkt = std::abs(out.pso.p_star.k_t - out.ga.p_star.k_t);
  out.ok = true;
  Report("4.pso_vs_ga", dkb < tol::kSolverAgreement && dkt < tol::kSolverAgreement,
         "PSO (%.6f, %.6f) vs GA (%.6f, %.6f), max diff %.2e", out.pso.p_star.k_b, out.pso.p_star.k_t,
         out.ga.p_star.k_b, out.ga.p_star.k_t, std::max(dkb, dkt));

  {
    // Optimal J1 per mode is the best of both solvers; each value is printed.
    ScenarioConfig cfg = sc.config;
    cfg.mode = Mode::kFourParam;
    const CostModel four(sc, Mode::kFourParam, CostKind::kJ1);
    const OptResult p4 = Optimize(four, cfg, "pso", sc.config.seed);
    const OptResult g4 = Optimize(four, cfg, "ga", sc.config.seed);
    const OptResult& best4 = p4.cost.tracking <= g4.cost.tracking ? p4 : g4;
    const double j2 = std::min(out.pso.cost.tracking, out.ga.cost.tracking), j4 = best4.cost.tracking;
    Report("4.four_param_nesting", j4 <= j2 + tol::kNesting,
           "J1 four-param %.9g (%s at %.5f, %.5f, %.4f, %.4f; pso %.6g, ga %.6g) vs two-param %.9g "
           "(pso %.6g, ga %.6g)",
           j4, best4.solver.c_str(), best4.p_star.k_b, best4.p_star.k_t, best4.p_star.delta_b,
           best4.p_star.delta_t, p4.cost.tracking, g4.cost.tracking, j2, out.pso.cost.tracking,
           out.ga.cost.tracking);
  }

  const auto t1 = std::chrono::steady_clock::now();
  const GridScanResult g = ScanStage(sc, "kb", "kt", 100);
  const double grid_seconds = Seconds(t1);
  const bool sole = g.infeasible.size() == 1 && g.infeasible[0].i == 0 && g.infeasible[0].j == 0 &&
                    g.a[0] == 0.0 && g.b[0] == 0.0;
  Report("4.grid_landscape", g.local_minima.size() >= 2 && sole,
         "100x100 grid: %zu strict local minima, %zu infeasible point(s)%s", g.local_minima.size(),
         g.infeasible.size(), sole ? " at (0, 0)" : "");
  const double total = pso_seconds + grid_seconds;
  Report("4.runtime", total < tol::kOptimizerSeconds, "grid 100x100 %.1f s + swarm %dx%d %.1f s = %.1f s",
         grid_seconds, sc.config.swarm.particles, sc.config.swarm.iterations, pso_seconds, total);
  return out;
}

// ---------------------------------------------------------------- 5

Eigen::Matrix3d HamiltonianAre(const Eigen::Matrix3d& a, const Eigen::Vector3d& b, const Eigen::Matrix3d& q,
                               double r) {
  Eigen::Matrix<double, 6, 6> h;
  h << a, -b * b.transpose() / r, -q, -a.transpose();
  Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(h);
  Eigen::Matrix<std::complex<double>, 6, 3> v;
  int col = 0;
  for (int i = 0; i < 6 && col < 3; ++i) {
    if (es.eigenvalues()[i].real() < 0) v.col(col++) = es.eigenvectors().col(i);
  }
  const Eigen::Matrix3cd x1 = v.topRows<3>(), x2 = v.bottomRows<3>();
  return (x2 * x1.inverse()).real();
}

void Stabilizer(const DesignParams& p) {
  const Scenario& sc = Default();
  const auto t0 = std::chrono::steady_clock::now();
  const Stabilization st = Stabilize(sc, p);
  const double stabilize_seconds = Seconds(t0);
  Report("5.riccati", st.riccati_residual < tol::kRiccatiResidual && st.gain->periodicity_gap() < tol::kPeriodicityGap,
         "residual %.2e at interior samples, periodicity gap %.2e, %d sweeps", st.riccati_residual,
         st.gain->periodicity_gap(), st.gain->sweeps());

  {
    // Frozen coefficients from a quarter period along the orbit.
    const std::size_t k = st.linearization.a.size() / 4;
    PeriodicSystem lti;
    lti.period = st.orbit.period;
    lti.a.assign(st.linearization.a.size(), st.linearization.a[k]);
    lti.b.assign(st.linearization.b.size(), st.linearization.b[k]);
    const Eigen::Matrix3d q = sc.config.stabilizer.q_c_diag.asDiagonal();
    const double r = sc.config.stabilizer.r_c;
    const PeriodicGain g = SolvePeriodicRiccati(lti, q, r);
    const Eigen::Matrix3d oracle = HamiltonianAre(lti.a[0], lti.b[0], q, r);
    double worst = 0.0;
    for (const auto& pk : g.p()) worst = std::max(worst, (pk - oracle).norm() / oracle.norm());
    Report("5.lti_vs_hamiltonian", worst < tol::kLtiOracle, "max relative |P - P_are| = %.2e", worst);
  }

  const StabilizeDiagnostics d = Diagnose(st);
  Report("5.on_orbit_input", d.on_orbit_u_error < tol::kOnOrbitInput, "max |u - tau| on %zu orbit samples = %.2e",
         st.orbit.size(), d.on_orbit_u_error);

  ScenarioConfig cfg = sc.config;
  cfg.closed_loop.perturb_x = 0.01;
  cfg.closed_loop.perturb_xdot = 0.01;
  cfg.closed_loop.perturb_e = 0.0;
  Scenario perturbed = sc;
  perturbed.config = cfg;
  const auto t1 = std::chrono::steady_clock::now();
  const ClosedLoopRecord rec = ClosedLoop(perturbed, st, PerturbedInitialState(perturbed, st), 10 * st.orbit.period);
  const double closed_seconds = Seconds(t1);
  const ClosedLoopSummary s = Summarize(rec, st.orbit.period);
  const bool settled = !rec.escaped && s.first_below >= 0 && s.first_below <= tol::kSettlePeriods * st.orbit.period;
  Report("5.convergence", settled && s.slope < 0,
         "1%% perturbation: d < %.0e from t = %.3f T onwards, log-slope %.3f per period, final d %.2e",
         tol::kDistance, s.first_below / st.orbit.period, s.slope, s.final_d);
  Report("5.runtime", stabilize_seconds + closed_seconds < tol::kStabilizerSeconds,
         "stabilize %.1f s + closed loop (10 periods) %.1f s", stabilize_seconds, closed_seconds);
}

// ---------------------------------------------------------------- 6

const std::vector<std::string> kFrozen = {"result.json", "zd.csv", "orbit.csv", "closed_loop.csv", "stabilize.json"};

void GoldenPath(const std::string& golden_dir, bool update) {
  {
    const fs::path out = fs::temp_directory_path() / "zdshape_acceptance_default";
    fs::remove_all(out);
    const ScenarioConfig cfg;
    RunOptions opts;
    opts.out_dir = out.string();
    opts.seed = cfg.seed;
    const RunManifest man = RunScenario(cfg, ScenarioToJson(cfg), opts);
    Report("6.golden_path", man.status == "ok" && man.stages.size() == 6 &&
                                static_cast<int>(man.outputs.size()) >= tol::kMinArtifacts,
           "default scenario: %s, %zu stages, %zu artifacts%s%s", man.status.c_str(), man.stages.size(),
           man.outputs.size(), man.error.empty() ? "" : ": ", man.error.c_str());
  }

  const std::string text = ReadFile(golden_dir + "/scenario.json");
  const ScenarioConfig cfg = ParseScenario(text);
  std::vector<RunManifest> runs;
  std::vector<fs::path> dirs;
  for (int k = 0; k < 2; ++k) {
    dirs.push_back(fs::temp_directory_path() / ("zdshape_acceptance_golden" + std::to_string(k)));
    fs::remove_all(dirs.back());
    RunOptions opts;
    opts.out_dir = dirs.back().string();
    opts.seed = cfg.seed;
    runs.push_back(RunScenario(cfg, text, opts));
  }
  if (update) {
    for (const auto& f : kFrozen) fs::copy_file(dirs[0] / f, fs::path(golden_dir) / f, fs::copy_options::overwrite_existing);
    std::printf("golden files updated in %s\n", golden_dir.c_str());
  }
  std::vector<std::string> mismatched;
  for (const auto& f : kFrozen) {
    const fs::path frozen = fs::path(golden_dir) / f;
    if (!fs::exists(frozen) || ReadFile(frozen.string()) != ReadFile((dirs[0] / f).string())) mismatched.push_back(f);
  }
  std::string list;
  for (const auto& f : mismatched) list += " " + f;
  const bool same = runs[0].Hash() == runs[1].Hash() && runs[0].status == "ok";
  Report("6.determinism", same && mismatched.empty(), "manifest %s / %s, frozen files %s%s",
         runs[0].Hash().c_str(), runs[1].Hash().c_str(), mismatched.empty() ? "identical" : "differ:",
         list.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  std::string golden_dir = std::string(ZDSHAPE_SOURCE_DIR) + "/tests/golden";
  bool update = false;
  std::set<int> groups;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--update-golden") update = true;
    else if (a == "--golden-dir" && i + 1 < argc) golden_dir = argv[++i];
    else groups.insert(std::stoi(a));
  }
  auto want = [&](int g) { return groups.empty() || groups.count(g) > 0; };
  try {
    if (want(1)) Inertia();
    if (want(2)) Dynamics();
    if (want(3)) ZeroDynamicsChecks();
    DesignParams p_star{0.0706, 0.00265, 0.02, 0.02};
    if (want(4)) {
      const OptimizerOutcome o = Optimizer();
      if (o.ok) p_star = o.pso.p_star;
    } else if (want(5)) {
      p_star = Optimize(Default(), "pso", Default().config.seed).p_star;
    }
    if (want(5)) Stabilizer(p_star);
    if (want(6)) GoldenPath(golden_dir, update);
  } catch (const std::exception& e) {
    Report("error", false, "%s", e.what());
  }
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
