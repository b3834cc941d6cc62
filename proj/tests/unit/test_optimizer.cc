#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "zdshape/optimizer.hpp"

using namespace zdshape;

namespace {

double Rastrigin(const Eigen::VectorXd& v) {
  double s = 10.0 * v.size();
  for (int i = 0; i < v.size(); ++i) s += v[i] * v[i] - 10.0 * std::cos(2.0 * std::numbers::pi * v[i]);
  return s;
}

Bounds Box(int dim, double lo, double hi) {
  return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
}

ObjectiveFn Plain(double (*f)(const Eigen::VectorXd&)) {
  return [f](const Eigen::VectorXd& v) { return Evaluation{f(v), 0.0, true}; };
}

double Sphere(const Eigen::VectorXd& v) { return (v.array() - 0.3).square().sum(); }

CostModel DefaultModel(Mode mode = Mode::kTwoParam) {
  const auto& sc = zdtest::DefaultScenario();
  return CostModel(sc, mode, CostKind::kJ1);
}

}  // namespace

TEST(Ordering, FeasibilityRule) {
  const Evaluation feas{5.0, 0.0, true}, better{4.0, 0.0, true};
  const Evaluation inf_small{0.0, 0.1, false}, inf_large{0.0, 2.0, false};
  EXPECT_TRUE(Better(better, feas));
  EXPECT_FALSE(Better(feas, better));
  EXPECT_TRUE(Better(feas, inf_small));
  EXPECT_TRUE(Better(inf_small, inf_large));
}

TEST(Pso, FindsSphereMinimum) {
  SwarmConfig cfg;
  cfg.particles = 20;
  cfg.iterations = 100;
  const SolverResult r = PsoMinimize(Plain(Sphere), Box(3, -1, 1), cfg, 7);
  EXPECT_LT((r.x.array() - 0.3).abs().maxCoeff(), 1e-4);
  EXPECT_EQ(r.history.size(), 101u);  // initial swarm plus one entry per iteration
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
}

TEST(Pso, RastriginGlobalMinimum) {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SolverResult r = PsoMinimize(Plain(Rastrigin), Box(2, -5.12, 5.12), SwarmConfig{}, seed);
    if (r.x.cwiseAbs().maxCoeff() < 1e-2) ++hits;
  }
  EXPECT_GE(hits, 9);
}

TEST(Pso, DeterministicForSeed) {
  const SolverResult a = PsoMinimize(Plain(Rastrigin), Box(2, -5.12, 5.12), SwarmConfig{}, 3);
  const SolverResult b = PsoMinimize(Plain(Rastrigin), Box(2, -5.12, 5.12), SwarmConfig{}, 3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.history, b.history);
}

TEST(Pso, StaysInsideBox) {
  SwarmConfig cfg;
  cfg.particles = 10;
  cfg.iterations = 30;
  const Bounds box = Box(2, 0.5, 1.0);
  const ObjectiveFn f = [&](const Eigen::VectorXd& v) {
    EXPECT_TRUE((v.array() >= 0.5).all() && (v.array() <= 1.0).all());
    return Evaluation{v.sum(), 0.0, true};
  };
  const SolverResult r = PsoMinimize(f, box, cfg, 1);
  EXPECT_NEAR(r.best.objective, 1.0, 1e-6);
}

TEST(Ga, RastriginGlobalMinimum) {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SolverResult r = GaMinimize(Plain(Rastrigin), Box(2, -5.12, 5.12), GaConfig{}, seed);
    if (r.x.cwiseAbs().maxCoeff() < 1e-2) ++hits;
  }
  EXPECT_GE(hits, 9);
}

TEST(Ga, RespectsConstraint) {
  // Minimize x + y subject to x^2 + y^2 >= 1 inside [-2, 2]^2.
  const ObjectiveFn f = [](const Eigen::VectorXd& v) {
    const double g = 1.0 - v.squaredNorm();
    return Evaluation{v.sum(), std::max(0.0, g), g <= 0.0};
  };
  const SolverResult r = GaMinimize(f, Box(2, -2, 2), GaConfig{}, 11);
  EXPECT_TRUE(r.best.feasible);
  EXPECT_NEAR(r.best.objective, -4.0, 1e-2);
}

TEST(NelderMead, Rosenbrock) {
  PolishConfig cfg;
  cfg.max_evaluations = 4000;
  const auto f = [](const Eigen::VectorXd& v) {
    return 100.0 * std::pow(v[1] - v[0] * v[0], 2) + std::pow(1.0 - v[0], 2);
  };
  const SolverResult r = NelderMead(f, Box(2, -2, 2), Eigen::Vector2d(-1.2, 1.0), cfg);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, ClampsToBox) {
  const auto f = [](const Eigen::VectorXd& v) { return v[0]; };
  const SolverResult r = NelderMead(f, Box(1, 0.2, 1.0), Eigen::VectorXd::Constant(1, 0.7), PolishConfig{});
  EXPECT_NEAR(r.x[0], 0.2, 1e-9);
}

TEST(Barrier, MonotoneAndCapped) {
  const double c = 0.1, cap = 1e12;
  EXPECT_EQ(Barrier(0.0, c, cap), cap);
  EXPECT_EQ(Barrier(-3.0, c, cap), cap);
  EXPECT_NEAR(Barrier(1.0, c, cap), c * std::log(2.0), 1e-15);
  double prev = cap;
  for (double w = 1e-12; w < 1e6; w *= 10) {
    const double b = Barrier(w, c, cap);
    EXPECT_LE(b, prev);
    EXPECT_GT(b, 0.0);
    prev = b;
  }
}

TEST(Trapezoid, ExactOnLinearAndConvergentOnSine) {
  EXPECT_NEAR(Trapezoid({0.0, 1.0, 2.0, 3.0}, 0.5), 2.25, 1e-15);
  for (int n : {100, 1000}) {
    std::vector<double> f(n + 1);
    const double h = std::numbers::pi / n;
    for (int i = 0; i <= n; ++i) f[i] = std::sin(i * h);
    // Euler-Maclaurin: I - T = h^2 (f'(0) - f'(pi)) / 12 + O(h^4) = h^2 / 6.
    EXPECT_NEAR(2.0 - Trapezoid(f, h), h * h / 6.0, 1e-2 * h * h);
  }
}

TEST(TrackingCost, ZeroForPerfectTracking) {
  Trajectory t;
  t.step = 0.1;
  for (int i = 0; i <= 10; ++i) {
    t.s.push_back(0.1 * i);
    t.x.push_back(std::sin(0.1 * i));
    t.xdot.push_back(std::cos(0.1 * i));
    t.tau.push_back(0.0);
  }
  CostWeights w;
  EXPECT_NEAR(TrackingCost(t, [](double s) { return std::sin(s); }, [](double s) { return std::cos(s); }, w), 0.0, 1e-15);
  // Constant offset in x: Q integral plus terminal term.
  const double c = TrackingCost(t, [](double s) { return std::sin(s) + 0.1; }, [](double s) { return std::cos(s); }, w);
  EXPECT_NEAR(c, w.q(0, 0) * 0.01 * 1.0 + w.s(0, 0) * 0.01, 1e-12);
}

TEST(CostModel, EncodeDecodeRoundTrip) {
  const CostModel m4 = DefaultModel(Mode::kFourParam);
  const DesignParams p = zdtest::NominalDesign();
  const DesignParams q = m4.Decode(m4.Encode(p));
  EXPECT_EQ(q.AsVector(), p.AsVector());
  EXPECT_EQ(m4.dim(), 4);
  EXPECT_EQ(DefaultModel().dim(), 2);
}

TEST(CostModel, ZeroStiffnessIsInfeasible) {
  const CostModel m = DefaultModel();
  DesignParams p = zdtest::NominalDesign();
  p.k_b = p.k_t = 0.0;
  const CostResult c = m.Evaluate(p);
  EXPECT_FALSE(c.feasible);
  EXPECT_LE(c.omega, 0.0);
  const Evaluation e = m.BarrierObjective(m.Encode(p));
  EXPECT_GE(e.objective, m.weights().cap);
  EXPECT_FALSE(m.ConstrainedObjective(m.Encode(p)).feasible);
}

TEST(CostModel, NominalDesignIsFeasible) {
  const CostModel m = DefaultModel();
  const CostResult c = m.Evaluate(zdtest::NominalDesign());
  ASSERT_TRUE(c.feasible) << c.diagnostic;
  EXPECT_GT(c.omega, 0.0);
  EXPECT_GT(c.tracking, 0.0);
  EXPECT_EQ(c.design_term, 0.0);
  EXPECT_NEAR(c.objective, c.core + c.barrier, 1e-12 * c.objective);
}

TEST(CostModel, J2AddsDesignTerm) {
  const auto& sc = zdtest::DefaultScenario();
  const CostModel j1(sc, Mode::kFourParam, CostKind::kJ1), j2(sc, Mode::kFourParam, CostKind::kJ2);
  const DesignParams p = zdtest::NominalDesign();
  const CostResult a = j1.Evaluate(p), b = j2.Evaluate(p);
  EXPECT_NEAR(b.tracking, a.tracking, 1e-12 * a.tracking);
  EXPECT_GT(b.design_term, 0.0);
  EXPECT_NEAR(b.core, b.tracking + b.design_term, 1e-12 * b.core);
}

TEST(GridScan, SmallGridProperties) {
  const CostModel m = DefaultModel();
  const auto& cfg = zdtest::DefaultScenario().config;
  const GridScanResult g = GridScan(m, "kb", "kt", 9, cfg.lower, cfg.upper, zdtest::NominalDesign());
  ASSERT_EQ(g.a.size(), 9u);
  ASSERT_EQ(g.value.size(), 81u);
  EXPECT_EQ(g.a.front(), cfg.lower[0]);
  EXPECT_EQ(g.a.back(), cfg.upper[0]);
  ASSERT_EQ(g.infeasible.size(), 1u);
  EXPECT_EQ(g.infeasible[0].i, 0);
  EXPECT_EQ(g.infeasible[0].j, 0);
  for (std::size_t k = 0; k < g.value.size(); ++k) {
    if (g.feasible[k]) EXPECT_GE(g.value[k], g.minimum.value);
  }
  for (const auto& lm : g.local_minima) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        const int i = lm.i + di, j = lm.j + dj;
        if ((di || dj) && i >= 0 && j >= 0 && i < 9 && j < 9) EXPECT_LT(lm.value, g.At(i, j));
      }
    }
  }
}

TEST(OptResult, JsonRoundTrip) {
  OptResult r;
  r.p_star = zdtest::NominalDesign();
  r.j_star = 0.123456789012345678;
  r.history = {3.0, 2.0, 0.1234};
  r.seed = 42;
  r.solver = "ga";
  r.evaluations = 1234;
  const OptResult s = OptResultFromJson(OptResultToJson(r));
  EXPECT_EQ(s.p_star.AsVector(), r.p_star.AsVector());
  EXPECT_EQ(s.j_star, r.j_star);
  EXPECT_EQ(s.history, r.history);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.solver, "ga");
  EXPECT_EQ(OptResultToJson(s), OptResultToJson(r));
}
