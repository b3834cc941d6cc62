#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "zdshape/stabilizer.hpp"
#include "zdshape/zero_dynamics.hpp"

using namespace zdshape;

namespace {

constexpr double kPi = std::numbers::pi;

FunctionZd Harmonic(double omega2, double x0) {
  return FunctionZd([](double) { return 0.0; },
                    [omega2, x0](double x) { return omega2 * (x - x0); }, -10.0, 10.0);
}

MechanismZd Nominal() { return MechanismZd(zdtest::DefaultScenario().table, zdtest::NominalDesign()); }

}  // namespace

TEST(ZeroDynamics, HarmonicPeriodAndClosure) {
  const FunctionZd zd = Harmonic(4.0, 0.5);
  const Orbit o = BuildOrbit(zd, 1.5, 0.5, 1e-4, 20.0);
  EXPECT_NEAR(o.period, kPi, 1e-9);
  EXPECT_LT(o.closure_error, 1e-9);
  EXPECT_NEAR(o.delta1, 2.0, 1e-8);
  EXPECT_NEAR(o.delta2, 4.0, 1e-6);
}

TEST(ZeroDynamics, HarmonicTrajectoryMatchesCosine) {
  const FunctionZd zd = Harmonic(9.0, 0.0);
  const Trajectory tr = SimulateZd(zd, 0.2, 2.0, 1e-3);
  for (std::size_t k = 0; k < tr.size(); k += 97) {
    EXPECT_NEAR(tr.x[k], 0.2 * std::cos(3.0 * tr.s[k]), 1e-10);
    EXPECT_NEAR(tr.xdot[k], -0.6 * std::sin(3.0 * tr.s[k]), 1e-10);
  }
}

TEST(ZeroDynamics, DetectPeriodNeedsTwoTurningPoints) {
  const FunctionZd zd = Harmonic(1.0, 0.0);
  const Trajectory short_run = SimulateZd(zd, 1.0, 3.0, 1e-3);
  EXPECT_THROW(DetectPeriod(short_run, 0.0), ZdError);
  const Trajectory long_run = SimulateZd(zd, 1.0, 7.0, 1e-3);
  EXPECT_NEAR(DetectPeriod(long_run, 0.0), 2 * kPi, 1e-6);
}

TEST(ZeroDynamics, OmegaOfHarmonicSystem) {
  const FunctionZd zd = Harmonic(2.5, 0.3);
  const EquilibriumResult eq = FindEquilibrium(zd, -1.0, 1.0, 0.0);
  EXPECT_NEAR(eq.x0, 0.3, 1e-12);
  EXPECT_NEAR(Omega(zd, eq.x0, 0.01), 2.5, 1e-8);
}

TEST(ZeroDynamics, EquilibriumAtReferenceCentre) {
  const auto& sc = zdtest::DefaultScenario();
  const MechanismZd zd = Nominal();
  const EquilibriumResult eq = FindEquilibrium(zd, zd.XMin(), zd.XMax(), sc.reference.x_c);
  EXPECT_NEAR(eq.x0, sc.reference.x_c, 1e-9);
}

TEST(ZeroDynamics, OmegaLinearInStiffness) {
  const auto& sc = zdtest::DefaultScenario();
  const double x0 = sc.reference.x_c;
  auto omega = [&](double kb, double kt) {
    return Omega(MechanismZd(sc.table, {kb, kt, 0.02, 0.02}), x0, 1e-3);
  };
  const double ob = omega(1.0, 0.0), ot = omega(0.0, 1.0);
  EXPECT_GT(ob, 0.0);
  EXPECT_GT(ot, 0.0);
  EXPECT_NEAR(omega(0.3, 0.7), 0.3 * ob + 0.7 * ot, 1e-8 * ob);
  EXPECT_NEAR(omega(0.0, 0.0), 0.0, 1e-12);
}

TEST(ZeroDynamics, QuadraticVelocityStructure) {
  const auto& sc = zdtest::DefaultScenario();
  for (int k = 0; k <= 20; ++k) {
    const double x = sc.x_min + (sc.x_max - sc.x_min) * k / 20.0;
    EXPECT_LT(ZdCoefficients(zdtest::NominalDesign(), sc.mechanism, sc.reference.y_bar, x)
                  .structure_residual,
              1e-8);
  }
}

TEST(ZeroDynamics, CoefficientsReproduceConstrainedAcceleration) {
  // Oracle: with y'' forced to zero through the linearizing input, the
  // x-acceleration of the full model at y = y_bar, y' = 0 must equal -b x'^2 - c.
  const auto& sc = zdtest::DefaultScenario();
  const DesignParams p = zdtest::NominalDesign();
  const DynamicParams dp = DynamicParams::FromDesign(sc.mechanism, p);
  const MechanismZd zd = Nominal();
  for (double x : {-0.01, 0.0265, 0.06}) {
    for (double xd : {-0.2, 0.05, 0.3}) {
      const Eigen::Vector2d chi(x, sc.reference.y_bar), chid(xd, 0.0);
      const double u = IoLinearize(p, sc.mechanism, chi, chid, 0.0);
      const Eigen::Vector2d acc = TaskAcceleration(dp, sc.mechanism, chi, chid, u);
      EXPECT_NEAR(acc[1], 0.0, 1e-10);
      EXPECT_NEAR(acc[0], -zd.B(x) * xd * xd - zd.C(x), 1e-8);
      EXPECT_NEAR(zd.Feedforward(x, xd), u, 1e-8);
    }
  }
}

TEST(ZeroDynamics, TableAgreesWithDirectEvaluation) {
  const auto& sc = zdtest::DefaultScenario();
  const DesignParams p{0.2, 0.05, 0.015, 0.025};
  const MechanismZd tab(sc.table, p);
  const DirectZd dir(sc.mechanism, p, sc.reference.y_bar, sc.x_min, sc.x_max);
  for (int k = 0; k <= 40; ++k) {
    const double x = sc.x_min + (sc.x_max - sc.x_min) * k / 40.0;
    EXPECT_NEAR(tab.B(x), dir.B(x), 1e-8);
    EXPECT_NEAR(tab.C(x), dir.C(x), 1e-8);
  }
}

TEST(ZeroDynamics, IntegralOfMotionConservedOverPeriod) {
  const auto& sc = zdtest::DefaultScenario();
  const MechanismZd zd = Nominal();
  const Orbit o = BuildOrbit(zd, sc.reference.Rx(0.0), sc.reference.x_c, 1e-4, 20.0);
  double scale = 0.0, worst = 0.0;
  for (double v : o.xdot) scale = std::max(scale, v * v);
  for (std::size_t k = 0; k < o.size(); k += 250) {
    worst = std::max(worst, std::abs(IntegralOfMotion(zd, o.x[k], o.xdot[k], o.anchor_x, 0.0)));
  }
  EXPECT_LT(worst / scale, 1e-4);
}

TEST(ZeroDynamics, IntegralOfMotionOfHarmonicSystem) {
  // For b = 0 the integral reduces to x'^2 + w^2 (x - x0)^2 - w^2 (x_a - x0)^2.
  const FunctionZd zd = Harmonic(4.0, 0.0);
  const double anchor = 0.5;
  for (double x : {-0.4, 0.1, 0.3}) {
    for (double v : {0.0, 0.5, -1.0}) {
      EXPECT_NEAR(IntegralOfMotion(zd, x, v, anchor, 0.0), v * v + 4.0 * x * x - 4.0 * anchor * anchor,
                  1e-10);
    }
  }
}

TEST(ZeroDynamics, SmallAmplitudePeriod) {
  const auto& sc = zdtest::DefaultScenario();
  const MechanismZd zd = Nominal();
  const double x0 = sc.reference.x_c;
  const double om = Omega(zd, x0, 1e-3);
  const Orbit o = BuildOrbit(zd, x0 + 1e-4, x0, 1e-4, 20.0);
  EXPECT_NEAR(o.period, 2 * kPi / std::sqrt(om), 0.01 * 2 * kPi / std::sqrt(om));
}

TEST(ZeroDynamics, EscapeIsReported) {
  const FunctionZd zd([](double) { return 0.0; }, [](double) { return -1.0; }, -1.0, 1.0);
  const Trajectory tr = SimulateZd(zd, 0.0, 10.0, 1e-3);
  EXPECT_TRUE(tr.escaped);
  EXPECT_LT(tr.s.back(), 10.0);
}
