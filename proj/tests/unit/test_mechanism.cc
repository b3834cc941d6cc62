#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "zdshape/mechanism.hpp"

using namespace zdshape;

TEST(LinkTable, DefaultMatchesPrototypeData) {
  const LinkTable t = LinkTable::Default();
  const std::array<double, 4> l{0.080, 0.235, 0.052, 0.135};
  const std::array<double, 4> mass{0.071, 0.195, 0.049, 0.115};
  const std::array<double, 4> inertia{0.188e-3, 1.041e-3, 0.035e-3, 0.767e-3};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(t.length[i], l[i]);
    EXPECT_EQ(t.mass[i], mass[i]);
    EXPECT_EQ(t.inertia[i], inertia[i]);
  }
}

TEST(LinkInertia, ReferenceDepthIsIdentity) {
  const LinkTable t = LinkTable::Default();
  for (int id : {3, 4}) {
    const BodyInertia b = LinkInertiaFromDepth(t, 0.02, id);
    EXPECT_EQ(b.mass, t.mass[id - 1]);
    EXPECT_EQ(b.inertia, t.inertia[id - 1]);
  }
}

TEST(LinkInertia, ReducedDepthMasses) {
  const LinkTable t = LinkTable::Default();
  EXPECT_NEAR(LinkInertiaFromDepth(t, 0.016, 3).mass, 0.039, 5e-4);
  EXPECT_NEAR(LinkInertiaFromDepth(t, 0.0183, 4).mass, 0.105, 5e-4);
}

TEST(LinkInertia, LinearInDepth) {
  const LinkTable t = LinkTable::Default();
  for (int id : {3, 4}) {
    const BodyInertia a = LinkInertiaFromDepth(t, 0.012, id);
    const BodyInertia b = LinkInertiaFromDepth(t, 0.024, id);
    EXPECT_NEAR(b.mass, 2.0 * a.mass, 1e-15);
    EXPECT_NEAR(b.inertia, 2.0 * a.inertia, 1e-18);
  }
}

TEST(LinkInertia, RejectsBadInput) {
  const LinkTable t = LinkTable::Default();
  EXPECT_THROW(LinkInertiaFromDepth(t, 0.005, 3), ZdError);
  EXPECT_THROW(LinkInertiaFromDepth(t, 0.02, 1), ZdError);
}

TEST(Kinematics, ConfigurationSatisfiesTargetAndLoop) {
  const auto& sc = zdtest::DefaultScenario();
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector2d chi = zdtest::RandomTaskPoint(rng);
    const Eigen::Vector4d q = Configuration(sc.mechanism, chi);
    EXPECT_LT((ForwardKinematics(sc.mechanism, q) - chi).norm(), 1e-10);
    EXPECT_LT(LoopConstraint(sc.mechanism, q).norm(), 1e-10);
  }
}

TEST(Kinematics, NewtonAgreesWithAnalyticBranch) {
  const auto& sc = zdtest::DefaultScenario();
  const Eigen::Vector2d chi(sc.reference.x_c, sc.reference.y_bar);
  const auto qa = AnalyticConfiguration(sc.mechanism, chi);
  ASSERT_TRUE(qa.has_value());
  const Eigen::Vector4d perturbed = *qa + Eigen::Vector4d::Constant(0.02);
  const Eigen::Vector4d qn = SolveConfiguration(sc.mechanism, chi, perturbed);
  EXPECT_LT((qn - *qa).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Kinematics, OutOfReachHasNoConfiguration) {
  const auto& sc = zdtest::DefaultScenario();
  EXPECT_FALSE(AnalyticConfiguration(sc.mechanism, Eigen::Vector2d(2.0, 2.0)).has_value());
}

TEST(Kinematics, JacobiansMatchCentralDifferences) {
  const auto& sc = zdtest::DefaultScenario();
  const MechanismInstance& m = sc.mechanism;
  const Eigen::Vector4d q = Configuration(m, Eigen::Vector2d(0.01, sc.reference.y_bar));
  const double h = 1e-6;
  Eigen::Matrix<double, 2, 4> dh, dphi;
  for (int j = 0; j < 4; ++j) {
    Eigen::Vector4d e = Eigen::Vector4d::Zero();
    e[j] = h;
    dh.col(j) = (ForwardKinematics(m, Eigen::Vector4d(q + e)) -
                 ForwardKinematics(m, Eigen::Vector4d(q - e))) / (2 * h);
    dphi.col(j) = (LoopConstraint(m, Eigen::Vector4d(q + e)) -
                   LoopConstraint(m, Eigen::Vector4d(q - e))) / (2 * h);
  }
  EXPECT_LT((OutputJacobian(m, q) - dh).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((ConstraintJacobian(m, q) - dphi).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Kinematics, TaskToJointMapsTaskRatesOntoManifold) {
  const auto& sc = zdtest::DefaultScenario();
  const MechanismInstance& m = sc.mechanism;
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d chi = zdtest::RandomTaskPoint(rng);
    const Eigen::Vector4d q = Configuration(m, chi);
    const Eigen::Matrix<double, 4, 2> j = TaskToJoint(m, q);
    EXPECT_LT((OutputJacobian(m, q) * j - Eigen::Matrix2d::Identity()).norm(), 1e-10);
    EXPECT_LT((ConstraintJacobian(m, q) * j).norm(), 1e-10);
    // Finite-difference oracle: q_r(chi + h e_i) - q_r(chi - h e_i).
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e[i] = h;
      const Eigen::Vector4d fd = (Configuration(m, chi + e) - Configuration(m, chi - e)) / (2 * h);
      EXPECT_LT((fd - j.col(i)).cwiseAbs().maxCoeff(), 1e-7 * std::max(1.0, j.col(i).cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Kinematics, PartitionJacobianMatchesDefinition) {
  const auto& sc = zdtest::DefaultScenario();
  const MechanismInstance& m = sc.mechanism;
  const Eigen::Vector4d q = Configuration(m, Eigen::Vector2d(0.03, sc.reference.y_bar));
  const KinematicJacobians kj = ComputeKinematicJacobians(m, q);
  // J equals the selector-independent projection.
  EXPECT_LT((kj.j - TaskToJoint(m, q)).cwiseAbs().maxCoeff(), 1e-10);
  // The psi rows of J solve J_chi + J_psi dpsi/dchi = 0.
  const Eigen::Matrix2d dpsi = -kj.j_psi.inverse() * kj.j_chi;
  for (int r = 0; r < 2; ++r) {
    EXPECT_NEAR(dpsi(r, 0), kj.j(m.psi_selector[r], 0), 1e-10 * dpsi.norm());
    EXPECT_NEAR(dpsi(r, 1), kj.j(m.psi_selector[r], 1), 1e-10 * dpsi.norm());
  }
}

TEST(Kinematics, SigmaReturnsSelectedCoordinates) {
  const auto& sc = zdtest::DefaultScenario();
  const Eigen::Vector2d chi(0.0, sc.reference.y_bar);
  const Eigen::Vector4d q = Configuration(sc.mechanism, chi);
  const Eigen::Vector2d psi = Sigma(sc.mechanism, chi);
  EXPECT_EQ(psi[0], q[sc.mechanism.psi_selector[0]]);
  EXPECT_EQ(psi[1], q[sc.mechanism.psi_selector[1]]);
}

TEST(Kinematics, SelectorScanRanksDefaultFirst) {
  const auto& sc = zdtest::DefaultScenario();
  ASSERT_EQ(sc.selectors.size(), 6u);
  EXPECT_EQ(sc.selectors.front().selector, sc.mechanism.psi_selector);
  EXPECT_GT(sc.selectors.front().min_abs_det, 1e-3);
  for (std::size_t i = 1; i < sc.selectors.size(); ++i) {
    EXPECT_LE(sc.selectors[i].min_abs_det, sc.selectors[i - 1].min_abs_det);
  }
}

TEST(Kinematics, SingularSelectorIsRejected) {
  const auto& sc = zdtest::DefaultScenario();
  const Eigen::Vector4d q = Configuration(sc.mechanism, Eigen::Vector2d(0.02, sc.reference.y_bar));
  // With the end effector on the first dyad, (q1, q2) cannot be recovered from psi.
  EXPECT_THROW(ComputeKinematicJacobians(sc.mechanism, q, {0, 1}), ZdError);
  EXPECT_EQ(PartitionConditioning(sc.mechanism, q, {0, 1}), 0.0);
}

TEST(Kinematics, AngleMapIsCumulativeForFirstThreeLinks) {
  const Eigen::Matrix4d t = MechanismInstance::DefaultAngleMap();
  const Eigen::Vector4d q(0.1, 0.2, 0.3, 0.4);
  const Eigen::Vector4d th = t * q;
  EXPECT_DOUBLE_EQ(th[0], 0.1);
  EXPECT_DOUBLE_EQ(th[1], 0.1 + 0.2);
  EXPECT_DOUBLE_EQ(th[2], 0.1 + 0.2 + 0.3);
  EXPECT_DOUBLE_EQ(th[3], 0.4);
}
