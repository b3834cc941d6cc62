#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zdshape/dual.hpp"
#include "zdshape/errors.hpp"

namespace zdshape {

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat2 = Eigen::Matrix<T, 2, 2>;
template <typename T>
using Mat4 = Eigen::Matrix<T, 4, 4>;
template <typename T>
using Mat24 = Eigen::Matrix<T, 2, 4>;
template <typename T>
using Mat42 = Eigen::Matrix<T, 4, 2>;

/// Decision vector p = (k_b, k_t, delta_b, delta_t).
struct DesignParams {
  double k_b = 0.0;
  double k_t = 0.0;
  double delta_b = 0.02;
  double delta_t = 0.02;

  Eigen::Vector4d AsVector() const { return {k_b, k_t, delta_b, delta_t}; }
  static DesignParams FromVector(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], v[3]};
  }
};

struct LinkTable {
  std::array<double, 4> length{};
  std::array<double, 4> mass{};
  std::array<double, 4> inertia{};
  double density = 1000.0;
  double reference_depth = 0.02;
  std::array<bool, 4> depth_scalable{false, false, true, true};

  /// Link data of the prototype mechanism at the reference depth.
  static LinkTable Default();
  void Validate() const;
};

struct BodyInertia {
  double mass = 0.0;
  double inertia = 0.0;
};

/// Mass and central inertia of link 3 or 4 for a given depth. Both scale
/// linearly with depth at constant section and density.
BodyInertia LinkInertiaFromDepth(const LinkTable& links, double delta,
                                 int link_id);

/// Per-body mass and central moment of inertia actually used in M(q).
struct InertiaSet {
  std::array<double, 4> mass{};
  std::array<double, 4> inertia{};

  static InertiaSet FromDesign(const LinkTable& links, const DesignParams& p);
  InertiaSet Scaled(double s) const;
  /// Only body `i` present, at the table's reference values.
  static InertiaSet SingleBody(const LinkTable& links, int i);
};

struct Tolerances {
  double constraint = 1e-10;
  int newton_max_iter = 50;
  double singular_partition = 1e-9;
  double input_singularity = 1e-9;
  double condition_warning = 1e10;
};

/// Closed five-bar chain P1 - l1 - l2 - l3 - l4 - P2. The end effector sits
/// at the joint between links 2 and 3. Link 4 is grounded at P2 through the
/// spring k_b; k_t acts on the relative angle between links 2 and 3.
struct MechanismInstance {
  LinkTable links = LinkTable::Default();
  Eigen::Vector2d p1{-0.19, 0.15};
  Eigen::Vector2d p2{0.0, 0.0};
  // theta = angle_map * q + angle_offset
  Eigen::Matrix4d angle_map = DefaultAngleMap();
  Eigen::Vector4d angle_offset = Eigen::Vector4d::Zero();
  double q3_rest = 0.0;
  double q4_rest = 0.0;
  std::array<int, 2> psi_selector{2, 3};
  int crank_elbow = -1;
  int rocker_elbow = 1;
  // Analytic solutions are unwrapped to lie within pi of this configuration.
  Eigen::Vector4d wrap_center = Eigen::Vector4d::Zero();
  Tolerances tol;

  static Eigen::Matrix4d DefaultAngleMap();
  void Validate() const;
};

struct JointState {
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Eigen::Vector4d qdot = Eigen::Vector4d::Zero();
};

struct TaskState {
  Eigen::Vector2d chi = Eigen::Vector2d::Zero();
  Eigen::Vector2d chidot = Eigen::Vector2d::Zero();
};

namespace internal {

template <typename T>
Vec2<T> Dir(const T& a) {
  using std::cos;
  using std::sin;
  return Vec2<T>(cos(a), sin(a));
}

template <typename T>
Vec2<T> DirPerp(const T& a) {
  using std::cos;
  using std::sin;
  return Vec2<T>(-sin(a), cos(a));
}

template <typename T>
Vec2<T> Lift(const Eigen::Vector2d& v) {
  return Vec2<T>(T(v[0]), T(v[1]));
}

}  // namespace internal

template <typename T>
Vec4<T> BodyAngles(const MechanismInstance& m, const Vec4<T>& q) {
  Vec4<T> theta;
  for (int i = 0; i < 4; ++i) {
    theta[i] = T(m.angle_offset[i]);
    for (int j = 0; j < 4; ++j) {
      if (m.angle_map(i, j) != 0.0) theta[i] += m.angle_map(i, j) * q[j];
    }
  }
  return theta;
}

/// chi = h(q), the end-effector position.
template <typename T>
Vec2<T> ForwardKinematics(const MechanismInstance& m, const Vec4<T>& q) {
  using internal::Dir;
  const Vec4<T> th = BodyAngles(m, q);
  const auto& l = m.links.length;
  return internal::Lift<T>(m.p1) + Dir(th[0]) * T(l[0]) + Dir(th[1]) * T(l[1]);
}

/// phi(q): position mismatch at the link3/link4 joint.
template <typename T>
Vec2<T> LoopConstraint(const MechanismInstance& m, const Vec4<T>& q) {
  using internal::Dir;
  const Vec4<T> th = BodyAngles(m, q);
  const auto& l = m.links.length;
  return internal::Lift<T>(m.p1) + Dir(th[0]) * T(l[0]) +
         Dir(th[1]) * T(l[1]) + Dir(th[2]) * T(l[2]) -
         internal::Lift<T>(m.p2) - Dir(th[3]) * T(l[3]);
}

namespace internal {

// Converts a Jacobian with respect to body angles into one with respect to q.
template <typename T>
Mat24<T> ToJointSpace(const MechanismInstance& m, const Mat24<T>& d_theta) {
  Mat24<T> out;
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < 4; ++j) {
      T acc(0.0);
      for (int i = 0; i < 4; ++i) {
        if (m.angle_map(i, j) != 0.0) acc += d_theta(r, i) * m.angle_map(i, j);
      }
      out(r, j) = acc;
    }
  }
  return out;
}

}  // namespace internal

template <typename T>
Mat24<T> OutputJacobian(const MechanismInstance& m, const Vec4<T>& q) {
  using internal::DirPerp;
  const Vec4<T> th = BodyAngles(m, q);
  const auto& l = m.links.length;
  Mat24<T> d = Mat24<T>::Constant(T(0.0));
  d.col(0) = DirPerp(th[0]) * T(l[0]);
  d.col(1) = DirPerp(th[1]) * T(l[1]);
  return internal::ToJointSpace(m, d);
}

template <typename T>
Mat24<T> ConstraintJacobian(const MechanismInstance& m, const Vec4<T>& q) {
  using internal::DirPerp;
  const Vec4<T> th = BodyAngles(m, q);
  const auto& l = m.links.length;
  Mat24<T> d;
  d.col(0) = DirPerp(th[0]) * T(l[0]);
  d.col(1) = DirPerp(th[1]) * T(l[1]);
  d.col(2) = DirPerp(th[2]) * T(l[2]);
  d.col(3) = -DirPerp(th[3]) * T(l[3]);
  return internal::ToJointSpace(m, d);
}

/// K = [dh/dq; dphi/dq]. Nonsingular exactly where the task coordinates
/// parametrize the constraint manifold locally.
template <typename T>
Mat4<T> StackedJacobian(const MechanismInstance& m, const Vec4<T>& q) {
  Mat4<T> k;
  k.template topRows<2>() = OutputJacobian(m, q);
  k.template bottomRows<2>() = ConstraintJacobian(m, q);
  return k;
}

/// Centers of mass, one per link, at the link midpoints.
template <typename T>
std::array<Vec2<T>, 4> ComPositions(const MechanismInstance& m,
                                    const Vec4<T>& q) {
  using internal::Dir;
  const Vec4<T> th = BodyAngles(m, q);
  const auto& l = m.links.length;
  const Vec2<T> a = internal::Lift<T>(m.p1) + Dir(th[0]) * T(l[0]);
  const Vec2<T> e = a + Dir(th[1]) * T(l[1]);
  return {internal::Lift<T>(m.p1) + Dir(th[0]) * T(0.5 * l[0]),
          a + Dir(th[1]) * T(0.5 * l[1]), e + Dir(th[2]) * T(0.5 * l[2]),
          internal::Lift<T>(m.p2) + Dir(th[3]) * T(0.5 * l[3])};
}

template <typename T>
std::array<Mat24<T>, 4> ComJacobians(const MechanismInstance& m,
                                     const Vec4<T>& q) {
  using internal::DirPerp;
  const Vec4<T> th = BodyAngles(m, q);
  const auto& l = m.links.length;
  const Vec2<T> u0 = DirPerp(th[0]), u1 = DirPerp(th[1]), u2 = DirPerp(th[2]),
                u3 = DirPerp(th[3]);
  std::array<Mat24<T>, 4> d;
  for (auto& x : d) x = Mat24<T>::Constant(T(0.0));
  d[0].col(0) = u0 * T(0.5 * l[0]);
  d[1].col(0) = u0 * T(l[0]);
  d[1].col(1) = u1 * T(0.5 * l[1]);
  d[2].col(0) = u0 * T(l[0]);
  d[2].col(1) = u1 * T(l[1]);
  d[2].col(2) = u2 * T(0.5 * l[2]);
  d[3].col(3) = u3 * T(0.5 * l[3]);
  for (auto& x : d) x = internal::ToJointSpace(m, x);
  return d;
}

/// Closed-form inverse kinematics on the instance's pinned assembly branch.
/// Returns nothing when chi is out of reach of either dyad.
std::optional<Eigen::Vector4d> AnalyticConfiguration(
    const MechanismInstance& m, const Eigen::Vector2d& chi);

/// Newton solve of h(q) = chi, phi(q) = 0 from q_guess.
Eigen::Vector4d SolveConfiguration(const MechanismInstance& m,
                                   const Eigen::Vector2d& chi_target,
                                   const Eigen::Vector4d& q_guess);

/// q_r(chi): analytic branch guess followed by Newton polish.
Eigen::Vector4d Configuration(const MechanismInstance& m,
                              const Eigen::Vector2d& chi);

/// q_r(chi) for a differentiable scalar type. The value is solved in double;
/// two Newton steps in T then carry derivatives up to third order.
template <typename T>
Vec4<T> ConfigurationT(const MechanismInstance& m, const Vec2<T>& chi) {
  if constexpr (std::is_same_v<T, double>) {
    return Configuration(m, chi);
  } else {
    const Eigen::Vector2d chi0(ValueOf(chi[0]), ValueOf(chi[1]));
    const Eigen::Vector4d q0 = Configuration(m, chi0);
    Vec4<T> q;
    for (int i = 0; i < 4; ++i) q[i] = T(q0[i]);
    for (int it = 0; it < 2; ++it) {
      Vec4<T> r;
      r.template head<2>() = ForwardKinematics(m, q) - chi;
      r.template tail<2>() = LoopConstraint(m, q);
      const Mat4<T> k = StackedJacobian(m, q);
      q -= k.partialPivLu().solve(r);
    }
    return q;
  }
}

/// Projection J = K^{-1} [I; 0]: maps task rates to joint rates on the
/// manifold. Independent of the psi selector.
template <typename T>
Mat42<T> TaskToJoint(const MechanismInstance& m, const Vec4<T>& q) {
  Mat42<T> e = Mat42<T>::Constant(T(0.0));
  e(0, 0) = T(1.0);
  e(1, 1) = T(1.0);
  return StackedJacobian(m, q).partialPivLu().solve(e);
}

struct KinematicJacobians {
  Eigen::Matrix<double, 2, 4> dh_dq;
  Eigen::Matrix<double, 2, 4> dphi_dq;
  Eigen::Matrix4d j_rho;  // [d rho / d chi, d rho / d psi]
  Eigen::Matrix2d j_chi;
  Eigen::Matrix2d j_psi;
  Eigen::Matrix<double, 4, 2> j;
};

/// Jacobians of the coordinate partition q = rho(chi, psi) for the given
/// selector. Throws SingularPartition when either rho or J_psi degenerates.
KinematicJacobians ComputeKinematicJacobians(const MechanismInstance& m,
                                             const Eigen::Vector4d& q,
                                             std::array<int, 2> selector);
inline KinematicJacobians ComputeKinematicJacobians(const MechanismInstance& m,
                                                    const Eigen::Vector4d& q) {
  return ComputeKinematicJacobians(m, q, m.psi_selector);
}

/// |det J_psi| for a selector, 0 where rho is undefined.
double PartitionConditioning(const MechanismInstance& m,
                             const Eigen::Vector4d& q,
                             std::array<int, 2> selector);

/// psi = sigma(chi).
Eigen::Vector2d Sigma(const MechanismInstance& m, const Eigen::Vector2d& chi);

struct SelectorReport {
  std::array<int, 2> selector{};
  double min_abs_det = 0.0;
};

/// Minimum |det J_psi| along the given task points for all six selectors,
/// sorted best first.
std::vector<SelectorReport> ScanSelectors(
    const MechanismInstance& m, const std::vector<Eigen::Vector2d>& chis);

}  // namespace zdshape
