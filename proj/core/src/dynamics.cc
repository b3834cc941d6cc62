#include "zdshape/dynamics.hpp"

#include <cstdio>

namespace zdshape {

Eigen::Matrix4d MassMatrix(const DesignParams& p, const MechanismInstance& m,
                           const Eigen::Vector4d& q) {
  return MassMatrix<double>(m, InertiaSet::FromDesign(m.links, p), q);
}

Eigen::Matrix4d CoriolisMatrix(const DesignParams& p,
                               const MechanismInstance& m,
                               const Eigen::Vector4d& q,
                               const Eigen::Vector4d& qdot) {
  return CoriolisMatrix<double>(m, InertiaSet::FromDesign(m.links, p), q, qdot);
}

Eigen::Vector4d SpringForces(const DesignParams& p, const MechanismInstance& m,
                             const Eigen::Vector4d& q) {
  return SpringForces<double>(m, p.k_b, p.k_t, q);
}

double SpringPotential(const DesignParams& p, const MechanismInstance& m,
                       const Eigen::Vector4d& q) {
  return SpringPotential<double>(m, p.k_b, p.k_t, q);
}

MinimalForm ComputeMinimalForm(const DesignParams& p,
                               const MechanismInstance& m,
                               const Eigen::Vector2d& chi,
                               const Eigen::Vector2d& chidot) {
  return ComputeMinimalForm<double>(m, DynamicParams::FromDesign(m, p), chi,
                                    chidot);
}

PflTerms ComputePflTerms(const DesignParams& p, const MechanismInstance& m,
                         const Eigen::Vector2d& chi,
                         const Eigen::Vector2d& chidot) {
  const MinimalForm mf = ComputeMinimalForm(p, m, chi, chidot);
  const double cond = mf.m_chi.norm() * mf.m_chi.inverse().norm();
  if (cond > m.tol.condition_warning) {
    std::fprintf(stderr, "warning: M_chi condition number %.3g\n", cond);
  }
  return ComputePflTerms<double>(mf, chidot, m.tol.input_singularity);
}

double IoLinearize(const DesignParams& p, const MechanismInstance& m,
                   const Eigen::Vector2d& chi, const Eigen::Vector2d& chidot,
                   double v) {
  const PflTerms t = ComputePflTerms(p, m, chi, chidot);
  return t.tau0 + t.tau_v * v;
}

Eigen::Vector2d TaskAcceleration(const DynamicParams& dp,
                                 const MechanismInstance& m,
                                 const Eigen::Vector2d& chi,
                                 const Eigen::Vector2d& chidot, double u) {
  const MinimalForm mf = ComputeMinimalForm<double>(m, dp, chi, chidot);
  return mf.m_chi.llt().solve(mf.b_chi * u - mf.c_chi * chidot - mf.g_chi);
}

double TotalEnergy(const DynamicParams& dp, const MechanismInstance& m,
                   const Eigen::Vector2d& chi, const Eigen::Vector2d& chidot) {
  const Eigen::Vector4d q = Configuration(m, chi);
  const Eigen::Matrix<double, 4, 2> j = TaskToJoint(m, q);
  const Eigen::Matrix2d m_chi = j.transpose() * MassMatrix<double>(m, dp.inertia, q) * j;
  return 0.5 * chidot.dot(m_chi * chidot) +
         SpringPotential<double>(m, dp.k_b, dp.k_t, q);
}

DaeSolution DaeAcceleration(const DynamicParams& dp, const MechanismInstance& m,
                            const Eigen::Vector4d& q,
                            const Eigen::Vector4d& qdot, double u) {
  using D = Dual<double>;
  const Eigen::Matrix4d mass = MassMatrix<double>(m, dp.inertia, q);
  const Eigen::Matrix4d cor = CoriolisMatrix<double>(m, dp.inertia, q, qdot);
  const Eigen::Vector4d g = SpringForces<double>(m, dp.k_b, dp.k_t, q);
  const Eigen::Matrix<double, 2, 4> phi_q = ConstraintJacobian(m, q);
  Vec4<D> q_flow;
  for (int i = 0; i < 4; ++i) q_flow[i] = D(q[i], qdot[i]);
  const Mat24<D> phi_flow = ConstraintJacobian(m, q_flow);
  Eigen::Matrix<double, 2, 4> phi_dot;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) phi_dot(r, c) = phi_flow(r, c).deriv();
  }
  Eigen::Matrix<double, 6, 6> kkt = Eigen::Matrix<double, 6, 6>::Zero();
  kkt.topLeftCorner<4, 4>() = mass;
  kkt.topRightCorner<4, 2>() = -phi_q.transpose();
  kkt.bottomLeftCorner<2, 4>() = phi_q;
  Eigen::Matrix<double, 6, 1> rhs;
  Eigen::Vector4d b = Eigen::Vector4d::Zero();
  b[0] = 1.0;
  rhs.head<4>() = b * u - cor * qdot - g;
  rhs.tail<2>() = -phi_dot * qdot;
  const Eigen::Matrix<double, 6, 1> sol = kkt.fullPivLu().solve(rhs);
  return {sol.head<4>(), sol.tail<2>()};
}

}  // namespace zdshape
