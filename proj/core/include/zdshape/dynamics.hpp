#pragma once

#include <array>

#include <Eigen/Dense>

#include "zdshape/dual.hpp"
#include "zdshape/mechanism.hpp"

namespace zdshape {

/// Inertia and stiffness seen by the equations of motion.
struct DynamicParams {
  InertiaSet inertia;
  double k_b = 0.0;
  double k_t = 0.0;

  static DynamicParams FromDesign(const MechanismInstance& m,
                                  const DesignParams& p) {
    return {InertiaSet::FromDesign(m.links, p), p.k_b, p.k_t};
  }
};

template <typename T>
Mat4<T> MassMatrix(const MechanismInstance& m, const InertiaSet& in,
                   const Vec4<T>& q) {
  const auto jc = ComJacobians(m, q);
  Mat4<T> out = Mat4<T>::Constant(T(0.0));
  for (int i = 0; i < 4; ++i) {
    if (in.mass[i] != 0.0) {
      out += (jc[i].transpose() * jc[i]) * T(in.mass[i]);
    }
    if (in.inertia[i] != 0.0) {
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
          const double w = m.angle_map(i, r) * m.angle_map(i, c);
          if (w != 0.0) out(r, c) += T(in.inertia[i] * w);
        }
      }
    }
  }
  return out;
}

/// dM/dq_k for k = 0..3.
template <typename T>
std::array<Mat4<T>, 4> MassMatrixPartials(const MechanismInstance& m,
                                          const InertiaSet& in,
                                          const Vec4<T>& q) {
  using D = Dual<T>;
  std::array<Mat4<T>, 4> out;
  for (int k = 0; k < 4; ++k) {
    Vec4<D> qd;
    for (int i = 0; i < 4; ++i) qd[i] = D(q[i], T(i == k ? 1.0 : 0.0));
    const Mat4<D> md = MassMatrix(m, in, qd);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) out[k](r, c) = md(r, c).deriv();
    }
  }
  return out;
}

/// Coriolis matrix from the Christoffel symbols of M.
template <typename T>
Mat4<T> CoriolisMatrix(const MechanismInstance& m, const InertiaSet& in,
                       const Vec4<T>& q, const Vec4<T>& qdot) {
  const auto dm = MassMatrixPartials(m, in, q);
  Mat4<T> c = Mat4<T>::Constant(T(0.0));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      T acc(0.0);
      for (int k = 0; k < 4; ++k) {
        acc += (dm[k](i, j) + dm[j](i, k) - dm[i](j, k)) * qdot[k];
      }
      c(i, j) = T(0.5) * acc;
    }
  }
  return c;
}

template <typename T>
Vec4<T> SpringForces(const MechanismInstance& m, double k_b, double k_t,
                     const Vec4<T>& q) {
  Vec4<T> g = Vec4<T>::Constant(T(0.0));
  g[2] = (q[2] - T(m.q3_rest)) * T(k_t);
  g[3] = (q[3] - T(m.q4_rest)) * T(k_b);
  return g;
}

template <typename T>
T SpringPotential(const MechanismInstance& m, double k_b, double k_t,
                  const Vec4<T>& q) {
  const T d3 = q[2] - T(m.q3_rest);
  const T d4 = q[3] - T(m.q4_rest);
  return T(0.5 * k_b) * d4 * d4 + T(0.5 * k_t) * d3 * d3;
}

/// Two-DOF model M_chi chi'' + C_chi chi' + G_chi = B_chi u on the manifold.
template <typename T>
struct MinimalFormT {
  Mat2<T> m_chi;
  Mat2<T> c_chi;
  Vec2<T> g_chi;
  Vec2<T> b_chi;
  Vec4<T> q;
  Vec4<T> qdot;
  Mat42<T> j;
  Mat42<T> j_dot;
};

template <typename T>
MinimalFormT<T> ComputeMinimalForm(const MechanismInstance& m,
                                   const DynamicParams& dp, const Vec2<T>& chi,
                                   const Vec2<T>& chidot) {
  using D = Dual<T>;
  MinimalFormT<T> out;
  out.q = ConfigurationT(m, chi);
  const Eigen::PartialPivLU<Mat4<T>> k_lu(StackedJacobian(m, out.q));
  Mat42<T> e = Mat42<T>::Constant(T(0.0));
  e(0, 0) = T(1.0);
  e(1, 1) = T(1.0);
  out.j = k_lu.solve(e);
  out.qdot = out.j * chidot;

  // K along the flow; its tangent is dK/dt.
  Vec4<D> q_flow;
  for (int i = 0; i < 4; ++i) q_flow[i] = D(out.q[i], out.qdot[i]);
  const Mat4<D> k_flow = StackedJacobian(m, q_flow);
  Mat4<T> k_dot;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) k_dot(r, c) = k_flow(r, c).deriv();
  }
  out.j_dot = -k_lu.solve(k_dot * out.j);

  const Mat4<T> mass = MassMatrix(m, dp.inertia, out.q);
  const Mat4<T> cor = CoriolisMatrix(m, dp.inertia, out.q, out.qdot);
  const Vec4<T> g = SpringForces(m, dp.k_b, dp.k_t, out.q);
  const Eigen::Matrix<T, 2, 4> jt = out.j.transpose();
  out.m_chi = jt * mass * out.j;
  out.m_chi = (out.m_chi + out.m_chi.transpose().eval()) * T(0.5);
  out.c_chi = jt * (mass * out.j_dot + cor * out.j);
  out.g_chi = jt * g;
  out.b_chi = jt.col(0);
  return out;
}

template <typename T>
struct PflTermsT {
  T f_x, f_y, g_x, g_y, tau0, tau_v;
};

template <typename T>
PflTermsT<T> ComputePflTerms(const MinimalFormT<T>& mf, const Vec2<T>& chidot,
                             double input_tol) {
  const Eigen::PartialPivLU<Mat2<T>> lu(mf.m_chi);
  const Vec2<T> f = -lu.solve(mf.c_chi * chidot + mf.g_chi);
  const Vec2<T> g = lu.solve(mf.b_chi);
  if (!(std::abs(ValueOf(g[1])) > input_tol)) {
    throw ZdError(ErrorCode::kInputSingularity, "g_y vanishes");
  }
  PflTermsT<T> out;
  out.f_x = f[0];
  out.f_y = f[1];
  out.g_x = g[0];
  out.g_y = g[1];
  out.tau0 = -f[1] / g[1];
  out.tau_v = T(1.0) / g[1];
  return out;
}

// Double-precision entry points.

Eigen::Matrix4d MassMatrix(const DesignParams& p, const MechanismInstance& m,
                           const Eigen::Vector4d& q);
Eigen::Matrix4d CoriolisMatrix(const DesignParams& p,
                               const MechanismInstance& m,
                               const Eigen::Vector4d& q,
                               const Eigen::Vector4d& qdot);
Eigen::Vector4d SpringForces(const DesignParams& p, const MechanismInstance& m,
                             const Eigen::Vector4d& q);
double SpringPotential(const DesignParams& p, const MechanismInstance& m,
                       const Eigen::Vector4d& q);

using MinimalForm = MinimalFormT<double>;
using PflTerms = PflTermsT<double>;

MinimalForm ComputeMinimalForm(const DesignParams& p,
                               const MechanismInstance& m,
                               const Eigen::Vector2d& chi,
                               const Eigen::Vector2d& chidot);
PflTerms ComputePflTerms(const DesignParams& p, const MechanismInstance& m,
                         const Eigen::Vector2d& chi,
                         const Eigen::Vector2d& chidot);

/// u = tau0 + tau_v v, which renders y'' = v.
double IoLinearize(const DesignParams& p, const MechanismInstance& m,
                   const Eigen::Vector2d& chi, const Eigen::Vector2d& chidot,
                   double v);

/// chi'' of the minimal form under input u.
Eigen::Vector2d TaskAcceleration(const DynamicParams& dp,
                                 const MechanismInstance& m,
                                 const Eigen::Vector2d& chi,
                                 const Eigen::Vector2d& chidot, double u);

/// Kinetic plus spring energy at a task state.
double TotalEnergy(const DynamicParams& dp, const MechanismInstance& m,
                   const Eigen::Vector2d& chi, const Eigen::Vector2d& chidot);

struct DaeSolution {
  Eigen::Vector4d qddot;
  Eigen::Vector2d lambda;
};

/// Index-reduced DAE: M q'' + C q' + G = b u + Phi^T lambda together with
/// Phi q'' + Phi' q' = 0, solved jointly for (q'', lambda).
DaeSolution DaeAcceleration(const DynamicParams& dp, const MechanismInstance& m,
                            const Eigen::Vector4d& q,
                            const Eigen::Vector4d& qdot, double u);

}  // namespace zdshape
