#include "zdshape/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace zdshape {

LinkTable LinkTable::Default() {
  LinkTable t;
  t.length = {0.080, 0.235, 0.052, 0.135};
  t.mass = {0.071, 0.195, 0.049, 0.115};
  t.inertia = {0.188e-3, 1.041e-3, 0.035e-3, 0.767e-3};
  t.density = 1000.0;
  t.reference_depth = 0.02;
  return t;
}

void LinkTable::Validate() const {
  for (int i = 0; i < 4; ++i) {
    if (!(length[i] > 0.0) || !(mass[i] > 0.0) || !(inertia[i] > 0.0)) {
      throw ZdError(ErrorCode::kConfig,
                    "link " + std::to_string(i + 1) +
                        " needs positive length, mass and inertia");
    }
  }
  if (!(density > 0.0) || !(reference_depth > 0.0)) {
    throw ZdError(ErrorCode::kConfig, "density and reference depth must be positive");
  }
}

BodyInertia LinkInertiaFromDepth(const LinkTable& links, double delta,
                                 int link_id) {
  if (link_id != 3 && link_id != 4) {
    throw ZdError(ErrorCode::kDomain, "only links 3 and 4 have a depth");
  }
  if (!(delta >= 0.01 && delta <= 0.03)) {
    std::ostringstream os;
    os << "depth " << delta << " outside [0.01, 0.03]";
    throw ZdError(ErrorCode::kDomain, os.str());
  }
  const int i = link_id - 1;
  const double s = delta / links.reference_depth;
  return {links.mass[i] * s, links.inertia[i] * s};
}

InertiaSet InertiaSet::FromDesign(const LinkTable& links,
                                  const DesignParams& p) {
  InertiaSet s;
  s.mass = links.mass;
  s.inertia = links.inertia;
  const BodyInertia b3 = LinkInertiaFromDepth(links, p.delta_t, 3);
  const BodyInertia b4 = LinkInertiaFromDepth(links, p.delta_b, 4);
  s.mass[2] = b3.mass;
  s.inertia[2] = b3.inertia;
  s.mass[3] = b4.mass;
  s.inertia[3] = b4.inertia;
  return s;
}

InertiaSet InertiaSet::Scaled(double f) const {
  InertiaSet s = *this;
  for (int i = 0; i < 4; ++i) {
    s.mass[i] *= f;
    s.inertia[i] *= f;
  }
  return s;
}

InertiaSet InertiaSet::SingleBody(const LinkTable& links, int i) {
  InertiaSet s;
  s.mass[i] = links.mass[i];
  s.inertia[i] = links.inertia[i];
  return s;
}

Eigen::Matrix4d MechanismInstance::DefaultAngleMap() {
  Eigen::Matrix4d t;
  // clang-format off
  t << 1, 0, 0, 0,
       1, 1, 0, 0,
       1, 1, 1, 0,
       0, 0, 0, 1;
  // clang-format on
  return t;
}

void MechanismInstance::Validate() const {
  links.Validate();
  if (std::abs(angle_map.determinant()) < 1e-12) {
    throw ZdError(ErrorCode::kConfig, "angle map must be invertible");
  }
  if (psi_selector[0] == psi_selector[1] || psi_selector[0] < 0 ||
      psi_selector[1] < 0 || psi_selector[0] > 3 || psi_selector[1] > 3) {
    throw ZdError(ErrorCode::kConfig, "psi selector must name two distinct joints");
  }
  if (std::abs(crank_elbow) != 1 || std::abs(rocker_elbow) != 1) {
    throw ZdError(ErrorCode::kConfig, "elbow signs must be +1 or -1");
  }
}

namespace {

// Two-link planar inverse kinematics from `base` to `target`; returns the
// absolute angles of both links.
std::optional<std::pair<double, double>> Dyad(const Eigen::Vector2d& base,
                                              const Eigen::Vector2d& target,
                                              double a, double b, int elbow) {
  const Eigen::Vector2d d = target - base;
  const double r2 = d.squaredNorm();
  const double c = (r2 - a * a - b * b) / (2.0 * a * b);
  if (!(std::abs(c) <= 1.0)) return std::nullopt;
  const double t2 = elbow * std::acos(c);
  const double t1 = std::atan2(d.y(), d.x()) -
                    std::atan2(b * std::sin(t2), a + b * std::cos(t2));
  return std::make_pair(t1, t1 + t2);
}

double WrapNear(double v, double center) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  return v - kTwoPi * std::round((v - center) / kTwoPi);
}

}  // namespace

std::optional<Eigen::Vector4d> AnalyticConfiguration(
    const MechanismInstance& m, const Eigen::Vector2d& chi) {
  const auto& l = m.links.length;
  const auto crank = Dyad(m.p1, chi, l[0], l[1], m.crank_elbow);
  const auto rocker = Dyad(m.p2, chi, l[3], l[2], m.rocker_elbow);
  if (!crank || !rocker) return std::nullopt;
  const Eigen::Vector4d theta(crank->first, crank->second,
                              rocker->second + std::numbers::pi, rocker->first);
  Eigen::Vector4d q = m.angle_map.partialPivLu().solve(theta - m.angle_offset);
  for (int i = 0; i < 4; ++i) q[i] = WrapNear(q[i], m.wrap_center[i]);
  return q;
}

Eigen::Vector4d SolveConfiguration(const MechanismInstance& m,
                                   const Eigen::Vector2d& chi_target,
                                   const Eigen::Vector4d& q_guess) {
  Eigen::Vector4d q = q_guess;
  for (int it = 0; it <= m.tol.newton_max_iter; ++it) {
    Eigen::Vector4d r;
    r.head<2>() = ForwardKinematics(m, q) - chi_target;
    r.tail<2>() = LoopConstraint(m, q);
    if (!r.allFinite()) break;
    if (r.head<2>().norm() < 0.01 * m.tol.constraint &&
        r.tail<2>().norm() < 0.01 * m.tol.constraint) {
      return q;
    }
    if (it == m.tol.newton_max_iter) {
      if (r.head<2>().norm() < m.tol.constraint &&
          r.tail<2>().norm() < m.tol.constraint) {
        return q;
      }
      break;
    }
    const Eigen::Matrix4d k = StackedJacobian(m, q);
    Eigen::FullPivLU<Eigen::Matrix4d> lu(k);
    if (!lu.isInvertible()) break;
    Eigen::Vector4d step = lu.solve(r);
    // Damp very large steps; the residual is a sum of bounded trig terms.
    const double n = step.lpNorm<Eigen::Infinity>();
    if (n > 0.5) step *= 0.5 / n;
    q -= step;
  }
  std::ostringstream os;
  os << "no configuration reaches chi = (" << chi_target.x() << ", "
     << chi_target.y() << ")";
  throw ZdError(ErrorCode::kUnreachable, os.str());
}

Eigen::Vector4d Configuration(const MechanismInstance& m,
                              const Eigen::Vector2d& chi) {
  const auto guess = AnalyticConfiguration(m, chi);
  if (!guess) {
    std::ostringstream os;
    os << "chi = (" << chi.x() << ", " << chi.y()
       << ") outside the workspace of the assembly branch";
    throw ZdError(ErrorCode::kUnreachable, os.str());
  }
  return SolveConfiguration(m, chi, *guess);
}

namespace {

std::array<int, 2> Complement(std::array<int, 2> s) {
  std::array<int, 2> o{};
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    if (i != s[0] && i != s[1]) o[k++] = i;
  }
  return o;
}

}  // namespace

KinematicJacobians ComputeKinematicJacobians(const MechanismInstance& m,
                                             const Eigen::Vector4d& q,
                                             std::array<int, 2> selector) {
  KinematicJacobians out;
  out.dh_dq = OutputJacobian(m, q);
  out.dphi_dq = ConstraintJacobian(m, q);
  const std::array<int, 2> o = Complement(selector);
  Eigen::Matrix2d h_o, h_s;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      h_o(r, c) = out.dh_dq(r, o[c]);
      h_s(r, c) = out.dh_dq(r, selector[c]);
    }
  }
  // rho(chi, psi): q_selector = psi, q_other solves h(q) = chi.
  const double scale = m.links.length[0] * m.links.length[1];
  if (std::abs(h_o.determinant()) < m.tol.singular_partition * scale) {
    throw ZdError(ErrorCode::kSingularPartition,
                  "output does not determine the non-psi joints");
  }
  const Eigen::Matrix2d h_o_inv = h_o.inverse();
  out.j_rho.setZero();
  for (int c = 0; c < 2; ++c) {
    out.j_rho(selector[c], 2 + c) = 1.0;
  }
  const Eigen::Matrix2d d_chi = h_o_inv;
  const Eigen::Matrix2d d_psi = -h_o_inv * h_s;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      out.j_rho(o[r], c) = d_chi(r, c);
      out.j_rho(o[r], 2 + c) = d_psi(r, c);
    }
  }
  out.j_chi = out.dphi_dq * out.j_rho.leftCols<2>();
  out.j_psi = out.dphi_dq * out.j_rho.rightCols<2>();
  if (std::abs(out.j_psi.determinant()) < m.tol.singular_partition) {
    throw ZdError(ErrorCode::kSingularPartition, "J_psi is singular");
  }
  Eigen::Matrix<double, 4, 2> stacked;
  stacked.topRows<2>() = Eigen::Matrix2d::Identity();
  stacked.bottomRows<2>() = -out.j_psi.partialPivLu().solve(out.j_chi);
  out.j = out.j_rho * stacked;
  return out;
}

double PartitionConditioning(const MechanismInstance& m,
                             const Eigen::Vector4d& q,
                             std::array<int, 2> selector) {
  MechanismInstance loose = m;
  loose.tol.singular_partition = 1e-14;
  try {
    const double d =
        std::abs(ComputeKinematicJacobians(loose, q, selector).j_psi.determinant());
    return std::isfinite(d) ? d : 0.0;
  } catch (const ZdError&) {
    return 0.0;
  }
}

Eigen::Vector2d Sigma(const MechanismInstance& m, const Eigen::Vector2d& chi) {
  const Eigen::Vector4d q = Configuration(m, chi);
  ComputeKinematicJacobians(m, q);
  return {q[m.psi_selector[0]], q[m.psi_selector[1]]};
}

std::vector<SelectorReport> ScanSelectors(
    const MechanismInstance& m, const std::vector<Eigen::Vector2d>& chis) {
  std::vector<SelectorReport> out;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      SelectorReport rep;
      rep.selector = {a, b};
      rep.min_abs_det = std::numeric_limits<double>::infinity();
      for (const auto& chi : chis) {
        const Eigen::Vector4d q = Configuration(m, chi);
        rep.min_abs_det = std::min(rep.min_abs_det,
                                   PartitionConditioning(m, q, rep.selector));
      }
      if (chis.empty()) rep.min_abs_det = 0.0;
      out.push_back(rep);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.min_abs_det > y.min_abs_det;
  });
  return out;
}

}  // namespace zdshape
