#include "hilqr/mechanics.hpp"

#include <cmath>

namespace hilqr {

ConstrainedAccel constrained_accel(const MechanicalModel& model, const Vec& q,
                                   const Vec& qd, const Vec& u,
                                   const std::vector<int>& active) {
  const int nq = model.nq;
  const int nc = static_cast<int>(active.size());

  const Mat mass = model.mass(q);
  Vec rhs_force = model.force_bias(q, qd) + model.input_map(q, u);
  if (model.coriolis) rhs_force -= model.coriolis(q, qd) * qd;

  if (nc == 0) {
    Eigen::LLT<Mat> llt(mass);
    if (llt.info() != Eigen::Success) {
      throw SingularConstraint("inertia matrix is not positive definite");
    }
    return {llt.solve(rhs_force), Vec::Zero(0)};
  }

  Mat a_rows(nc, nq);
  Mat force_cols(nq, nc);  // constraint-normal plus friction directions
  Vec rhs_constraint(nc);
  for (int i = 0; i < nc; ++i) {
    const auto& c = model.constraints.at(active[i]);
    const Vec jac = c.jacobian(q);
    a_rows.row(i) = jac.transpose();
    force_cols.col(i) = jac;
    if (c.friction > 0.0 && c.friction_dir) {
      force_cols.col(i) += c.friction * c.friction_dir(q, qd);
    }
    rhs_constraint[i] = -c.jacobian_dot(q, qd).dot(qd);
  }

  Mat block = Mat::Zero(nq + nc, nq + nc);
  block.topLeftCorner(nq, nq) = mass;
  block.topRightCorner(nq, nc) = -force_cols;
  block.bottomLeftCorner(nc, nq) = a_rows;

  Vec rhs(nq + nc);
  rhs.head(nq) = rhs_force;
  rhs.tail(nc) = rhs_constraint;

  Eigen::FullPivLU<Mat> lu(block);
  if (!lu.isInvertible()) {
    throw SingularConstraint("constraint block system is rank deficient");
  }
  const Vec sol = lu.solve(rhs);
  return {sol.head(nq), sol.tail(nc)};
}

Vec plastic_impact(const MechanicalModel& model, const Vec& q,
                   const Vec& qd_pre, const std::vector<int>& active) {
  const int nq = model.nq;
  const int nc = static_cast<int>(active.size());
  if (nc == 0) return qd_pre;

  Mat a_rows(nc, nq);
  for (int i = 0; i < nc; ++i) {
    a_rows.row(i) = model.constraints.at(active[i]).jacobian(q).transpose();
  }

  Eigen::LLT<Mat> mass_llt(model.mass(q));
  if (mass_llt.info() != Eigen::Success) {
    throw SingularConstraint("inertia matrix is not positive definite");
  }
  const Mat minv_at = mass_llt.solve(a_rows.transpose());
  const Mat gram = a_rows * minv_at;
  Eigen::FullPivLU<Mat> lu(gram);
  if (!lu.isInvertible()) {
    throw SingularConstraint("active constraints are not independent");
  }
  return qd_pre - minv_at * lu.solve(a_rows * qd_pre);
}

}  // namespace hilqr
