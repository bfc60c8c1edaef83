#pragma once

#include <functional>
#include <vector>

#include "hilqr/types.hpp"

namespace hilqr {

/// Euler-Lagrange dynamics subject to unilateral holonomic constraints:
///   M(q) qdd + C(q,qd) qd = N(q,qd) + Upsilon(q,u) + A(q)' lambda + friction
/// where N collects applied forces (gravity, damping), each constraint
/// a_i(q) >= 0 holds away from contact, and lambda >= 0 pushes along the
/// constraint gradient while active (A qdd + Adot qd = 0).
struct MechanicalModel {
  int nq = 0;
  int nu = 0;

  std::function<Mat(const Vec&)> mass;
  std::function<Mat(const Vec&, const Vec&)> coriolis;  // may be null (zero)
  std::function<Vec(const Vec&, const Vec&)> force_bias;
  std::function<Vec(const Vec&, const Vec&)> input_map;

  struct Constraint {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> jacobian;  // row D_q a as a vector
    std::function<Vec(const Vec&, const Vec&)> jacobian_dot;  // Adot(q, qd)
    double friction = 0.0;  // sliding friction coefficient mu
    // Unit generalized direction of the friction force, opposing the
    // tangential velocity of the contact point; zero vector at rest.
    std::function<Vec(const Vec&, const Vec&)> friction_dir;
  };
  std::vector<Constraint> constraints;
};

struct ConstrainedAccel {
  Vec qdd;
  Vec lambda;  // one entry per active constraint
};

/// Solves accelerations and constraint forces of the active set in one
/// block system; friction contributes mu*lambda along each constraint's
/// friction direction. Throws SingularConstraint on rank deficiency.
ConstrainedAccel constrained_accel(const MechanicalModel& model, const Vec& q,
                                   const Vec& qd, const Vec& u,
                                   const std::vector<int>& active);

/// Plastic impact law: removes the normal velocity of the active
/// constraints, qd+ = qd - Minv A'(A Minv A')^-1 A qd. Positions unchanged.
Vec plastic_impact(const MechanicalModel& model, const Vec& q,
                   const Vec& qd_pre, const std::vector<int>& active);

}  // namespace hilqr
