#include "hilqr/systems.hpp"

#include <cmath>
#include <utility>

namespace hilqr {
namespace {

constexpr double kMass = 1.0;

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

BenchmarkSystem make_bouncing_ball(double restitution) {
  if (!(restitution > 0.0 && restitution < 1.0)) {
    throw ConfigError("bouncing ball: restitution must lie in (0, 1)");
  }
  const double e = restitution;

  // Mode 0: descent (zdot < 0), mode 1: ascent (zdot >= 0). The fields
  // coincide; the split mirrors the guard structure (impact vs apex).
  HybridSystem sys(2, 2, 1);
  auto ballistic = [](double, const Vec& x, const Vec& u) {
    return vec2(x[1], (u[0] - kMass * kGravity) / kMass);
  };
  sys.set_field(0, ballistic);
  sys.set_field(1, ballistic);

  Transition impact;
  impact.from = 0;
  impact.to = 1;
  impact.kind = TransitionKind::Impact;
  impact.name = "impact";
  impact.guard = [](double, const Vec& x, const Vec&) { return x[0]; };
  impact.guard_x = [](double, const Vec&, const Vec&) { return vec2(1.0, 0.0); };
  impact.guard_t = [](double, const Vec&, const Vec&) { return 0.0; };
  impact.reset = [e](double, const Vec& x, const Vec&) {
    return vec2(x[0], -e * x[1]);
  };
  impact.reset_x = [e](double, const Vec&, const Vec&) {
    return diag2(1.0, -e);
  };
  impact.reset_t = [](double, const Vec&, const Vec&) {
    return Vec::Zero(2).eval();
  };
  sys.add_transition(impact);

  Transition apex;
  apex.from = 1;
  apex.to = 0;
  apex.kind = TransitionKind::Other;
  apex.name = "apex";
  apex.guard = [](double, const Vec& x, const Vec&) { return x[1]; };
  apex.guard_x = [](double, const Vec&, const Vec&) { return vec2(0.0, 1.0); };
  apex.guard_t = [](double, const Vec&, const Vec&) { return 0.0; };
  apex.reset = [](double, const Vec& x, const Vec&) { return x; };
  apex.reset_x = [](double, const Vec&, const Vec&) {
    return Mat::Identity(2, 2).eval();
  };
  apex.reset_t = [](double, const Vec&, const Vec&) {
    return Vec::Zero(2).eval();
  };
  sys.add_transition(apex);

  BenchmarkSystem bench;
  bench.name = "bouncing_ball";
  bench.system = std::move(sys);
  bench.x0 = vec2(4.0, 0.0);
  bench.mode0 = 0;
  bench.x_des = vec2(3.0, 0.0);
  bench.horizon = 1000;
  bench.dt = 1e-3;
  bench.q_terminal = 100.0 * Mat::Identity(2, 2);
  bench.r_input = Mat::Constant(1, 1, 5e-7 / bench.dt);
  return bench;
}

BenchmarkSystem make_spring_damper_ball() {
  const double k = 100.0;
  const double d = 5.0;

  // Mode 0: aerial, mode 1: penetrating with downward velocity (spring +
  // damper), mode 2: penetrating with upward velocity (spring only).
  HybridSystem sys(3, 2, 1);
  sys.set_field(0, [](double, const Vec& x, const Vec& u) {
    return vec2(x[1], (u[0] - kMass * kGravity) / kMass);
  });
  sys.set_field(1, [k, d](double, const Vec& x, const Vec& u) {
    return vec2(x[1],
                (u[0] - kMass * kGravity - (k * x[0] + d * x[1])) / kMass);
  });
  sys.set_field(2, [k](double, const Vec& x, const Vec& u) {
    return vec2(x[1], (u[0] - kMass * kGravity - k * x[0]) / kMass);
  });

  auto identity_reset = [](Transition& tr) {
    tr.reset = [](double, const Vec& x, const Vec&) { return x; };
    tr.reset_x = [](double, const Vec&, const Vec&) {
      return Mat::Identity(2, 2).eval();
    };
    tr.reset_t = [](double, const Vec&, const Vec&) {
      return Vec::Zero(2).eval();
    };
  };

  Transition touchdown;
  touchdown.from = 0;
  touchdown.to = 1;
  touchdown.kind = TransitionKind::Impact;
  touchdown.name = "touchdown";
  touchdown.guard = [](double, const Vec& x, const Vec&) { return x[0]; };
  touchdown.guard_x = [](double, const Vec&, const Vec&) {
    return vec2(1.0, 0.0);
  };
  touchdown.guard_t = [](double, const Vec&, const Vec&) { return 0.0; };
  identity_reset(touchdown);
  sys.add_transition(touchdown);

  // Penetrating velocity reaches zero; oriented so the guard decreases
  // through zero as zdot rises.
  Transition rebound;
  rebound.from = 1;
  rebound.to = 2;
  rebound.kind = TransitionKind::Other;
  rebound.name = "rebound";
  rebound.guard = [](double, const Vec& x, const Vec&) { return -x[1]; };
  rebound.guard_x = [](double, const Vec&, const Vec&) {
    return vec2(0.0, -1.0);
  };
  rebound.guard_t = [](double, const Vec&, const Vec&) { return 0.0; };
  identity_reset(rebound);
  sys.add_transition(rebound);

  Transition release;
  release.from = 2;
  release.to = 0;
  release.kind = TransitionKind::Liftoff;
  release.name = "release";
  release.guard = [](double, const Vec& x, const Vec&) { return -x[0]; };
  release.guard_x = [](double, const Vec&, const Vec&) {
    return vec2(-1.0, 0.0);
  };
  release.guard_t = [](double, const Vec&, const Vec&) { return 0.0; };
  identity_reset(release);
  sys.add_transition(release);

  BenchmarkSystem bench;
  bench.name = "spring_damper_ball";
  bench.system = std::move(sys);
  bench.x0 = vec2(3.0, -2.0);
  bench.mode0 = 0;
  bench.x_des = vec2(1.0, 0.0);
  bench.horizon = 1000;
  bench.dt = 1e-3;
  bench.q_terminal = 100.0 * Mat::Identity(2, 2);
  bench.r_input = Mat::Constant(1, 1, 1e-4);
  return bench;
}

BenchmarkSystem make_circle_drop() {
  auto model = std::make_shared<MechanicalModel>();
  model->nq = 2;
  model->nu = 2;
  model->mass = [](const Vec&) { return (kMass * Mat::Identity(2, 2)).eval(); };
  model->force_bias = [](const Vec&, const Vec&) {
    return vec2(0.0, -kMass * kGravity);
  };
  model->input_map = [](const Vec&, const Vec& u) { return u; };

  MechanicalModel::Constraint wall;
  wall.value = [](const Vec& q) { return 4.0 - q[0] * q[0] - q[1] * q[1]; };
  wall.jacobian = [](const Vec& q) { return vec2(-2.0 * q[0], -2.0 * q[1]); };
  wall.jacobian_dot = [](const Vec&, const Vec& qd) {
    return vec2(-2.0 * qd[0], -2.0 * qd[1]);
  };
  model->constraints.push_back(wall);

  // State x = [y, z, yd, zd]; mode 0 free flight, mode 1 on the wall.
  HybridSystem sys(2, 4, 2);
  auto free_field = [model](double, const Vec& x, const Vec& u) {
    Vec out(4);
    out.head(2) = x.tail(2);
    out.tail(2) =
        (model->force_bias(x.head(2), x.tail(2)) + u) / kMass;
    return out;
  };
  auto contact_field = [model](double, const Vec& x, const Vec& u) {
    const auto sol = constrained_accel(*model, x.head(2), x.tail(2), u, {0});
    Vec out(4);
    out.head(2) = x.tail(2);
    out.tail(2) = sol.qdd;
    return out;
  };
  sys.set_field(0, free_field);
  sys.set_field(1, contact_field);

  Transition impact;
  impact.from = 0;
  impact.to = 1;
  impact.kind = TransitionKind::Impact;
  impact.name = "impact";
  impact.guard = [model](double, const Vec& x, const Vec&) {
    return model->constraints[0].value(x.head(2));
  };
  impact.guard_x = [model](double, const Vec& x, const Vec&) {
    Vec g = Vec::Zero(4);
    g.head(2) = model->constraints[0].jacobian(x.head(2));
    return g;
  };
  impact.guard_t = [](double, const Vec&, const Vec&) { return 0.0; };
  impact.reset = [model](double, const Vec& x, const Vec&) {
    Vec post(4);
    post.head(2) = x.head(2);
    post.tail(2) = plastic_impact(*model, x.head(2), x.tail(2), {0});
    return post;
  };
  sys.add_transition(impact);

  // Contact force crossing zero releases the constraint.
  Transition liftoff;
  liftoff.from = 1;
  liftoff.to = 0;
  liftoff.kind = TransitionKind::Liftoff;
  liftoff.name = "liftoff";
  liftoff.guard = [model](double, const Vec& x, const Vec& u) {
    return constrained_accel(*model, x.head(2), x.tail(2), u, {0}).lambda[0];
  };
  liftoff.reset = [](double, const Vec& x, const Vec&) { return x; };
  liftoff.reset_x = [](double, const Vec&, const Vec&) {
    return Mat::Identity(4, 4).eval();
  };
  liftoff.reset_t = [](double, const Vec&, const Vec&) {
    return Vec::Zero(4).eval();
  };
  sys.add_transition(liftoff);

  BenchmarkSystem bench;
  bench.name = "circle_drop";
  bench.system = std::move(sys);
  bench.x0 = Vec(4);
  bench.x0 << 1.0, 0.0, 1.0, -1.0;  // released inside the tube, moving
                                    // down and to the right
  bench.mode0 = 0;
  bench.x_des = Vec(4);
  bench.x_des << -std::sqrt(3.0), -1.0, 0.0, 0.0;
  bench.horizon = 1000;
  bench.dt = 1e-3;
  bench.q_terminal = 100.0 * Mat::Identity(4, 4);
  bench.r_input = 1e-4 * Mat::Identity(2, 2);
  bench.mechanics = model;
  bench.mode_active = {{}, {0}};
  return bench;
}

BenchmarkSystem make_quadcopter(double friction) {
  if (friction < 0.0) throw ConfigError("quadcopter: friction must be >= 0");
  const double w = 0.25;        // body width
  const double inertia = 1.0;   // rotational inertia
  const double radius_sq = 25.0;

  auto model = std::make_shared<MechanicalModel>();
  model->nq = 3;
  model->nu = 2;
  model->mass = [inertia](const Vec&) {
    Vec d(3);
    d << kMass, kMass, inertia;
    return d.asDiagonal().toDenseMatrix();
  };
  model->force_bias = [](const Vec&, const Vec&) {
    Vec n(3);
    n << 0.0, -kMass * kGravity, 0.0;
    return n;
  };
  model->input_map = [w](const Vec& q, const Vec& u) {
    const double thrust = u[0] + u[1];
    Vec out(3);
    out << -std::sin(q[2]) * thrust, std::cos(q[2]) * thrust,
        0.5 * w * (u[1] - u[0]);
    return out;
  };

  // side = -1 for the left edge, +1 for the right edge.
  auto edge_pos = [w](const Vec& q, double side) {
    return vec2(q[0] + side * 0.5 * w * std::cos(q[2]),
                q[1] + side * 0.5 * w * std::sin(q[2]));
  };
  auto edge_jac = [w](const Vec& q, double side) {
    Mat j(2, 3);
    j << 1.0, 0.0, -side * 0.5 * w * std::sin(q[2]),
         0.0, 1.0,  side * 0.5 * w * std::cos(q[2]);
    return j;
  };

  auto make_constraint = [&, radius_sq](double side) {
    MechanicalModel::Constraint c;
    c.value = [edge_pos, side, radius_sq](const Vec& q) {
      const Vec p = edge_pos(q, side);
      return radius_sq - p.squaredNorm();
    };
    c.jacobian = [edge_pos, edge_jac, side](const Vec& q) {
      const Vec p = edge_pos(q, side);
      return (-2.0 * (edge_jac(q, side).transpose() * p)).eval();
    };
    c.jacobian_dot = [edge_pos, edge_jac, side, w](const Vec& q,
                                                   const Vec& qd) {
      const Vec p = edge_pos(q, side);
      const Mat j = edge_jac(q, side);
      const Vec pd = j * qd;
      // d/dt of the edge Jacobian only moves its theta column.
      Mat jdot = Mat::Zero(2, 3);
      jdot(0, 2) = -side * 0.5 * w * std::cos(q[2]) * qd[2];
      jdot(1, 2) = -side * 0.5 * w * std::sin(q[2]) * qd[2];
      return (-2.0 * (j.transpose() * pd + jdot.transpose() * p)).eval();
    };
    c.friction = friction;
    c.friction_dir = [edge_pos, edge_jac, side](const Vec& q, const Vec& qd) {
      const Vec p = edge_pos(q, side);
      const double r = p.norm();
      if (r < 1e-12) return Vec::Zero(3).eval();
      const Vec tangent = vec2(-p[1], p[0]) / r;
      const Mat j = edge_jac(q, side);
      const double v_t = tangent.dot(j * qd);
      if (v_t == 0.0) return Vec::Zero(3).eval();
      const double sign = v_t > 0.0 ? 1.0 : -1.0;
      return (j.transpose() * (-sign * tangent)).eval();
    };
    return c;
  };
  model->constraints.push_back(make_constraint(-1.0));  // left edge
  model->constraints.push_back(make_constraint(+1.0));  // right edge

  // Modes: 0 free, 1 left contact, 2 right contact, 3 latched double
  // contact (absorbing, state frozen).
  HybridSystem sys(4, 6, 2);
  auto field_for = [model](std::vector<int> active) {
    return [model, active = std::move(active)](double, const Vec& x,
                                               const Vec& u) {
      const auto sol = constrained_accel(*model, x.head(3), x.tail(3), u, active);
      Vec out(6);
      out.head(3) = x.tail(3);
      out.tail(3) = sol.qdd;
      return out;
    };
  };
  sys.set_field(0, field_for({}));
  sys.set_field(1, field_for({0}));
  sys.set_field(2, field_for({1}));
  sys.set_field(3,
                [](double, const Vec&, const Vec&) { return Vec::Zero(6).eval(); });

  auto wall_guard = [model](int constraint) {
    return [model, constraint](double, const Vec& x, const Vec&) {
      return model->constraints[constraint].value(x.head(3));
    };
  };
  auto wall_guard_x = [model](int constraint) {
    return [model, constraint](double, const Vec& x, const Vec&) {
      Vec g = Vec::Zero(6);
      g.head(3) = model->constraints[constraint].jacobian(x.head(3));
      return g;
    };
  };
  auto plastic_reset = [model](std::vector<int> active) {
    return [model, active = std::move(active)](double, const Vec& x,
                                               const Vec&) {
      Vec post(6);
      post.head(3) = x.head(3);
      post.tail(3) = plastic_impact(*model, x.head(3), x.tail(3), active);
      return post;
    };
  };
  auto latch_reset = [](double, const Vec& x, const Vec&) {
    Vec post = x;
    post.tail(3).setZero();
    return post;
  };
  auto latch_reset_x = [](double, const Vec&, const Vec&) {
    Mat j = Mat::Zero(6, 6);
    j.topLeftCorner(3, 3).setIdentity();
    return j;
  };
  auto zero_guard_t = [](double, const Vec&, const Vec&) { return 0.0; };

  auto add_impact = [&](ModeId from, ModeId to, int constraint,
                        const std::string& name, bool latch) {
    Transition tr;
    tr.from = from;
    tr.to = to;
    tr.kind = TransitionKind::Impact;
    tr.name = name;
    tr.guard = wall_guard(constraint);
    tr.guard_x = wall_guard_x(constraint);
    tr.guard_t = zero_guard_t;
    if (latch) {
      tr.reset = latch_reset;
      tr.reset_x = latch_reset_x;
      tr.reset_t = [](double, const Vec&, const Vec&) {
        return Vec::Zero(6).eval();
      };
    } else {
      tr.reset = plastic_reset({constraint});
    }
    sys.add_transition(tr);
  };
  add_impact(0, 1, 0, "left-impact", false);
  add_impact(0, 2, 1, "right-impact", false);
  add_impact(1, 3, 1, "latch-right", true);
  add_impact(2, 3, 0, "latch-left", true);

  auto add_liftoff = [&](ModeId from, int constraint, const std::string& name) {
    Transition tr;
    tr.from = from;
    tr.to = 0;
    tr.kind = TransitionKind::Liftoff;
    tr.name = name;
    tr.guard = [model, constraint](double, const Vec& x, const Vec& u) {
      return constrained_accel(*model, x.head(3), x.tail(3), u, {constraint})
          .lambda[0];
    };
    tr.reset = [](double, const Vec& x, const Vec&) { return x; };
    tr.reset_x = [](double, const Vec&, const Vec&) {
      return Mat::Identity(6, 6).eval();
    };
    tr.reset_t = [](double, const Vec&, const Vec&) {
      return Vec::Zero(6).eval();
    };
    sys.add_transition(tr);
  };
  add_liftoff(1, 0, "left-liftoff");
  add_liftoff(2, 1, "right-liftoff");

  BenchmarkSystem bench;
  bench.name = "quadcopter";
  bench.system = std::move(sys);
  bench.x0 = Vec(6);
  bench.x0 << 2.0, 2.5, -M_PI / 8.0, 4.0, 0.0, 0.0;
  bench.mode0 = 0;
  bench.x_des = Vec(6);
  // The target sits on the radius-5 wall; z uses 5*sin so the point
  // actually lies on the circle.
  bench.x_des << 5.0 * std::cos(-M_PI / 12.0), 5.0 * std::sin(-M_PI / 12.0),
      -7.0 * M_PI / 12.0, 0.0, 0.0, 0.0;
  bench.horizon = 1000;
  bench.dt = 2e-3;
  bench.q_terminal = Mat::Zero(6, 6);
  bench.q_terminal.topLeftCorner(3, 3) = 1000.0 * Mat::Identity(3, 3);
  bench.q_terminal.bottomRightCorner(3, 3) = 0.1 * Mat::Identity(3, 3);
  bench.r_input = 0.01 * Mat::Identity(2, 2);
  bench.mechanics = model;
  bench.mode_active = {{}, {0}, {1}, {0, 1}};
  return bench;
}

BenchmarkSystem make_system(const std::string& name,
                            const SystemParams& params) {
  if (name == "bouncing_ball") return make_bouncing_ball(params.restitution);
  if (name == "spring_damper_ball") return make_spring_damper_ball();
  if (name == "circle_drop") return make_circle_drop();
  if (name == "quadcopter") return make_quadcopter(params.friction);
  throw ConfigError("unknown system '" + name + "'");
}

std::vector<std::string> registered_systems() {
  return {"bouncing_ball", "spring_damper_ball", "circle_drop", "quadcopter"};
}

}  // namespace hilqr
