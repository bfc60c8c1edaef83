#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hilqr/ilqr.hpp"
#include "hilqr/systems.hpp"
#include "support/oracles.hpp"

using namespace hilqr;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v1(double a) { return Vec::Constant(1, a); }

// One-mode double integrator, exactly representable by the stepper.
HybridSystem make_double_integrator() {
  HybridSystem sys(1, 2, 1);
  sys.set_field(0, [](double, const Vec& x, const Vec& u) {
    return v2(x[1], u[0]);
  });
  return sys;
}

// One-mode pendulum-like smooth nonlinear system.
HybridSystem make_smooth_pendulum() {
  HybridSystem sys(1, 2, 1);
  sys.set_field(0, [](double, const Vec& x, const Vec& u) {
    return v2(x[1], u[0] - std::sin(x[0]));
  });
  return sys;
}

CostModel quadratic_cost(const Mat& q_terminal, const Vec& x_des,
                         const Mat& r_input, const Mat& q_run = Mat()) {
  CostModel cost;
  cost.q_terminal = q_terminal;
  cost.x_des = x_des;
  cost.r_input = r_input;
  cost.q_run = q_run;
  return cost;
}

}  // namespace

TEST_CASE("rollout reproduces the free fall with one impact") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  const CostModel cost =
      quadratic_cost(100.0 * Mat::Identity(2, 2), v2(3.0, 0.0),
                     Mat::Constant(1, 1, 5e-4));
  const std::vector<Vec> zeros(1000, Vec::Zero(1));
  const Trajectory traj =
      rollout(ball.system, v2(4.0, 0.0), 0, zeros, 1e-3, cost, icfg);

  CHECK(traj.horizon() == 1000);
  CHECK(traj.states.size() == 1001);
  CHECK(traj.count_events(TransitionKind::Impact, ball.system) == 1);
  double t_impact = -1.0;
  for (const auto& ev : traj.events) {
    if (ball.system.transition(ev.transition_index).kind ==
        TransitionKind::Impact) {
      t_impact = ev.t_event;
    }
  }
  CHECK(std::abs(t_impact - std::sqrt(2.0 * 4.0 / 9.8)) < 1e-6);
  // Owning step brackets the event time.
  for (const auto& ev : traj.events) {
    CHECK(ev.step_index * 1e-3 <= ev.t_event + 1e-12);
    CHECK(ev.t_event <= (ev.step_index + 1) * 1e-3 + 1e-12);
  }
}

TEST_CASE("empty rollout carries only the terminal cost") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  const CostModel cost = quadratic_cost(
      Mat::Identity(2, 2), v2(3.0, 0.0), Mat::Constant(1, 1, 1.0));
  const Trajectory traj =
      rollout(ball.system, v2(4.0, 0.0), 0, {}, 1e-3, cost, icfg);
  CHECK(traj.states.size() == 1);
  CHECK(traj.cost == doctest::Approx(1.0));  // (4-3)^2
}

TEST_CASE("event-free double integrator step linearization is exact") {
  const HybridSystem sys = make_double_integrator();
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 0.01;
  const CostModel cost =
      quadratic_cost(Mat::Identity(2, 2), Vec::Zero(2), Mat::Identity(1, 1));
  const Trajectory traj =
      rollout(sys, v2(1.0, -0.5), 0, {v1(0.3), v1(-0.1)}, dt, cost, icfg);

  const StepLinearization lin = linearize_step(sys, traj, 0, scfg.variant,
                                               scfg, icfg);
  Mat f_x(2, 2);
  f_x << 1.0, dt, 0.0, 1.0;
  Mat f_u(2, 1);
  f_u << 0.5 * dt * dt, dt;
  CHECK((lin.f_x - f_x).norm() < 1e-9);
  CHECK((lin.f_u - f_u).norm() < 1e-9);
  CHECK(lin.pre_event_f_x.empty());
}

TEST_CASE("impact step linearization matches the true hybrid step map") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  SolverConfig scfg;
  const CostModel cost = quadratic_cost(
      100.0 * Mat::Identity(2, 2), v2(3.0, 0.0), Mat::Constant(1, 1, 5e-4));
  const std::vector<Vec> inputs(1000, v1(0.2));
  const Trajectory traj =
      rollout(ball.system, v2(4.0, 0.0), 0, inputs, 1e-3, cost, icfg);

  int impact_step = -1;
  for (const auto& ev : traj.events) {
    if (ball.system.transition(ev.transition_index).kind ==
        TransitionKind::Impact) {
      impact_step = ev.step_index;
      break;
    }
  }
  REQUIRE(impact_step >= 0);

  Mat fd_x, fd_u;
  testing::fd_step_map_jacobians(
      ball.system,
      {traj.modes[impact_step], traj.states[impact_step],
       traj.time_at(impact_step)},
      traj.inputs[impact_step], 1e-3, icfg, scfg.fd_eps, fd_x, fd_u);

  const StepLinearization sal =
      linearize_step(ball.system, traj, impact_step, GradientVariant::Saltation,
                     scfg, icfg);
  CHECK((sal.f_x - fd_x).norm() / fd_x.norm() < 1e-4);
  CHECK((sal.f_u - fd_u).norm() / std::max(1.0, fd_u.norm()) < 1e-4);
  REQUIRE(sal.pre_event_f_x.size() == 1);

  // The reset-Jacobian variant misses the velocity-position coupling the
  // event-time variation induces.
  const StepLinearization rj = linearize_step(
      ball.system, traj, impact_step, GradientVariant::ResetJacobian, scfg,
      icfg);
  CHECK(std::abs(rj.f_x(1, 0) - fd_x(1, 0)) > 0.5);
}

TEST_CASE("scalar one-step backward pass reproduces the Riccati solution") {
  // f_x = 1, f_u = 1, Q_N = 1, R = 1, x0 = 1: u* = -x/2.
  Trajectory traj;
  traj.dt = 1.0;
  traj.states = {v1(1.0), v1(1.0)};
  traj.inputs = {Vec::Zero(1)};
  traj.modes = {0, 0};

  const CostModel cost = quadratic_cost(Mat::Identity(1, 1), Vec::Zero(1),
                                        Mat::Identity(1, 1));
  StepLinearization lin;
  lin.f_x = Mat::Identity(1, 1);
  lin.f_u = Mat::Identity(1, 1);
  const GainSchedule gains = backward_pass(traj, cost, {lin}, 0.0);
  CHECK(gains.feedforward[0][0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(gains.feedback[0](0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("zero cost weights give zero gains and zero expected reduction") {
  Trajectory traj;
  traj.dt = 1.0;
  traj.states = {v2(1.0, 2.0), v2(2.0, 1.0)};
  traj.inputs = {v1(0.7)};
  traj.modes = {0, 0};
  CostModel cost;
  cost.q_terminal = Mat::Zero(2, 2);
  cost.x_des = Vec::Zero(2);
  cost.r_input = Mat::Zero(1, 1);

  StepLinearization lin;
  lin.f_x = Mat::Identity(2, 2);
  lin.f_u = Mat::Zero(2, 1);
  lin.f_u(1, 0) = 1.0;
  const GainSchedule gains = backward_pass(traj, cost, {lin}, 1e-9);
  CHECK(gains.feedforward[0].norm() == doctest::Approx(0.0));
  CHECK(gains.feedback[0].norm() == doctest::Approx(0.0));
  CHECK(expected_reduction(gains, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("expected reduction matches the quadratic surrogate on one step") {
  const HybridSystem sys = make_double_integrator();
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 0.1;
  const CostModel cost = quadratic_cost(2.0 * Mat::Identity(2, 2),
                                        v2(0.3, -0.1), Mat::Identity(1, 1));
  const Trajectory traj =
      rollout(sys, v2(1.0, 0.0), 0, {v1(0.4)}, dt, cost, icfg);
  const StepLinearization lin =
      linearize_step(sys, traj, 0, scfg.variant, scfg, icfg);
  const GainSchedule gains = backward_pass(traj, cost, {lin}, 0.0);

  // Evaluate the surrogate change by hand: dQ = uff'Qu + 1/2 uff'Quu uff.
  const Vec x1 = traj.states[1];
  const Vec q_u = 2.0 * cost.r_input * traj.inputs[0] +
                  lin.f_u.transpose() * 2.0 * cost.q_terminal * (x1 - cost.x_des);
  const Mat q_uu = 2.0 * cost.r_input +
                   lin.f_u.transpose() * 2.0 * cost.q_terminal * lin.f_u;
  const Vec uff = gains.feedforward[0];
  const double expected = uff.dot(q_u) + 0.5 * uff.dot(q_uu * uff);
  CHECK(expected_reduction(gains, 1.0) ==
        doctest::Approx(expected).epsilon(1e-10));
  // Alpha-weighted form.
  CHECK(expected_reduction(gains, 0.5) ==
        doctest::Approx(0.5 * uff.dot(q_u) + 0.125 * uff.dot(q_uu * uff))
            .epsilon(1e-10));
}

TEST_CASE("hybrid value expansion matches the frozen-gain cost-to-go") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 1e-3;
  const int n_steps = 80;
  const CostModel cost = quadratic_cost(Mat::Identity(2, 2), v2(0.1, 0.0),
                                        Mat::Constant(1, 1, 0.1));
  const std::vector<Vec> inputs(n_steps, v1(0.0));
  const Trajectory traj =
      rollout(ball.system, v2(0.05, -1.0), 0, inputs, dt, cost, icfg);
  REQUIRE(traj.events.size() == 1);
  const int impact_step = traj.events.front().step_index;

  std::vector<StepLinearization> jac;
  for (int k = 0; k < n_steps; ++k) {
    jac.push_back(linearize_step(ball.system, traj, k, scfg.variant, scfg, icfg));
  }
  const GainSchedule gains = backward_pass(traj, cost, jac, 0.0);

  // Cost-to-go from step k under the frozen downstream policy.
  const auto cost_to_go = [&](int k, const Vec& x_start) {
    Vec x = x_start;
    ModeId mode = traj.modes[k];
    double total = 0.0;
    for (int j = k; j < n_steps; ++j) {
      const Vec u = traj.inputs[j] + gains.feedforward[j] +
                    gains.feedback[j] * (x - traj.states[j]);
      total += cost.runtime(x, u);
      const StepResult res = step(ball.system, {mode, x, traj.time_at(j)}, u,
                                  dt, icfg);
      x = res.x_next;
      mode = res.mode_next;
    }
    return total + cost.terminal(x);
  };

  const int k_check = impact_step - 2;
  REQUIRE(k_check > 0);
  const Vec x_k = traj.states[k_check];

  Vec grad_fd(2);
  Mat hess_fd(2, 2);
  const double h = 1e-4;
  for (int i = 0; i < 2; ++i) {
    Vec xp = x_k, xm = x_k;
    xp[i] += h;
    xm[i] -= h;
    grad_fd[i] = (cost_to_go(k_check, xp) - cost_to_go(k_check, xm)) / (2.0 * h);
    hess_fd(i, i) = (cost_to_go(k_check, xp) - 2.0 * cost_to_go(k_check, x_k) +
                     cost_to_go(k_check, xm)) /
                    (h * h);
  }
  {
    Vec xpp = x_k, xpm = x_k, xmp = x_k, xmm = x_k;
    xpp[0] += h; xpp[1] += h;
    xpm[0] += h; xpm[1] -= h;
    xmp[0] -= h; xmp[1] += h;
    xmm[0] -= h; xmm[1] -= h;
    hess_fd(0, 1) = hess_fd(1, 0) =
        (cost_to_go(k_check, xpp) - cost_to_go(k_check, xpm) -
         cost_to_go(k_check, xmp) + cost_to_go(k_check, xmm)) /
        (4.0 * h * h);
  }

  const Vec v_x = gains.value_gradient[k_check];
  const Mat v_xx = gains.value_hessian[k_check];
  CHECK((grad_fd - v_x).norm() / std::max(1.0, v_x.norm()) < 1e-3);
  // The recursion keeps the Gauss-Newton part of the Hessian; curvature of
  // the event-time map is outside the model (measured gap ~0.3 here).
  CHECK((hess_fd - v_xx).norm() / v_xx.norm() < 0.5);
}

TEST_CASE("value expansion is exact on a linear-quadratic problem") {
  const HybridSystem sys = make_double_integrator();
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 0.05;
  const int n_steps = 30;
  const CostModel cost = quadratic_cost(2.0 * Mat::Identity(2, 2),
                                        v2(0.4, 0.0), Mat::Identity(1, 1));
  const std::vector<Vec> inputs(n_steps, v1(0.2));
  const Trajectory traj =
      rollout(sys, v2(1.0, -0.3), 0, inputs, dt, cost, icfg);

  std::vector<StepLinearization> jac;
  for (int k = 0; k < n_steps; ++k) {
    jac.push_back(linearize_step(sys, traj, k, scfg.variant, scfg, icfg));
  }
  const GainSchedule gains = backward_pass(traj, cost, jac, 0.0);

  const auto cost_to_go = [&](int k, const Vec& x_start) {
    Vec x = x_start;
    double total = 0.0;
    for (int j = k; j < n_steps; ++j) {
      const Vec u = traj.inputs[j] + gains.feedforward[j] +
                    gains.feedback[j] * (x - traj.states[j]);
      total += cost.runtime(x, u);
      x = step(sys, {0, x, traj.time_at(j)}, u, dt, icfg).x_next;
    }
    return total + cost.terminal(x);
  };

  const int k_check = 10;
  const Vec x_k = traj.states[k_check];
  const double h = 1e-4;
  Vec grad_fd(2);
  Mat hess_fd = Mat::Zero(2, 2);
  for (int i = 0; i < 2; ++i) {
    Vec xp = x_k, xm = x_k;
    xp[i] += h;
    xm[i] -= h;
    grad_fd[i] = (cost_to_go(k_check, xp) - cost_to_go(k_check, xm)) / (2.0 * h);
    hess_fd(i, i) = (cost_to_go(k_check, xp) - 2.0 * cost_to_go(k_check, x_k) +
                     cost_to_go(k_check, xm)) /
                    (h * h);
  }
  {
    Vec xpp = x_k, xpm = x_k, xmp = x_k, xmm = x_k;
    xpp[0] += h; xpp[1] += h;
    xpm[0] += h; xpm[1] -= h;
    xmp[0] -= h; xmp[1] += h;
    xmm[0] -= h; xmm[1] -= h;
    hess_fd(0, 1) = hess_fd(1, 0) =
        (cost_to_go(k_check, xpp) - cost_to_go(k_check, xpm) -
         cost_to_go(k_check, xmp) + cost_to_go(k_check, xmm)) /
        (4.0 * h * h);
  }
  CHECK((grad_fd - gains.value_gradient[k_check]).norm() < 1e-6);
  CHECK((hess_fd - gains.value_hessian[k_check]).norm() /
            gains.value_hessian[k_check].norm() <
        1e-5);
}

TEST_CASE("transition cost pullback matches the pre-event flow expansion") {
  auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 1e-3;
  const int n_steps = 60;

  CostModel cost = quadratic_cost(Mat::Identity(2, 2), v2(0.1, 0.0),
                                  Mat::Constant(1, 1, 0.1));
  TransitionCost penalty;
  penalty.weight = 3.0 * Mat::Identity(2, 2);
  penalty.x_ref = v2(0.0, -0.5);
  cost.transition_costs[0] = penalty;

  const std::vector<Vec> inputs(n_steps, v1(0.3));
  const Trajectory traj =
      rollout(ball.system, v2(0.04, -1.0), 0, inputs, dt, cost, icfg);
  REQUIRE(traj.events.size() == 1);
  const TransitionEvent& ev = traj.events.front();
  const int k = ev.step_index;

  const StepLinearization lin =
      linearize_step(ball.system, traj, k, scfg.variant, scfg, icfg);
  REQUIRE(lin.pre_event_f_x.size() == 1);

  // phi(x_k, u_k): transition cost at the pre-event state reached by the
  // fixed-endpoint smooth flow.
  const auto phi = [&](const Vec& x, const Vec& u) {
    const Vec x_pre =
        integrate_smooth(ball.system, traj.modes[k], traj.time_at(k), x, u,
                         ev.t_event, icfg);
    const Vec dx = x_pre - penalty.x_ref;
    return dx.dot(penalty.weight * dx);
  };

  const Vec grad_event = 2.0 * penalty.weight * (ev.x_pre - penalty.x_ref);
  const Vec grad_x_model = lin.pre_event_f_x[0].transpose() * grad_event;
  const Vec grad_u_model = lin.pre_event_f_u[0].transpose() * grad_event;
  const Mat hess_x_model = lin.pre_event_f_x[0].transpose() *
                           (2.0 * penalty.weight) * lin.pre_event_f_x[0];

  const double h = 1e-5;
  Vec grad_x_fd(2);
  for (int i = 0; i < 2; ++i) {
    Vec xp = traj.states[k], xm = traj.states[k];
    xp[i] += h;
    xm[i] -= h;
    grad_x_fd[i] =
        (phi(xp, traj.inputs[k]) - phi(xm, traj.inputs[k])) / (2.0 * h);
  }
  Vec grad_u_fd(1);
  {
    Vec up = traj.inputs[k], um = traj.inputs[k];
    up[0] += h;
    um[0] -= h;
    grad_u_fd[0] =
        (phi(traj.states[k], up) - phi(traj.states[k], um)) / (2.0 * h);
  }
  CHECK((grad_x_fd - grad_x_model).norm() / grad_x_model.norm() < 1e-5);
  CHECK((grad_u_fd - grad_u_model).norm() /
            std::max(1.0, grad_u_model.norm()) <
        1e-5);

  Mat hess_x_fd(2, 2);
  const double hh = 1e-4;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      Vec xpp = traj.states[k], xpm = traj.states[k], xmp = traj.states[k],
          xmm = traj.states[k];
      xpp[i] += hh; xpp[j] += hh;
      xpm[i] += hh; xpm[j] -= hh;
      xmp[i] -= hh; xmp[j] += hh;
      xmm[i] -= hh; xmm[j] -= hh;
      hess_x_fd(i, j) = (phi(xpp, traj.inputs[k]) - phi(xpm, traj.inputs[k]) -
                         phi(xmp, traj.inputs[k]) + phi(xmm, traj.inputs[k])) /
                        (4.0 * hh * hh);
    }
  }
  CHECK((hess_x_fd - hess_x_model).norm() / hess_x_model.norm() < 1e-4);
}

TEST_CASE("reference extension lookups") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 1e-3;
  const int n_steps = 120;
  const CostModel cost = quadratic_cost(Mat::Identity(2, 2), v2(0.1, 0.0),
                                        Mat::Constant(1, 1, 0.1));
  const std::vector<Vec> inputs(n_steps, v1(0.0));
  const Trajectory traj =
      rollout(ball.system, v2(0.02, -0.7), 0, inputs, dt, cost, icfg);
  REQUIRE(traj.events.size() >= 1);
  const int impact_step = traj.events.front().step_index;
  REQUIRE(impact_step > 2);
  REQUIRE(impact_step + 6 < n_steps);

  std::vector<StepLinearization> jac;
  for (int k = 0; k < n_steps; ++k) {
    jac.push_back(linearize_step(ball.system, traj, k, scfg.variant, scfg, icfg));
  }
  const GainSchedule gains = backward_pass(traj, cost, jac, 1e-9);
  const ExtendedReference ext =
      ExtendedReference::build(ball.system, traj, gains, icfg, true);

  SUBCASE("in-range queries return the raw reference") {
    const auto entry = ext.lookup(1, 0, 0);
    CHECK((entry.x_ref - traj.states[1]).norm() == 0.0);
    CHECK((entry.u_ref - traj.inputs[1]).norm() == 0.0);
    CHECK((entry.feedback - gains.feedback[1]).norm() == 0.0);
  }

  SUBCASE("late-impact gap queries extend the pre-impact mode ballistically") {
    // A rollout still in descent mode past the reference impact sees the
    // descent segment continued below the guard.
    const int k = impact_step + 3;
    const auto entry = ext.lookup(k, 0, 0);
    const Vec anchor = traj.states[impact_step];
    const double tau = dt * (k - impact_step);
    const double z = anchor[0] + anchor[1] * tau - 0.5 * 9.8 * tau * tau;
    const double zd = anchor[1] - 9.8 * tau;
    CHECK(std::abs(entry.x_ref[0] - z) < 1e-9);
    CHECK(std::abs(entry.x_ref[1] - zd) < 1e-9);
    CHECK(entry.x_ref[0] < 0.0);
    // Boundary gains are held constant on the extension.
    CHECK((entry.feedback - gains.feedback[impact_step]).norm() == 0.0);
  }

  SUBCASE("rollouts with more transitions hold the terminal entry") {
    const auto entry = ext.lookup(impact_step, 5, 0);
    CHECK((entry.x_ref - traj.states[n_steps]).norm() == 0.0);
    CHECK((entry.feedback - gains.feedback[n_steps - 1]).norm() == 0.0);
  }
}

TEST_CASE("forward pass with alpha 0 reproduces the reference exactly") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 1e-3;
  const int n_steps = 100;
  const CostModel cost = quadratic_cost(Mat::Identity(2, 2), v2(0.1, 0.0),
                                        Mat::Constant(1, 1, 0.1));
  const std::vector<Vec> inputs(n_steps, v1(0.2));
  const Trajectory traj =
      rollout(ball.system, v2(0.03, -0.8), 0, inputs, dt, cost, icfg);

  std::vector<StepLinearization> jac;
  for (int k = 0; k < n_steps; ++k) {
    jac.push_back(linearize_step(ball.system, traj, k, scfg.variant, scfg, icfg));
  }
  const GainSchedule gains = backward_pass(traj, cost, jac, 1e-9);
  const ExtendedReference ext =
      ExtendedReference::build(ball.system, traj, gains, icfg, true);
  const Trajectory replay = forward_pass(ball.system, traj, ext, 0.0, cost, icfg);

  REQUIRE(replay.states.size() == traj.states.size());
  for (size_t k = 0; k < traj.states.size(); ++k) {
    CHECK((replay.states[k] - traj.states[k]).norm() == 0.0);
  }
  CHECK(replay.events.size() == traj.events.size());
  CHECK(replay.cost == doctest::Approx(traj.cost).epsilon(1e-14));
}

TEST_CASE("LQR problem solves to the Riccati solution in two iterations") {
  const HybridSystem sys = make_double_integrator();
  IntegratorConfig icfg;
  SolverConfig scfg;
  scfg.convergence_tol = 1e-9;
  const double dt = 0.1;
  const int n_steps = 20;
  const Mat q_run = 0.5 * Mat::Identity(2, 2);
  const CostModel cost = quadratic_cost(3.0 * Mat::Identity(2, 2), Vec::Zero(2),
                                        Mat::Identity(1, 1), q_run);
  const Vec x0 = v2(1.0, 0.0);

  Mat f(2, 2), g(2, 1);
  f << 1.0, dt, 0.0, 1.0;
  g << 0.5 * dt * dt, dt;
  const auto riccati = testing::riccati_lqr(f, g, q_run, Mat::Identity(1, 1),
                                            3.0 * Mat::Identity(2, 2), x0,
                                            n_steps);

  const std::vector<Vec> seed(n_steps, Vec::Zero(1));
  const SolveResult res = solve(sys, x0, 0, seed, dt, cost, scfg, icfg);
  CHECK(res.stats.converged);
  CHECK(res.stats.iterations <= 2);
  CHECK(res.trajectory.cost == doctest::Approx(riccati.cost).epsilon(1e-8));
  for (int k = 0; k < n_steps; ++k) {
    CHECK((res.trajectory.inputs[k] - riccati.inputs[k]).norm() < 1e-6);
    CHECK((res.gains.feedback[k] + riccati.gains[k]).norm() < 1e-6);
  }
}

TEST_CASE("first forward pass at alpha 1 reaches the LQR optimum") {
  const HybridSystem sys = make_double_integrator();
  IntegratorConfig icfg;
  SolverConfig scfg;
  const double dt = 0.1;
  const int n_steps = 15;
  const CostModel cost = quadratic_cost(2.0 * Mat::Identity(2, 2), Vec::Zero(2),
                                        Mat::Identity(1, 1));
  const Vec x0 = v2(-0.7, 0.4);

  const std::vector<Vec> seed(n_steps, Vec::Zero(1));
  const Trajectory traj = rollout(sys, x0, 0, seed, dt, cost, icfg);
  std::vector<StepLinearization> jac;
  for (int k = 0; k < n_steps; ++k) {
    jac.push_back(linearize_step(sys, traj, k, scfg.variant, scfg, icfg));
  }
  const GainSchedule gains = backward_pass(traj, cost, jac, 1e-9);
  const ExtendedReference ext =
      ExtendedReference::build(sys, traj, gains, icfg, true);
  const Trajectory improved = forward_pass(sys, traj, ext, 1.0, cost, icfg);

  Mat f(2, 2), g(2, 1);
  f << 1.0, dt, 0.0, 1.0;
  g << 0.5 * dt * dt, dt;
  const auto riccati =
      testing::riccati_lqr(f, g, Mat::Zero(2, 2), Mat::Identity(1, 1),
                           2.0 * Mat::Identity(2, 2), x0, n_steps);
  CHECK(improved.cost == doctest::Approx(riccati.cost).epsilon(1e-8));
}

TEST_CASE("hybrid machinery is dormant on smooth problems") {
  const HybridSystem sys = make_smooth_pendulum();
  IntegratorConfig icfg;
  SolverConfig scfg;
  scfg.max_iterations = 25;
  scfg.convergence_tol = 1e-7;
  const double dt = 0.05;
  const int n_steps = 40;
  const CostModel cost = quadratic_cost(
      10.0 * Mat::Identity(2, 2), v2(0.6, 0.0), 0.5 * Mat::Identity(1, 1));
  const Vec x0 = v2(-0.4, 0.0);
  const std::vector<Vec> seed(n_steps, Vec::Zero(1));

  const SolveResult hybrid = solve(sys, x0, 0, seed, dt, cost, scfg, icfg);
  const auto plain =
      testing::plain_ilqr(sys, x0, 0, seed, dt, cost, scfg, icfg);

  CHECK(hybrid.stats.converged == plain.converged);
  CHECK(hybrid.stats.iterations == plain.iterations);
  REQUIRE(hybrid.stats.cost_trace.size() == plain.cost_trace.size());
  for (size_t i = 0; i < plain.cost_trace.size(); ++i) {
    CHECK(std::abs(hybrid.stats.cost_trace[i] - plain.cost_trace[i]) <= 1e-10);
  }
  REQUIRE(hybrid.stats.dj_trace.size() == plain.dj_trace.size());
  for (size_t i = 0; i < plain.dj_trace.size(); ++i) {
    CHECK(std::abs(hybrid.stats.dj_trace[i] - plain.dj_trace[i]) <= 1e-10);
  }
  for (int k = 0; k < n_steps; ++k) {
    CHECK((hybrid.gains.feedback[k] - plain.feedback[k]).norm() <= 1e-10);
    CHECK((hybrid.gains.feedforward[k] - plain.feedforward[k]).norm() <= 1e-10);
  }
}

TEST_CASE("gradient variants are identical on event-free problems") {
  const HybridSystem sys = make_smooth_pendulum();
  IntegratorConfig icfg;
  SolverConfig scfg;
  scfg.max_iterations = 15;
  scfg.convergence_tol = 1e-7;
  const double dt = 0.05;
  const CostModel cost = quadratic_cost(
      10.0 * Mat::Identity(2, 2), v2(0.6, 0.0), 0.5 * Mat::Identity(1, 1));
  const std::vector<Vec> seed(30, Vec::Zero(1));

  SolverConfig sal = scfg;
  sal.variant = GradientVariant::Saltation;
  SolverConfig rj = scfg;
  rj.variant = GradientVariant::ResetJacobian;
  const SolveResult a = solve(sys, v2(-0.4, 0.0), 0, seed, dt, cost, sal, icfg);
  const SolveResult b = solve(sys, v2(-0.4, 0.0), 0, seed, dt, cost, rj, icfg);

  REQUIRE(a.stats.cost_trace.size() == b.stats.cost_trace.size());
  for (size_t i = 0; i < a.stats.cost_trace.size(); ++i) {
    CHECK(a.stats.cost_trace[i] == b.stats.cost_trace[i]);
  }
  CHECK(a.trajectory.cost == b.trajectory.cost);
}

TEST_CASE("accepted iterations never increase cost") {
  const auto ball = make_bouncing_ball(0.8);
  IntegratorConfig icfg;
  SolverConfig scfg;
  scfg.max_iterations = 40;
  scfg.convergence_tol = 0.05;
  const int n_steps = 300;
  const CostModel cost = quadratic_cost(
      100.0 * Mat::Identity(2, 2), v2(3.2, 0.0), Mat::Constant(1, 1, 5e-4));
  const std::vector<Vec> seed(n_steps, v1(6.0));

  const SolveResult res =
      solve(ball.system, v2(4.0, 0.0), 0, seed, 1e-3, cost, scfg, icfg);
  for (size_t i = 1; i < res.stats.cost_trace.size(); ++i) {
    CHECK(res.stats.cost_trace[i] <= res.stats.cost_trace[i - 1] + 1e-12);
  }
}
