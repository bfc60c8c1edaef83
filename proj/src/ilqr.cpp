#include "hilqr/ilqr.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace hilqr {

double CostModel::runtime(const Vec& x, const Vec& u) const {
  double c = u.dot(r_input * u);
  if (q_run.size() > 0) {
    const Vec dx = x - x_des;
    c += dx.dot(q_run * dx);
  }
  return c;
}

double CostModel::terminal(const Vec& x) const {
  const Vec dx = x - x_des;
  return dx.dot(q_terminal * dx);
}

double CostModel::transition(int transition_index, const Vec& x_pre) const {
  const auto it = transition_costs.find(transition_index);
  if (it == transition_costs.end()) return 0.0;
  const Vec dx = x_pre - it->second.x_ref;
  return dx.dot(it->second.weight * dx);
}

void CostModel::validate(int state_dim, int input_dim) const {
  auto symmetric = [](const Mat& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  };
  if (q_terminal.rows() != state_dim || q_terminal.cols() != state_dim ||
      !symmetric(q_terminal)) {
    throw ConfigError("cost: q_terminal must be a symmetric state_dim matrix");
  }
  Eigen::SelfAdjointEigenSolver<Mat> qn(q_terminal);
  if (qn.eigenvalues().minCoeff() < -1e-10) {
    throw ConfigError("cost: q_terminal must be positive semidefinite");
  }
  if (r_input.rows() != input_dim || r_input.cols() != input_dim ||
      !symmetric(r_input)) {
    throw ConfigError("cost: r_input must be a symmetric input_dim matrix");
  }
  Eigen::LLT<Mat> llt(r_input);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("cost: r_input must be positive definite");
  }
  if (q_run.size() > 0 &&
      (q_run.rows() != state_dim || q_run.cols() != state_dim || !symmetric(q_run))) {
    throw ConfigError("cost: q_run must be a symmetric state_dim matrix");
  }
  if (x_des.size() != state_dim) {
    throw ConfigError("cost: x_des dimension mismatch");
  }
}

int Trajectory::count_events(TransitionKind kind,
                             const HybridSystem& sys) const {
  int count = 0;
  for (const auto& ev : events) {
    if (sys.transition(ev.transition_index).kind == kind) ++count;
  }
  return count;
}

std::vector<double> SolverConfig::alphas() const {
  if (!alpha_schedule.empty()) return alpha_schedule;
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(std::pow(0.5, i));
  return out;
}

Trajectory rollout(const HybridSystem& sys, const Vec& x0, ModeId mode0,
                   const std::vector<Vec>& inputs, double dt,
                   const CostModel& cost, const IntegratorConfig& icfg,
                   double start_time) {
  const int n_steps = static_cast<int>(inputs.size());
  Trajectory traj;
  traj.dt = dt;
  traj.start_time = start_time;
  traj.states.reserve(n_steps + 1);
  traj.modes.reserve(n_steps + 1);
  traj.inputs = inputs;
  traj.states.push_back(x0);
  traj.modes.push_back(mode0);

  double total = 0.0;
  Vec x = x0;
  ModeId mode = mode0;
  for (int k = 0; k < n_steps; ++k) {
    total += cost.runtime(x, inputs[k]);
    StepResult res =
        step(sys, {mode, x, start_time + dt * k}, inputs[k], dt, icfg);
    for (auto& ev : res.events) {
      ev.step_index = k;
      total += cost.transition(ev.transition_index, ev.x_pre);
      traj.events.push_back(std::move(ev));
    }
    x = res.x_next;
    mode = res.mode_next;
    traj.states.push_back(x);
    traj.modes.push_back(mode);
  }
  total += cost.terminal(x);
  traj.cost = total;
  return traj;
}

namespace {

// Central-difference Jacobians of the fixed-endpoint smooth flow map
// (x0, u) -> x(t1) in one mode, guards ignored.
void flow_jacobians(const HybridSystem& sys, ModeId mode, double t0,
                    const Vec& x0, const Vec& u, double t1, double fd_eps,
                    const IntegratorConfig& icfg, Mat& f_x, Mat& f_u) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  f_x.resize(n, n);
  f_u.resize(n, m);
  if (std::abs(t1 - t0) < 1e-14) {
    f_x.setIdentity();
    f_u.setZero();
    return;
  }
  Vec xp = x0;
  for (int i = 0; i < n; ++i) {
    const double h = fd_eps * std::max(1.0, std::abs(x0[i]));
    const double xi = x0[i];
    xp[i] = xi + h;
    const Vec fp = integrate_smooth(sys, mode, t0, xp, u, t1, icfg);
    xp[i] = xi - h;
    const Vec fm = integrate_smooth(sys, mode, t0, xp, u, t1, icfg);
    xp[i] = xi;
    f_x.col(i) = (fp - fm) / (2.0 * h);
  }
  Vec up = u;
  for (int j = 0; j < m; ++j) {
    const double h = fd_eps * std::max(1.0, std::abs(u[j]));
    const double uj = u[j];
    up[j] = uj + h;
    const Vec fp = integrate_smooth(sys, mode, t0, x0, up, t1, icfg);
    up[j] = uj - h;
    const Vec fm = integrate_smooth(sys, mode, t0, x0, up, t1, icfg);
    up[j] = uj;
    f_u.col(j) = (fp - fm) / (2.0 * h);
  }
}

std::vector<const TransitionEvent*> events_of_step(const Trajectory& traj,
                                                   int k) {
  std::vector<const TransitionEvent*> out;
  for (const auto& ev : traj.events) {
    if (ev.step_index == k) out.push_back(&ev);
  }
  return out;
}

}  // namespace

StepLinearization linearize_step(const HybridSystem& sys,
                                 const Trajectory& traj, int k,
                                 GradientVariant variant,
                                 const SolverConfig& scfg,
                                 const IntegratorConfig& icfg) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  const double t_k = traj.time_at(k);
  const double t_next = traj.time_at(k + 1);
  const Vec& u = traj.inputs.at(k);
  const auto events = events_of_step(traj, k);

  StepLinearization lin;
  if (events.empty()) {
    flow_jacobians(sys, traj.modes[k], t_k, traj.states[k], u, t_next,
                   scfg.fd_eps, icfg, lin.f_x, lin.f_u);
    return lin;
  }

  // Compose smooth sub-flow Jacobians with one transition matrix per
  // event, in event order.
  Mat total_x = Mat::Identity(n, n);
  Mat total_u = Mat::Zero(n, m);
  double t_seg = t_k;
  Vec x_seg = traj.states[k];
  ModeId mode_seg = traj.modes[k];

  Mat seg_x(n, n), seg_u(n, m);
  for (const TransitionEvent* ev : events) {
    flow_jacobians(sys, mode_seg, t_seg, x_seg, u, ev->t_event, scfg.fd_eps,
                   icfg, seg_x, seg_u);
    total_u = seg_x * total_u + seg_u;
    total_x = seg_x * total_x;
    lin.pre_event_f_x.push_back(total_x);
    lin.pre_event_f_u.push_back(total_u);

    const Mat jump =
        variant == GradientVariant::Saltation
            ? sys.saltation_matrix(ev->transition_index, ev->t_event,
                                   ev->x_pre, ev->u, scfg.transversality_tol)
            : sys.reset_jacobian(ev->transition_index, ev->t_event, ev->x_pre,
                                 ev->u);
    total_x = jump * total_x;
    total_u = jump * total_u;

    t_seg = ev->t_event;
    x_seg = ev->x_post;
    mode_seg = sys.transition(ev->transition_index).to;
  }
  flow_jacobians(sys, mode_seg, t_seg, x_seg, u, t_next, scfg.fd_eps, icfg,
                 seg_x, seg_u);
  lin.f_x = seg_x * total_x;
  lin.f_u = seg_x * total_u + seg_u;
  return lin;
}

GainSchedule backward_pass(const Trajectory& traj, const CostModel& cost,
                           const std::vector<StepLinearization>& jacobians,
                           double reg) {
  const int n_steps = traj.horizon();
  if (static_cast<int>(jacobians.size()) != n_steps) {
    throw ConfigError("backward_pass: jacobian count does not match horizon");
  }
  const int n = static_cast<int>(traj.states.front().size());
  const int m = n_steps > 0 ? static_cast<int>(traj.inputs.front().size()) : 0;

  GainSchedule gains;
  gains.feedforward.resize(n_steps);
  gains.feedback.resize(n_steps);
  gains.reduction_terms.resize(n_steps);
  gains.value_gradient.resize(n_steps + 1);
  gains.value_hessian.resize(n_steps + 1);

  Vec v_x = 2.0 * cost.q_terminal * (traj.states[n_steps] - cost.x_des);
  Mat v_xx = 2.0 * cost.q_terminal;
  gains.value_gradient[n_steps] = v_x;
  gains.value_hessian[n_steps] = v_xx;

  const Mat j_uu = 2.0 * cost.r_input;
  const Mat j_xx =
      cost.q_run.size() > 0 ? Mat(2.0 * cost.q_run) : Mat(Mat::Zero(n, n));

  for (int k = n_steps - 1; k >= 0; --k) {
    const Mat& f_x = jacobians[k].f_x;
    const Mat& f_u = jacobians[k].f_u;

    Vec q_x = f_x.transpose() * v_x;
    Vec q_u = 2.0 * cost.r_input * traj.inputs[k] + f_u.transpose() * v_x;
    Mat q_xx = j_xx + f_x.transpose() * v_xx * f_x;
    Mat q_ux = f_u.transpose() * v_xx * f_x;
    Mat q_uu = j_uu + f_u.transpose() * v_xx * f_u;
    if (cost.q_run.size() > 0) {
      q_x += 2.0 * cost.q_run * (traj.states[k] - cost.x_des);
    }

    // Transition-cost expansions, taken about the pre-reset state and
    // pulled back through the sub-step map.
    if (!cost.transition_costs.empty()) {
      const auto events = events_of_step(traj, k);
      for (size_t j = 0; j < events.size(); ++j) {
        const auto it = cost.transition_costs.find(events[j]->transition_index);
        if (it == cost.transition_costs.end()) continue;
        const Mat& pre_x = jacobians[k].pre_event_f_x.at(j);
        const Mat& pre_u = jacobians[k].pre_event_f_u.at(j);
        const Vec grad = 2.0 * it->second.weight * (events[j]->x_pre - it->second.x_ref);
        const Mat hess = 2.0 * it->second.weight;
        q_x += pre_x.transpose() * grad;
        q_u += pre_u.transpose() * grad;
        q_xx += pre_x.transpose() * hess * pre_x;
        q_ux += pre_u.transpose() * hess * pre_x;
        q_uu += pre_u.transpose() * hess * pre_u;
      }
    }

    Mat q_uu_reg = 0.5 * (q_uu + q_uu.transpose());
    q_uu_reg += reg * Mat::Identity(m, m);
    Eigen::LLT<Mat> llt(q_uu_reg);
    if (llt.info() != Eigen::Success) {
      throw NonPDHessian("Quu not positive definite at step " +
                         std::to_string(k));
    }

    const Vec u_ff = -llt.solve(q_u);
    const Mat k_fb = -llt.solve(q_ux);

    gains.feedforward[k] = u_ff;
    gains.feedback[k] = k_fb;
    gains.reduction_terms[k] = {u_ff.dot(q_u), u_ff.dot(q_uu_reg * u_ff)};

    v_x = q_x + k_fb.transpose() * q_u;
    v_xx = q_xx + k_fb.transpose() * q_ux;
    v_xx = 0.5 * (v_xx + v_xx.transpose());
    gains.value_gradient[k] = v_x;
    gains.value_hessian[k] = v_xx;
  }
  return gains;
}

double expected_reduction(const GainSchedule& gains, double alpha) {
  double linear = 0.0;
  double quadratic = 0.0;
  for (const auto& [d1, d2] : gains.reduction_terms) {
    linear += d1;
    quadratic += d2;
  }
  return alpha * linear + 0.5 * alpha * alpha * quadratic;
}

ExtendedReference ExtendedReference::build(const HybridSystem& sys,
                                           const Trajectory& traj,
                                           const GainSchedule& gains,
                                           const IntegratorConfig& icfg,
                                           bool enabled) {
  ExtendedReference ext;
  ext.enabled_ = enabled;
  ext.traj_ = &traj;
  ext.gains_ = &gains;
  if (!enabled) return ext;

  const int n_steps = traj.horizon();
  const int n_states = n_steps + 1;
  const int n_segments = static_cast<int>(traj.events.size()) + 1;

  for (int s = 0; s < n_segments; ++s) {
    Segment seg;
    seg.first_state = s == 0 ? 0 : traj.events[s - 1].step_index + 1;
    seg.last_state =
        s == n_segments - 1 ? n_steps : traj.events[s].step_index;
    const bool empty = seg.first_state > seg.last_state;
    seg.mode = empty ? sys.transition(traj.events[s - 1].transition_index).to
                     : traj.modes[seg.first_state];

    if (empty) {
      seg.gain_lo = seg.gain_hi =
          std::clamp(traj.events[s - 1].step_index, 0, n_steps - 1);
    } else {
      seg.gain_lo = std::clamp(seg.first_state, 0, n_steps - 1);
      seg.gain_hi = std::clamp(seg.last_state, 0, n_steps - 1);
    }

    seg.ref_states.resize(n_states);
    for (int k = std::max(seg.first_state, 0);
         k <= std::min(seg.last_state, n_steps); ++k) {
      seg.ref_states[k] = traj.states[k];
    }

    // Anchors for integration off the segment ends. Zero-length segments
    // (several events in one step) anchor at their opening event.
    double lo_t, hi_t;
    Vec lo_x, hi_x;
    if (empty) {
      lo_t = hi_t = traj.events[s - 1].t_event;
      lo_x = hi_x = traj.events[s - 1].x_post;
    } else {
      lo_t = traj.time_at(seg.first_state);
      lo_x = traj.states[seg.first_state];
      hi_t = traj.time_at(seg.last_state);
      hi_x = traj.states[seg.last_state];
    }

    const Vec& u_lo = traj.inputs[seg.gain_lo];
    const Vec& u_hi = traj.inputs[seg.gain_hi];
    // Backward from the segment start.
    {
      double t = lo_t;
      Vec x = lo_x;
      for (int k = (empty ? static_cast<int>(std::floor((lo_t - traj.start_time) / traj.dt))
                          : seg.first_state - 1);
           k >= 0; --k) {
        const double t_k = traj.time_at(k);
        x = integrate_smooth(sys, seg.mode, t, x, u_lo, t_k, icfg);
        t = t_k;
        seg.ref_states[k] = x;
      }
    }
    // Forward past the segment end.
    {
      double t = hi_t;
      Vec x = hi_x;
      for (int k = (empty ? static_cast<int>(std::floor((hi_t - traj.start_time) / traj.dt)) + 1
                          : seg.last_state + 1);
           k <= n_steps; ++k) {
        const double t_k = traj.time_at(k);
        x = integrate_smooth(sys, seg.mode, t, x, u_hi, t_k, icfg);
        t = t_k;
        seg.ref_states[k] = x;
      }
    }
    ext.segments_.push_back(std::move(seg));
  }
  return ext;
}

ExtendedReference::Entry ExtendedReference::lookup(int k, int ordinal,
                                                   ModeId mode) const {
  const Trajectory& traj = *traj_;
  const GainSchedule& gains = *gains_;
  const int n_steps = traj.horizon();
  const int k_gain = std::clamp(k, 0, n_steps - 1);

  if (!enabled_) {
    return {traj.states[std::clamp(k, 0, n_steps)], traj.inputs[k_gain],
            gains.feedback[k_gain], gains.feedforward[k_gain]};
  }

  int idx = -1;
  const int n_segments = num_segments();
  if (ordinal < n_segments && segments_[ordinal].mode == mode) {
    idx = ordinal;
  } else if (ordinal < n_segments) {
    for (int s = ordinal + 1; s < n_segments && idx < 0; ++s) {
      if (segments_[s].mode == mode) idx = s;
    }
    for (int s = ordinal - 1; s >= 0 && idx < 0; --s) {
      if (segments_[s].mode == mode) idx = s;
    }
  }
  if (idx < 0) {
    // Rollout outran the reference's transitions: hold the terminal state
    // and gains.
    return {traj.states[n_steps], traj.inputs[n_steps - 1],
            gains.feedback[n_steps - 1], gains.feedforward[n_steps - 1]};
  }

  const Segment& seg = segments_[idx];
  int g = k;
  if (k < seg.first_state) {
    g = seg.gain_lo;
  } else if (k > std::min(seg.last_state, n_steps - 1)) {
    g = seg.gain_hi;
  }
  g = std::clamp(g, 0, n_steps - 1);
  return {seg.ref_states[std::clamp(k, 0, n_steps)], traj.inputs[g],
          gains.feedback[g], gains.feedforward[g]};
}

Trajectory forward_pass(const HybridSystem& sys, const Trajectory& reference,
                        const ExtendedReference& extension, double alpha,
                        const CostModel& cost, const IntegratorConfig& icfg) {
  const int n_steps = reference.horizon();
  Trajectory traj;
  traj.dt = reference.dt;
  traj.start_time = reference.start_time;
  traj.states.reserve(n_steps + 1);
  traj.modes.reserve(n_steps + 1);
  traj.inputs.reserve(n_steps);

  Vec x = reference.states[0];
  ModeId mode = reference.modes[0];
  traj.states.push_back(x);
  traj.modes.push_back(mode);

  double total = 0.0;
  int ordinal = 0;
  for (int k = 0; k < n_steps; ++k) {
    const auto entry = extension.lookup(k, ordinal, mode);
    Vec u = entry.u_ref + alpha * entry.feedforward +
            entry.feedback * (x - entry.x_ref);
    if (!u.allFinite()) {
      throw NumericalError("forward_pass: non-finite input at step " +
                           std::to_string(k));
    }
    total += cost.runtime(x, u);
    StepResult res =
        step(sys, {mode, x, reference.time_at(k)}, u, reference.dt, icfg);
    for (auto& ev : res.events) {
      ev.step_index = k;
      total += cost.transition(ev.transition_index, ev.x_pre);
      traj.events.push_back(std::move(ev));
      ++ordinal;
    }
    x = res.x_next;
    mode = res.mode_next;
    traj.states.push_back(x);
    traj.modes.push_back(mode);
    traj.inputs.push_back(std::move(u));
  }
  total += cost.terminal(x);
  traj.cost = total;
  return traj;
}

SolveResult solve(const HybridSystem& sys, const Vec& x0, ModeId mode0,
                  const std::vector<Vec>& u_seed, double dt,
                  const CostModel& cost, const SolverConfig& scfg,
                  const IntegratorConfig& icfg) {
  cost.validate(sys.state_dim(), sys.input_dim());
  const int n_steps = static_cast<int>(u_seed.size());

  SolveResult result;
  result.trajectory = rollout(sys, x0, mode0, u_seed, dt, cost, icfg);
  SolveStats& stats = result.stats;
  stats.cost_trace.push_back(result.trajectory.cost);
  stats.event_count_trace.push_back(
      static_cast<int>(result.trajectory.events.size()));

  double reg = scfg.reg_init;
  const auto alphas = scfg.alphas();
  std::vector<StepLinearization> jacobians;
  bool jacobians_stale = true;
  // A rejected line search means the local model is not trustworthy, so
  // its expected reduction is no convergence certificate until a pass is
  // accepted again (regularization inflation alone drives dJ to zero).
  bool model_trusted = true;

  for (int iter = 0; iter < scfg.max_iterations; ++iter) {
    stats.iterations = iter + 1;

    if (jacobians_stale) {
      jacobians.clear();
      jacobians.reserve(n_steps);
      for (int k = 0; k < n_steps; ++k) {
        jacobians.push_back(
            linearize_step(sys, result.trajectory, k, scfg.variant, scfg, icfg));
      }
      jacobians_stale = false;
    }

    bool backward_ok = false;
    while (!backward_ok) {
      try {
        result.gains = backward_pass(result.trajectory, cost, jacobians, reg);
        backward_ok = true;
      } catch (const NonPDHessian& err) {
        reg = (reg == 0.0 ? scfg.reg_min : reg) * scfg.reg_up;
        if (reg > scfg.reg_max) {
          stats.error = err.what();
          return result;
        }
      }
    }

    const double dj_full = expected_reduction(result.gains, 1.0);
    stats.dj_trace.push_back(std::abs(dj_full));
    if (model_trusted && std::abs(dj_full) <= scfg.convergence_tol) {
      stats.converged = true;
      return result;
    }

    const ExtendedReference extension =
        ExtendedReference::build(sys, result.trajectory, result.gains, icfg,
                                 scfg.use_reference_extension);

    bool accepted = false;
    for (double alpha : alphas) {
      Trajectory candidate;
      try {
        candidate = forward_pass(sys, result.trajectory, extension, alpha,
                                 cost, icfg);
      } catch (const NumericalError&) {
        continue;
      }
      const double actual = result.trajectory.cost - candidate.cost;
      const double expected = -expected_reduction(result.gains, alpha);
      if (actual > 0.0 && actual >= scfg.accept_ratio * expected) {
        result.trajectory = std::move(candidate);
        accepted = true;
        break;
      }
    }

    model_trusted = accepted;
    if (accepted) {
      reg = std::max(reg * scfg.reg_down, scfg.reg_min);
      jacobians_stale = true;
    } else {
      reg = (reg == 0.0 ? scfg.reg_min : reg) * scfg.reg_up;
      if (reg > scfg.reg_max) {
        stats.error = "line search stalled at maximum regularization";
        return result;
      }
    }
    stats.cost_trace.push_back(result.trajectory.cost);
    stats.event_count_trace.push_back(
        static_cast<int>(result.trajectory.events.size()));
  }
  return result;
}

}  // namespace hilqr
