#include "hilqr/hybrid_system.hpp"

#include <cmath>
#include <utility>

namespace hilqr {

HybridSystem::HybridSystem(int num_modes, int state_dim, int input_dim)
    : state_dim_(state_dim), input_dim_(input_dim) {
  if (num_modes < 1 || state_dim < 1 || input_dim < 0) {
    throw ConfigError("HybridSystem: invalid dimensions");
  }
  fields_.resize(num_modes);
  outgoing_.resize(num_modes);
}

void HybridSystem::set_field(ModeId mode, VectorField field) {
  check_mode(mode);
  fields_[mode] = std::move(field);
}

int HybridSystem::add_transition(Transition tr) {
  check_mode(tr.from);
  check_mode(tr.to);
  if (!tr.guard || !tr.reset) {
    throw ConfigError("Transition '" + tr.name + "' lacks guard or reset");
  }
  const int index = static_cast<int>(transitions_.size());
  outgoing_[tr.from].push_back(index);
  transitions_.push_back(std::move(tr));
  return index;
}

const Transition& HybridSystem::transition(int index) const {
  check_transition(index);
  return transitions_[index];
}

const std::vector<int>& HybridSystem::transitions_from(ModeId mode) const {
  check_mode(mode);
  return outgoing_[mode];
}

Vec HybridSystem::eval_field(ModeId mode, double t, const Vec& x,
                             const Vec& u) const {
  check_mode(mode);
  if (!fields_[mode]) {
    throw ConfigError("mode " + std::to_string(mode) + " has no vector field");
  }
  return fields_[mode](t, x, u);
}

double HybridSystem::guard_value(int transition_index, double t, const Vec& x,
                                 const Vec& u) const {
  check_transition(transition_index);
  return transitions_[transition_index].guard(t, x, u);
}

Vec HybridSystem::apply_reset(int transition_index, double t, const Vec& x,
                              const Vec& u) const {
  check_transition(transition_index);
  Vec post = transitions_[transition_index].reset(t, x, u);
  if (!post.allFinite()) {
    throw NumericalError("reset of transition '" +
                         transitions_[transition_index].name +
                         "' produced a non-finite state");
  }
  return post;
}

Vec HybridSystem::guard_gradient_x(int transition_index, double t, const Vec& x,
                                   const Vec& u) const {
  check_transition(transition_index);
  const Transition& tr = transitions_[transition_index];
  if (tr.guard_x) return tr.guard_x(t, x, u);
  const double h = fd_step(x);
  Vec grad(state_dim_);
  Vec xp = x;
  for (int i = 0; i < state_dim_; ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double gp = tr.guard(t, xp, u);
    xp[i] = xi - h;
    const double gm = tr.guard(t, xp, u);
    xp[i] = xi;
    grad[i] = (gp - gm) / (2.0 * h);
  }
  return grad;
}

double HybridSystem::guard_gradient_t(int transition_index, double t,
                                      const Vec& x, const Vec& u) const {
  check_transition(transition_index);
  const Transition& tr = transitions_[transition_index];
  if (tr.guard_t) return tr.guard_t(t, x, u);
  const double h = std::max(1e-6, 1e-6 * std::abs(t));
  return (tr.guard(t + h, x, u) - tr.guard(t - h, x, u)) / (2.0 * h);
}

Vec HybridSystem::reset_gradient_t(int transition_index, double t, const Vec& x,
                                   const Vec& u) const {
  check_transition(transition_index);
  const Transition& tr = transitions_[transition_index];
  if (tr.reset_t) return tr.reset_t(t, x, u);
  const double h = std::max(1e-6, 1e-6 * std::abs(t));
  return (tr.reset(t + h, x, u) - tr.reset(t - h, x, u)) / (2.0 * h);
}

Mat HybridSystem::reset_jacobian(int transition_index, double t, const Vec& x,
                                 const Vec& u) const {
  check_transition(transition_index);
  const Transition& tr = transitions_[transition_index];
  if (tr.reset_x) return tr.reset_x(t, x, u);
  const double h = fd_step(x);
  Mat jac(state_dim_, state_dim_);
  Vec xp = x;
  for (int i = 0; i < state_dim_; ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const Vec rp = tr.reset(t, xp, u);
    xp[i] = xi - h;
    const Vec rm = tr.reset(t, xp, u);
    xp[i] = xi;
    jac.col(i) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

double HybridSystem::guard_flow_rate(int transition_index, double t,
                                     const Vec& x, const Vec& u) const {
  const Transition& tr = transition(transition_index);
  const Vec flow = eval_field(tr.from, t, x, u);
  return guard_gradient_t(transition_index, t, x, u) +
         guard_gradient_x(transition_index, t, x, u).dot(flow);
}

Mat HybridSystem::saltation_matrix(int transition_index, double t,
                                   const Vec& x_pre, const Vec& u_pre,
                                   const Vec& u_post,
                                   double transversality_tol) const {
  const Transition& tr = transition(transition_index);

  const Vec flow_pre = eval_field(tr.from, t, x_pre, u_pre);
  const Vec grad_x = guard_gradient_x(transition_index, t, x_pre, u_pre);
  const double denom =
      guard_gradient_t(transition_index, t, x_pre, u_pre) + grad_x.dot(flow_pre);
  if (std::abs(denom) <= transversality_tol) {
    throw TangentialCrossing("transition '" + tr.name +
                             "': guard crossing rate " +
                             std::to_string(denom) + " below tolerance");
  }

  const Mat reset_jac = reset_jacobian(transition_index, t, x_pre, u_pre);
  const Vec x_post = apply_reset(transition_index, t, x_pre, u_pre);
  const Vec flow_post = eval_field(tr.to, t, x_post, u_post);
  const Vec reset_dt = reset_gradient_t(transition_index, t, x_pre, u_pre);

  const Vec numerator = flow_post - reset_jac * flow_pre - reset_dt;
  return reset_jac + numerator * grad_x.transpose() / denom;
}

Mat HybridSystem::saltation_matrix(int transition_index, double t,
                                   const Vec& x_pre, const Vec& u_pre,
                                   double transversality_tol) const {
  return saltation_matrix(transition_index, t, x_pre, u_pre, u_pre,
                          transversality_tol);
}

void HybridSystem::check_mode(ModeId mode) const {
  if (mode < 0 || mode >= num_modes()) {
    throw ConfigError("unknown mode " + std::to_string(mode));
  }
}

void HybridSystem::check_transition(int index) const {
  if (index < 0 || index >= num_transitions()) {
    throw ConfigError("unknown transition " + std::to_string(index));
  }
}

}  // namespace hilqr
