#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hilqr/types.hpp"

namespace hilqr {

/// Index into a system's mode set.
using ModeId = int;

/// Role of a transition, used for event bookkeeping (e.g. bounce counting).
enum class TransitionKind { Impact, Liftoff, Other };

/// Time-varying vector field with control input, xdot = F(t, x, u).
using VectorField = std::function<Vec(double, const Vec&, const Vec&)>;

/// Directed edge of the transition graph. The guard is a scalar function
/// whose zero sublevel set triggers the transition; only decreasing
/// crossings (positive to <= 0) fire. Analytic derivatives are optional;
/// central finite differences are used where they are absent.
struct Transition {
  ModeId from = 0;
  ModeId to = 0;
  TransitionKind kind = TransitionKind::Other;
  std::string name;

  std::function<double(double, const Vec&, const Vec&)> guard;
  std::function<Vec(double, const Vec&, const Vec&)> reset;

  // Optional analytic derivatives of guard and reset.
  std::function<Vec(double, const Vec&, const Vec&)> guard_x;     // n
  std::function<double(double, const Vec&, const Vec&)> guard_t;  // scalar
  std::function<Mat(double, const Vec&, const Vec&)> reset_x;     // n x n
  std::function<Vec(double, const Vec&, const Vec&)> reset_t;     // n
};

/// Continuous state tagged with its active mode.
struct HybridState {
  ModeId mode = 0;
  Vec x;
  double t = 0.0;
};

/// A localized guard crossing together with the applied reset.
struct TransitionEvent {
  int transition_index = -1;
  double t_event = 0.0;
  Vec x_pre;
  Vec x_post;
  Vec u;             // input held across the event
  int step_index = -1;  // owning solver timestep; -1 outside a rollout
};

/// Piecewise-smooth dynamics: per-mode vector fields connected by guarded
/// resets. All modes share one state and input dimension, so perturbation
/// maps across transitions stay square.
class HybridSystem {
 public:
  HybridSystem() = default;  // empty placeholder; configure before use
  HybridSystem(int num_modes, int state_dim, int input_dim);

  int num_modes() const { return static_cast<int>(fields_.size()); }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }

  void set_field(ModeId mode, VectorField field);
  int add_transition(Transition tr);

  const Transition& transition(int index) const;
  int num_transitions() const { return static_cast<int>(transitions_.size()); }
  const std::vector<int>& transitions_from(ModeId mode) const;

  /// Evaluates the active mode's vector field F_mode(t, x, u).
  Vec eval_field(ModeId mode, double t, const Vec& x, const Vec& u) const;

  /// Guard value; <= 0 means the guard set is reached.
  double guard_value(int transition_index, double t, const Vec& x,
                     const Vec& u) const;

  /// Applies the reset map of a transition whose guard has been reached.
  Vec apply_reset(int transition_index, double t, const Vec& x,
                  const Vec& u) const;

  /// First-order map of state perturbations across the transition:
  ///   Xi = DxR + (F_to - DxR F_from - DtR) Dxg / (Dtg + Dxg F_from)
  /// with the destination field evaluated at the post-reset state under
  /// u_post. Throws TangentialCrossing when the denominator magnitude is
  /// below transversality_tol.
  Mat saltation_matrix(int transition_index, double t, const Vec& x_pre,
                       const Vec& u_pre, const Vec& u_post,
                       double transversality_tol = 1e-8) const;

  /// Zero-order-hold variant: u_post = u_pre.
  Mat saltation_matrix(int transition_index, double t, const Vec& x_pre,
                       const Vec& u_pre,
                       double transversality_tol = 1e-8) const;

  /// Jacobian DxR of the reset map, the comparison gradient variant.
  Mat reset_jacobian(int transition_index, double t, const Vec& x,
                     const Vec& u) const;

  // Derivatives used by the saltation matrix: analytic when registered,
  // central finite differences otherwise.
  Vec guard_gradient_x(int transition_index, double t, const Vec& x,
                       const Vec& u) const;
  double guard_gradient_t(int transition_index, double t, const Vec& x,
                          const Vec& u) const;
  Vec reset_gradient_t(int transition_index, double t, const Vec& x,
                       const Vec& u) const;

  /// Rate of guard decrease along the flow, Dtg + Dxg . F_from.
  double guard_flow_rate(int transition_index, double t, const Vec& x,
                         const Vec& u) const;

 private:
  void check_mode(ModeId mode) const;
  void check_transition(int index) const;

  int state_dim_ = 0;
  int input_dim_ = 0;
  std::vector<VectorField> fields_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<int>> outgoing_;
};

/// Finite-difference step for guard/reset derivative fallbacks.
inline double fd_step(const Vec& x) {
  return std::max(1e-6, 1e-6 * x.norm());
}

}  // namespace hilqr
