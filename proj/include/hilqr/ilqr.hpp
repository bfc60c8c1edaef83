#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hilqr/hybrid_system.hpp"
#include "hilqr/integrator.hpp"
#include "hilqr/types.hpp"

namespace hilqr {

/// Quadratic cost attached to one transition, evaluated at the pre-reset
/// state: (x_pre - x_ref)' W (x_pre - x_ref).
struct TransitionCost {
  Mat weight;
  Vec x_ref;
};

/// Quadratic objective. Runtime cost u'Ru + (x - x_des)'Qrun(x - x_des) is
/// summed over timesteps; terminal cost is (x_N - x_des)'QN(x_N - x_des).
/// Qrun defaults to zero (input-only runtime cost) when left empty.
struct CostModel {
  Mat q_terminal;
  Vec x_des;
  Mat r_input;
  Mat q_run;
  std::map<int, TransitionCost> transition_costs;  // keyed by transition index

  double runtime(const Vec& x, const Vec& u) const;
  double terminal(const Vec& x) const;
  double transition(int transition_index, const Vec& x_pre) const;

  /// Checks symmetry/definiteness requirements; throws ConfigError.
  void validate(int state_dim, int input_dim) const;
};

/// Discrete-time trajectory over a hybrid time domain. modes[k] is the
/// active mode at states[k]; events carry their owning timestep index.
struct Trajectory {
  std::vector<Vec> states;   // N + 1
  std::vector<Vec> inputs;   // N
  std::vector<ModeId> modes; // N + 1
  std::vector<TransitionEvent> events;
  double dt = 0.0;
  double start_time = 0.0;
  double cost = 0.0;

  int horizon() const { return static_cast<int>(inputs.size()); }
  double time_at(int k) const { return start_time + dt * k; }
  int count_events(TransitionKind kind, const HybridSystem& sys) const;
};

/// Feedback policy produced by the backward pass, plus the per-step terms
/// of the expected-reduction model and the value expansion along the
/// reference.
struct GainSchedule {
  std::vector<Vec> feedforward;                      // N
  std::vector<Mat> feedback;                         // N
  std::vector<std::pair<double, double>> reduction_terms;  // (uff'Qu, uff'Quu uff)
  std::vector<Vec> value_gradient;  // N + 1, V_x at each state
  std::vector<Mat> value_hessian;   // N + 1, V_xx at each state
};

/// Which matrix propagates value derivatives through a transition.
enum class GradientVariant { Saltation, ResetJacobian };

struct SolverConfig {
  GradientVariant variant = GradientVariant::Saltation;
  int max_iterations = 100;
  double convergence_tol = 1e-3;  // on |dJ(1)|

  // Additive regularization of Quu, scaled up on rejected passes and down
  // on accepted ones.
  double reg_init = 1e-9;
  double reg_min = 1e-9;
  double reg_max = 1e10;
  double reg_up = 10.0;
  double reg_down = 0.5;

  std::vector<double> alpha_schedule;  // defaults to {1, 1/2, ..., 2^-10}
  double accept_ratio = 0.0;           // minimal actual/expected reduction

  bool use_reference_extension = true;
  double fd_eps = 1e-5;            // step-map Jacobian differencing
  double transversality_tol = 1e-8;

  std::vector<double> alphas() const;
};

struct SolveStats {
  int iterations = 0;
  std::vector<double> cost_trace;      // seed cost, then per iteration
  std::vector<double> dj_trace;        // |dJ(1)| per backward pass
  std::vector<int> event_count_trace;  // reference event count per iteration
  bool converged = false;
  std::string error;  // nonempty when a numerical failure ended the solve
};

/// Jacobians of one discrete step. For event-owning steps f_x/f_u compose
/// the smooth sub-flow Jacobians with the per-event transition matrix
/// (saltation or reset Jacobian); pre_event_* hold the map into each
/// event's pre-reset state for transition-cost expansions.
struct StepLinearization {
  Mat f_x;
  Mat f_u;
  std::vector<Mat> pre_event_f_x;
  std::vector<Mat> pre_event_f_u;
};

/// Simulates the input sequence through the event-detecting stepper and
/// accumulates the cost.
Trajectory rollout(const HybridSystem& sys, const Vec& x0, ModeId mode0,
                   const std::vector<Vec>& inputs, double dt,
                   const CostModel& cost, const IntegratorConfig& icfg,
                   double start_time = 0.0);

StepLinearization linearize_step(const HybridSystem& sys,
                                 const Trajectory& traj, int k,
                                 GradientVariant variant,
                                 const SolverConfig& scfg,
                                 const IntegratorConfig& icfg);

/// Value recursion with hybrid coefficient expansions at event steps.
/// Throws NonPDHessian when the regularized Quu fails its factorization.
GainSchedule backward_pass(const Trajectory& traj, const CostModel& cost,
                           const std::vector<StepLinearization>& jacobians,
                           double reg);

/// Model-predicted cost change of applying the gains with line-search
/// parameter alpha: dJ(alpha) = alpha*sum(uff'Qu) + alpha^2/2*sum(uff'Quu uff).
/// Negative values predict improvement; |dJ(1)| is the convergence measure.
double expected_reduction(const GainSchedule& gains, double alpha);

/// Mode-matched reference lookup. Each hybrid segment of the reference is
/// extended past both ends by integrating its own mode's dynamics under the
/// boundary input, with gains held constant; rollouts whose transition
/// count exceeds the reference's hold the terminal state and gains.
class ExtendedReference {
 public:
  struct Entry {
    Vec x_ref;
    Vec u_ref;
    Mat feedback;
    Vec feedforward;
  };

  static ExtendedReference build(const HybridSystem& sys,
                                 const Trajectory& traj,
                                 const GainSchedule& gains,
                                 const IntegratorConfig& icfg, bool enabled);

  /// k: timestep, ordinal: hybrid segment index of the querying rollout
  /// (number of transitions taken so far), mode: its current mode.
  Entry lookup(int k, int ordinal, ModeId mode) const;

  int num_segments() const { return static_cast<int>(segments_.size()); }

 private:
  struct Segment {
    ModeId mode = 0;
    int first_state = 0;
    int last_state = 0;  // first_state > last_state for zero-length segments
    std::vector<Vec> ref_states;  // N + 1, extensions filled outside range
    int gain_lo = 0;
    int gain_hi = 0;
  };

  bool enabled_ = true;
  const Trajectory* traj_ = nullptr;
  const GainSchedule* gains_ = nullptr;
  std::vector<Segment> segments_;
};

/// Closed-loop hybrid rollout of u = u_ref + alpha*uff + K(x - x_ref) with
/// mode-matched reference entries (the extension carries the gains it was
/// built from).
Trajectory forward_pass(const HybridSystem& sys, const Trajectory& reference,
                        const ExtendedReference& extension, double alpha,
                        const CostModel& cost, const IntegratorConfig& icfg);

struct SolveResult {
  Trajectory trajectory;
  GainSchedule gains;
  SolveStats stats;
};

/// Full optimization loop: rollout, then backward pass / reference
/// extension / line-searched forward pass until |dJ(1)| falls below the
/// convergence tolerance or the iteration budget runs out.
SolveResult solve(const HybridSystem& sys, const Vec& x0, ModeId mode0,
                  const std::vector<Vec>& u_seed, double dt,
                  const CostModel& cost, const SolverConfig& scfg,
                  const IntegratorConfig& icfg);

}  // namespace hilqr
