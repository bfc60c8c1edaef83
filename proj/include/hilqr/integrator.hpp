#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "hilqr/hybrid_system.hpp"
#include "hilqr/types.hpp"

namespace hilqr {

/// Tolerances and caps for the adaptive hybrid stepper.
struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double event_tol = 1e-10;     // |g| at localized events
  int max_events_per_step = 8;  // Zeno cap per timestep
  double min_step = 1e-12;      // smallest internal step, seconds
};

/// Outcome of advancing one timestep through the hybrid dynamics.
struct StepResult {
  Vec x_next;
  ModeId mode_next = 0;
  std::vector<TransitionEvent> events;
  // Set when two guards crossed within the same localized time window and
  // the steeper one was processed first.
  bool simultaneous_guards = false;
};

/// Continuous interpolant over one accepted integrator step.
using Interpolant = std::function<Vec(double)>;

/// Localizes a decreasing guard crossing on [t_lo, t_hi], where
/// g(t_lo) > 0 and g(t_hi) <= 0. Bisection refined with secant steps until
/// |g| <= event_tol or the bracket shrinks below 1e-12 s.
std::pair<double, Vec> locate_event(const Interpolant& interp, double t_lo,
                                    double t_hi, const Transition& tr,
                                    const Vec& u, const IntegratorConfig& cfg);

/// Integrates one zero-order-hold timestep of duration dt with event
/// detection: on each guard crossing the event is localized, the reset
/// applied, and integration continues in the target mode until t + dt.
StepResult step(const HybridSystem& sys, const HybridState& state,
                const Vec& u, double dt, const IntegratorConfig& cfg);

/// Smooth adaptive integration of a single mode's field from t0 to t1,
/// guards ignored. t1 < t0 integrates backward.
Vec integrate_smooth(const HybridSystem& sys, ModeId mode, double t0,
                     const Vec& x0, const Vec& u, double t1,
                     const IntegratorConfig& cfg);

}  // namespace hilqr
