#include "hilqr/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hilqr {
namespace {

// Dormand-Prince 4(5) pair with quartic dense output.
constexpr int kStages = 7;

constexpr double kC[kStages] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};

constexpr double kA[kStages][kStages - 1] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};

// Difference between the 5th- and 4th-order weights.
constexpr double kErr[kStages] = {
    71.0 / 57600,  0.0, -71.0 / 16695, 71.0 / 1920,
    -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

// Dense-output interpolation weights: y(t0 + theta*h) =
//   y0 + h * sum_s k_s * sum_j P[s][j] * theta^(j+1).
constexpr double kP[kStages][4] = {
    {1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0},
    {0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0},
    {0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0},
    {0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0},
    {0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0},
};

struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  Vec y0;
  Mat q;  // n x 4 interpolation coefficients

  Vec eval(double t) const {
    const double theta = (t - t0) / h;
    Eigen::Vector4d powers(theta, theta * theta, theta * theta * theta,
                           theta * theta * theta * theta);
    return y0 + h * (q * powers);
  }
};

// One accepted embedded RK step with error control. h_want carries the
// desired signed step on entry and the suggestion for the next step on exit.
template <typename Field>
DenseSegment advance(const Field& f, double t, const Vec& y, double& h_want,
                     const IntegratorConfig& cfg) {
  const int n = static_cast<int>(y.size());
  const double dir = h_want >= 0.0 ? 1.0 : -1.0;
  double h = h_want;
  Mat k(n, kStages);

  for (;;) {
    if (std::abs(h) < cfg.min_step) {
      throw StepUnderflow("integration step underflow at t=" +
                          std::to_string(t));
    }
    k.col(0) = f(t, y);
    Vec stage(n);
    for (int s = 1; s < kStages; ++s) {
      stage = y;
      for (int j = 0; j < s; ++j) stage += (h * kA[s][j]) * k.col(j);
      k.col(s) = f(t + kC[s] * h, stage);
    }
    // FSAL: stage 7 already evaluated the 5th-order solution point.
    Vec y1 = y;
    for (int j = 0; j < kStages - 1; ++j) y1 += (h * kA[6][j]) * k.col(j);

    double err_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = 0.0;
      for (int s = 0; s < kStages; ++s) e += kErr[s] * k(i, s);
      e *= h;
      const double scale =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y1[i]));
      err_sq += (e / scale) * (e / scale);
    }
    const double err = std::sqrt(err_sq / n);

    if (!std::isfinite(err)) {
      h *= 0.5;
      continue;
    }
    if (err <= 1.0) {
      const double grow =
          err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
      DenseSegment seg;
      seg.t0 = t;
      seg.h = h;
      seg.y0 = y;
      seg.q = Mat::Zero(n, 4);
      for (int s = 0; s < kStages; ++s) {
        for (int j = 0; j < 4; ++j) {
          if (kP[s][j] != 0.0) seg.q.col(j) += kP[s][j] * k.col(s);
        }
      }
      h_want = dir * std::abs(h) * grow;
      return seg;
    }
    h = dir * std::abs(h) * std::max(0.2, 0.9 * std::pow(err, -0.2));
  }
}

}  // namespace

std::pair<double, Vec> locate_event(const Interpolant& interp, double t_lo,
                                    double t_hi, const Transition& tr,
                                    const Vec& u, const IntegratorConfig& cfg) {
  double a = t_lo;
  double b = t_hi;
  double ga = tr.guard(a, interp(a), u);
  double gb = tr.guard(b, interp(b), u);
  if (!(ga > 0.0) || !(gb <= 0.0)) {
    throw NoBracket("locate_event: guard '" + tr.name +
                    "' has no decreasing sign change on the bracket");
  }

  for (int it = 0; it < 200; ++it) {
    if (std::abs(gb) <= cfg.event_tol || (b - a) < 1e-12) break;
    // Secant estimate on even iterations, bisection otherwise so the
    // bracket is guaranteed to shrink.
    double t_mid = 0.5 * (a + b);
    if (it % 2 == 0) {
      const double t_sec = b - gb * (b - a) / (gb - ga);
      if (t_sec > a && t_sec < b) t_mid = t_sec;
    }
    const double gm = tr.guard(t_mid, interp(t_mid), u);
    if (gm > 0.0) {
      a = t_mid;
      ga = gm;
    } else {
      b = t_mid;
      gb = gm;
    }
  }
  // Report the guard-side endpoint so the event state satisfies g <= 0.
  return {b, interp(b)};
}

namespace {

// Guards already inside their sublevel set only fire when still flowing
// inward at a meaningful rate; constraint drift after identity resets sits
// around 1e-9 and must not retrigger.
constexpr double kMinCrossingRate = 1e-6;

// Fires transitions whose guard is already met at the current point and
// still decreasing along the flow. Returns after no guard fires.
void fire_pending(const HybridSystem& sys, double t, Vec& x, ModeId& mode,
                  const Vec& u, const IntegratorConfig& cfg,
                  std::vector<TransitionEvent>& events) {
  for (;;) {
    bool fired = false;
    for (int tr_index : sys.transitions_from(mode)) {
      const double g = sys.guard_value(tr_index, t, x, u);
      if (g <= cfg.event_tol &&
          sys.guard_flow_rate(tr_index, t, x, u) < -kMinCrossingRate) {
        TransitionEvent ev;
        ev.transition_index = tr_index;
        ev.t_event = t;
        ev.x_pre = x;
        ev.u = u;
        ev.x_post = sys.apply_reset(tr_index, t, x, u);
        events.push_back(ev);
        if (static_cast<int>(events.size()) > cfg.max_events_per_step) {
          throw ZenoCap("event count exceeded max_events_per_step");
        }
        x = ev.x_post;
        mode = sys.transition(tr_index).to;
        fired = true;
        break;
      }
    }
    if (!fired) return;
  }
}

struct Crossing {
  int transition_index = -1;
  double t_event = 0.0;
  Vec x_pre;
};

// Scans one dense segment for the earliest decreasing guard crossing among
// the mode's outgoing transitions. Interior samples catch crossings that
// return to positive before the segment end.
bool find_earliest_crossing(const HybridSystem& sys, ModeId mode,
                            const DenseSegment& seg, const Vec& u,
                            const IntegratorConfig& cfg, Crossing& out,
                            bool& simultaneous) {
  constexpr int kSamples = 5;
  Interpolant interp = [&seg](double t) { return seg.eval(t); };

  bool found = false;
  double best_t = 0.0;
  double best_rate = 0.0;
  for (int tr_index : sys.transitions_from(mode)) {
    const Transition& tr = sys.transition(tr_index);
    double t_prev = seg.t0;
    double g_prev = tr.guard(t_prev, seg.y0, u);
    for (int i = 1; i < kSamples; ++i) {
      const double t_i = seg.t0 + seg.h * static_cast<double>(i) / (kSamples - 1);
      const double g_i = tr.guard(t_i, seg.eval(t_i), u);
      if (g_prev > 0.0 && g_i <= 0.0) {
        auto [t_e, x_e] = locate_event(interp, t_prev, t_i, tr, u, cfg);
        if (!found || t_e < best_t - 1e-12) {
          found = true;
          best_t = t_e;
          best_rate = std::abs(sys.guard_flow_rate(tr_index, t_e, x_e, u));
          out.transition_index = tr_index;
          out.t_event = t_e;
          out.x_pre = x_e;
        } else if (std::abs(t_e - best_t) < 1e-12) {
          simultaneous = true;
          const double rate = std::abs(sys.guard_flow_rate(tr_index, t_e, x_e, u));
          if (rate > best_rate) {
            best_t = t_e;
            best_rate = rate;
            out.transition_index = tr_index;
            out.t_event = t_e;
            out.x_pre = x_e;
          }
        }
        break;
      }
      t_prev = t_i;
      g_prev = g_i;
    }
  }
  return found;
}

}  // namespace

StepResult step(const HybridSystem& sys, const HybridState& state, const Vec& u,
                double dt, const IntegratorConfig& cfg) {
  if (dt <= 0.0) throw ConfigError("step: dt must be positive");
  if (!state.x.allFinite() || !u.allFinite()) {
    throw NumericalError("step: non-finite state or input");
  }

  StepResult result;
  double t = state.t;
  const double t_target = state.t + dt;
  Vec x = state.x;
  ModeId mode = state.mode;

  fire_pending(sys, t, x, mode, u, cfg, result.events);

  double h = dt;
  const double t_eps = 1e-14 * std::max(1.0, std::abs(t_target));
  while (t < t_target - t_eps) {
    h = std::min(h, t_target - t);
    const ModeId mode_now = mode;
    auto field = [&sys, mode_now, &u](double tt, const Vec& xx) {
      return sys.eval_field(mode_now, tt, xx, u);
    };
    DenseSegment seg = advance(field, t, x, h, cfg);

    Crossing crossing;
    if (find_earliest_crossing(sys, mode, seg, u, cfg, crossing,
                               result.simultaneous_guards)) {
      TransitionEvent ev;
      ev.transition_index = crossing.transition_index;
      ev.t_event = crossing.t_event;
      ev.x_pre = crossing.x_pre;
      ev.u = u;
      ev.x_post = sys.apply_reset(crossing.transition_index, crossing.t_event,
                                  crossing.x_pre, u);
      result.events.push_back(ev);
      if (static_cast<int>(result.events.size()) > cfg.max_events_per_step) {
        throw ZenoCap("event count exceeded max_events_per_step");
      }
      t = crossing.t_event;
      x = ev.x_post;
      mode = sys.transition(crossing.transition_index).to;
      fire_pending(sys, t, x, mode, u, cfg, result.events);
      h = dt;  // fresh suggestion in the new mode
    } else {
      t = seg.t0 + seg.h;
      x = seg.eval(t);
    }
    if (!x.allFinite()) {
      throw NumericalError("step: non-finite state at t=" + std::to_string(t));
    }
  }

  result.x_next = x;
  result.mode_next = mode;
  return result;
}

Vec integrate_smooth(const HybridSystem& sys, ModeId mode, double t0,
                     const Vec& x0, const Vec& u, double t1,
                     const IntegratorConfig& cfg) {
  if (t1 == t0) return x0;
  double t = t0;
  Vec x = x0;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  double h = t1 - t0;
  auto field = [&sys, mode, &u](double tt, const Vec& xx) {
    return sys.eval_field(mode, tt, xx, u);
  };
  const double t_eps = 1e-14 * std::max(1.0, std::abs(t1));
  while (dir * (t1 - t) > t_eps) {
    if (dir * h > dir * (t1 - t)) h = t1 - t;
    DenseSegment seg = advance(field, t, x, h, cfg);
    t = seg.t0 + seg.h;
    x = seg.eval(t);
  }
  return x;
}

}  // namespace hilqr
