#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hilqr/hybrid_system.hpp"
#include "hilqr/mechanics.hpp"
#include "hilqr/types.hpp"

namespace hilqr {

/// A benchmark system bundled with its canonical experiment data.
struct BenchmarkSystem {
  std::string name;
  HybridSystem system;

  Vec x0;
  ModeId mode0 = 0;
  Vec x_des;
  int horizon = 1000;
  double dt = 1e-3;
  Mat q_terminal;
  Mat r_input;

  // Present for constraint-based systems; mode_active[m] lists the
  // constraint indices active in mode m.
  std::shared_ptr<const MechanicalModel> mechanics;
  std::vector<std::vector<int>> mode_active;
};

/// Free parameters the benchmarks leave open.
struct SystemParams {
  double restitution = 0.8;  // bouncing ball
  double friction = 0.5;     // quadcopter
};

/// 1D ball under gravity with elastic impacts; descent and ascent modes
/// with an apex transition between them.
BenchmarkSystem make_bouncing_ball(double restitution);

/// 1D ball on spring-damper ground: aerial, compression (spring + damper),
/// and release (spring only) modes, all resets identity.
BenchmarkSystem make_spring_damper_ball();

/// Actuated planar ball dropped inside a circular tube, plastic impact on
/// the wall, liftoff when the contact force crosses zero.
BenchmarkSystem make_circle_drop();

/// Planar quadcopter perching on a circular wall with sliding friction;
/// double contact latches and is absorbing.
BenchmarkSystem make_quadcopter(double friction);

/// Name-keyed constructor table used by experiment configs.
BenchmarkSystem make_system(const std::string& name,
                            const SystemParams& params);
std::vector<std::string> registered_systems();

inline constexpr double kGravity = 9.8;

}  // namespace hilqr
