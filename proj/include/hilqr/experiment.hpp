#pragma once

#include <string>
#include <vector>

#include "hilqr/ilqr.hpp"
#include "hilqr/systems.hpp"

namespace hilqr {

/// How the seed input sequence is synthesized.
struct SeedPolicy {
  enum class Kind {
    ZeroInput,
    ConstantForce,
    BounceCount,
    ImpulseWindow,
    QuadcopterThrust,
  };
  Kind kind = Kind::ZeroInput;
  Vec force;                       // ConstantForce and ImpulseWindow
  int count = 0;                   // BounceCount target impacts
  double t_start = 0.0;            // ImpulseWindow bounds, seconds
  double t_end = 0.0;
  double initial_thrust_mg = 1.5;  // QuadcopterThrust, in units of m*g
  double contact_thrust_mg = 0.1;
};

/// A solver method to compare: gradient variant plus whether reference
/// extensions are applied on mode mismatch.
struct Method {
  GradientVariant variant = GradientVariant::Saltation;
  bool use_extension = true;
};

std::string method_name(const Method& method);
Method method_from_name(const std::string& name);

/// One experiment: system, problem data, seed policy, methods to run, and
/// solver/integrator settings. Loading a config materializes every default
/// so serialized snapshots are self-contained.
struct ExperimentConfig {
  std::string name;
  std::string system_name;
  SystemParams params;

  Vec x0;
  ModeId mode0 = 0;
  Vec x_des;
  int horizon = 0;
  double dt = 0.0;

  Mat q_terminal;
  Mat r_input;
  Mat q_run;  // empty means zero

  SeedPolicy seed;
  std::vector<Method> methods;
  SolverConfig solver;
  IntegratorConfig integrator;

  // Optional display metadata for comparison tables.
  std::string table_optimal;
  std::string table_seed;
};

struct EventSummary {
  double t = 0.0;
  std::string name;
  TransitionKind kind = TransitionKind::Other;
  ModeId from = 0;
  ModeId to = 0;
};

/// Outcome of one (experiment, method) run, embedding the full config
/// snapshot needed to reproduce it.
struct RunRecord {
  ExperimentConfig config;
  Method method;

  // Seed resolution (what the policy chose).
  Vec resolved_force;       // BounceCount / ConstantForce
  int quad_switch_step = -1;  // QuadcopterThrust contact step

  double final_cost = 0.0;
  bool converged = false;
  double dj_final = 0.0;
  int iterations = 0;
  std::vector<double> cost_trace;
  std::vector<double> dj_trace;
  std::vector<int> event_count_trace;
  std::vector<EventSummary> events;
  int impact_count = 0;
  int liftoff_count = 0;
  Vec final_state;
  double wall_time_s = 0.0;
  std::string error;  // solver/integrator failure; empty on clean runs
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);

/// Synthesizes the N seed inputs for a policy. BounceCount searches
/// constant forces with full rollouts as the oracle until the rollout
/// shows exactly the requested number of impacts.
std::vector<Vec> seed_inputs(const SeedPolicy& policy,
                             const BenchmarkSystem& bench,
                             const ExperimentConfig& config,
                             Vec* resolved_force = nullptr,
                             int* quad_switch_step = nullptr);

/// Runs every configured method on one experiment; both variants consume
/// the identical seed sequence. Solver failures are recorded, not thrown.
/// When out_dir is nonempty, run records and trajectory dumps are written
/// there atomically.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const std::string& out_dir = "");

std::string run_record_to_json_text(const RunRecord& record);
void write_run_record(const RunRecord& record, const std::string& path);

/// Reads the config snapshot and method back out of a run record file.
std::pair<ExperimentConfig, Method> config_from_record_file(
    const std::string& path);

/// Writes one row per timestep (t, state, input, mode) plus an event
/// sidecar file; both carry a format version line and round-trip at full
/// precision.
void dump_trajectory(const Trajectory& traj, const HybridSystem& sys,
                     const std::string& csv_path,
                     const std::string& events_path);

struct TableRow {
  std::string optimal;
  std::string seed;
  std::string method;
  std::string actual;
  std::string cost;
  std::string converged;
};

TableRow record_to_row(const RunRecord& record);

/// Writes CSV and aligned-text comparison tables; empty cells render "-".
void emit_table(const std::vector<RunRecord>& records,
                const std::vector<TableRow>& external_rows,
                const std::string& csv_path, const std::string& txt_path);

}  // namespace hilqr
