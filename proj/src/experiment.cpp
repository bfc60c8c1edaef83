#include "hilqr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hilqr {
namespace {

using nlohmann::json;

std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec json_to_vec(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

// Accepts a scalar (s * I), a vector (diagonal), or a full row matrix.
Mat json_to_mat(const json& j, int dim) {
  if (j.is_number()) {
    return j.get<double>() * Mat::Identity(dim, dim);
  }
  if (j.is_array() && !j.empty() && j[0].is_number()) {
    Mat m = Mat::Zero(j.size(), j.size());
    for (size_t i = 0; i < j.size(); ++i) m(i, i) = j[i].get<double>();
    return m;
  }
  Mat m(j.size(), j.empty() ? 0 : j[0].size());
  for (size_t i = 0; i < j.size(); ++i) {
    for (size_t c = 0; c < j[i].size(); ++c) {
      m(static_cast<int>(i), static_cast<int>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

std::string seed_kind_name(SeedPolicy::Kind kind) {
  switch (kind) {
    case SeedPolicy::Kind::ZeroInput: return "zero_input";
    case SeedPolicy::Kind::ConstantForce: return "constant_force";
    case SeedPolicy::Kind::BounceCount: return "bounce_count";
    case SeedPolicy::Kind::ImpulseWindow: return "impulse_window";
    case SeedPolicy::Kind::QuadcopterThrust: return "quadcopter_thrust";
  }
  return "zero_input";
}

SeedPolicy::Kind seed_kind_from_name(const std::string& name) {
  if (name == "zero_input") return SeedPolicy::Kind::ZeroInput;
  if (name == "constant_force") return SeedPolicy::Kind::ConstantForce;
  if (name == "bounce_count") return SeedPolicy::Kind::BounceCount;
  if (name == "impulse_window") return SeedPolicy::Kind::ImpulseWindow;
  if (name == "quadcopter_thrust") return SeedPolicy::Kind::QuadcopterThrust;
  throw ConfigError("unknown seed policy '" + name + "'");
}

std::string kind_name(TransitionKind kind) {
  switch (kind) {
    case TransitionKind::Impact: return "impact";
    case TransitionKind::Liftoff: return "liftoff";
    case TransitionKind::Other: return "other";
  }
  return "other";
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + tmp + "' for writing");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string method_name(const Method& method) {
  std::string base = method.variant == GradientVariant::Saltation
                         ? "saltation"
                         : "reset-jacobian";
  if (!method.use_extension) base += "-no-extension";
  return base;
}

Method method_from_name(const std::string& name) {
  Method m;
  std::string base = name;
  const std::string suffix = "-no-extension";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    m.use_extension = false;
    base = base.substr(0, base.size() - suffix.size());
  }
  if (base == "saltation") {
    m.variant = GradientVariant::Saltation;
  } else if (base == "reset-jacobian") {
    m.variant = GradientVariant::ResetJacobian;
  } else {
    throw ConfigError("unknown method '" + name + "'");
  }
  return m;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;

  cfg.name = j.value("name", "experiment");
  const json& sys = j.at("system");
  cfg.system_name = sys.at("name").get<std::string>();
  cfg.params.restitution = sys.value("restitution", 0.8);
  cfg.params.friction = sys.value("friction", 0.5);

  const BenchmarkSystem bench = make_system(cfg.system_name, cfg.params);
  const int n = bench.system.state_dim();
  const int m = bench.system.input_dim();

  cfg.x0 = j.contains("x0") ? json_to_vec(j["x0"]) : bench.x0;
  cfg.mode0 = j.value("mode0", bench.mode0);
  cfg.x_des = j.contains("x_des") ? json_to_vec(j["x_des"]) : bench.x_des;
  cfg.horizon = j.value("horizon", bench.horizon);
  cfg.dt = j.value("dt", bench.dt);
  if (cfg.horizon < 0 || !(cfg.horizon * cfg.dt >= 0.0) ||
      (cfg.horizon > 0 && cfg.dt <= 0.0)) {
    throw ConfigError("config: horizon*dt must be positive");
  }
  if (cfg.x0.size() != n || cfg.x_des.size() != n) {
    throw ConfigError("config: state dimension mismatch");
  }

  const json cost = j.value("cost", json::object());
  cfg.q_terminal = cost.contains("q_terminal")
                       ? json_to_mat(cost["q_terminal"], n)
                       : bench.q_terminal;
  cfg.r_input =
      cost.contains("r_input") ? json_to_mat(cost["r_input"], m) : bench.r_input;
  if (cost.contains("q_run")) cfg.q_run = json_to_mat(cost["q_run"], n);

  const json seed = j.value("seed", json::object());
  cfg.seed.kind = seed_kind_from_name(seed.value("policy", "zero_input"));
  if (seed.contains("force")) cfg.seed.force = json_to_vec(seed["force"]);
  cfg.seed.count = seed.value("count", 0);
  cfg.seed.t_start = seed.value("t_start", 0.0);
  cfg.seed.t_end = seed.value("t_end", 0.0);
  cfg.seed.initial_thrust_mg = seed.value("initial_thrust_mg", 1.5);
  cfg.seed.contact_thrust_mg = seed.value("contact_thrust_mg", 0.1);

  if (j.contains("methods")) {
    for (const auto& name : j["methods"]) {
      cfg.methods.push_back(method_from_name(name.get<std::string>()));
    }
  } else {
    cfg.methods = {{GradientVariant::Saltation, true},
                   {GradientVariant::ResetJacobian, true}};
  }

  const json solver = j.value("solver", json::object());
  cfg.solver.max_iterations = solver.value("max_iterations", cfg.solver.max_iterations);
  cfg.solver.convergence_tol = solver.value("convergence_tol", cfg.solver.convergence_tol);
  cfg.solver.reg_init = solver.value("reg_init", cfg.solver.reg_init);
  cfg.solver.reg_min = solver.value("reg_min", cfg.solver.reg_min);
  cfg.solver.reg_max = solver.value("reg_max", cfg.solver.reg_max);
  cfg.solver.reg_up = solver.value("reg_up", cfg.solver.reg_up);
  cfg.solver.reg_down = solver.value("reg_down", cfg.solver.reg_down);
  cfg.solver.accept_ratio = solver.value("accept_ratio", cfg.solver.accept_ratio);
  cfg.solver.fd_eps = solver.value("fd_eps", cfg.solver.fd_eps);
  cfg.solver.transversality_tol =
      solver.value("transversality_tol", cfg.solver.transversality_tol);
  if (solver.contains("alpha_schedule")) {
    cfg.solver.alpha_schedule.clear();
    for (const auto& a : solver["alpha_schedule"]) {
      cfg.solver.alpha_schedule.push_back(a.get<double>());
    }
  } else {
    cfg.solver.alpha_schedule = cfg.solver.alphas();
  }

  const json integ = j.value("integrator", json::object());
  cfg.integrator.rel_tol = integ.value("rel_tol", cfg.integrator.rel_tol);
  cfg.integrator.abs_tol = integ.value("abs_tol", cfg.integrator.abs_tol);
  cfg.integrator.event_tol = integ.value("event_tol", cfg.integrator.event_tol);
  cfg.integrator.max_events_per_step =
      integ.value("max_events_per_step", cfg.integrator.max_events_per_step);
  cfg.integrator.min_step = integ.value("min_step", cfg.integrator.min_step);

  const json table = j.value("table", json::object());
  cfg.table_optimal = table.value("optimal", "");
  cfg.table_seed = table.value("seed", "");
  return cfg;
}

namespace {

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["format_version"] = 1;
  j["name"] = cfg.name;
  j["system"] = {{"name", cfg.system_name},
                 {"restitution", cfg.params.restitution},
                 {"friction", cfg.params.friction}};
  j["x0"] = vec_to_json(cfg.x0);
  j["mode0"] = cfg.mode0;
  j["x_des"] = vec_to_json(cfg.x_des);
  j["horizon"] = cfg.horizon;
  j["dt"] = cfg.dt;
  j["cost"] = {{"q_terminal", mat_to_json(cfg.q_terminal)},
               {"r_input", mat_to_json(cfg.r_input)}};
  if (cfg.q_run.size() > 0) j["cost"]["q_run"] = mat_to_json(cfg.q_run);

  json seed;
  seed["policy"] = seed_kind_name(cfg.seed.kind);
  if (cfg.seed.force.size() > 0) seed["force"] = vec_to_json(cfg.seed.force);
  seed["count"] = cfg.seed.count;
  seed["t_start"] = cfg.seed.t_start;
  seed["t_end"] = cfg.seed.t_end;
  seed["initial_thrust_mg"] = cfg.seed.initial_thrust_mg;
  seed["contact_thrust_mg"] = cfg.seed.contact_thrust_mg;
  j["seed"] = seed;

  json methods = json::array();
  for (const auto& method : cfg.methods) methods.push_back(method_name(method));
  j["methods"] = methods;

  j["solver"] = {{"max_iterations", cfg.solver.max_iterations},
                 {"convergence_tol", cfg.solver.convergence_tol},
                 {"reg_init", cfg.solver.reg_init},
                 {"reg_min", cfg.solver.reg_min},
                 {"reg_max", cfg.solver.reg_max},
                 {"reg_up", cfg.solver.reg_up},
                 {"reg_down", cfg.solver.reg_down},
                 {"accept_ratio", cfg.solver.accept_ratio},
                 {"fd_eps", cfg.solver.fd_eps},
                 {"transversality_tol", cfg.solver.transversality_tol},
                 {"alpha_schedule", cfg.solver.alphas()}};
  j["integrator"] = {{"rel_tol", cfg.integrator.rel_tol},
                     {"abs_tol", cfg.integrator.abs_tol},
                     {"event_tol", cfg.integrator.event_tol},
                     {"max_events_per_step", cfg.integrator.max_events_per_step},
                     {"min_step", cfg.integrator.min_step}};
  if (!cfg.table_optimal.empty() || !cfg.table_seed.empty()) {
    j["table"] = {{"optimal", cfg.table_optimal}, {"seed", cfg.table_seed}};
  }
  return j;
}

}  // namespace

std::string config_to_json_text(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = config_from_json_text(buf.str());
  if (cfg.name == "experiment") {
    cfg.name = std::filesystem::path(path).stem().string();
  }
  return cfg;
}

namespace {

int count_impacts_for_force(const BenchmarkSystem& bench,
                            const ExperimentConfig& cfg, double force) {
  const std::vector<Vec> inputs(cfg.horizon, Vec::Constant(1, force));
  CostModel cost;  // cost irrelevant to the impact count
  cost.q_terminal = Mat::Zero(cfg.x0.size(), cfg.x0.size());
  cost.x_des = cfg.x_des;
  cost.r_input = Mat::Identity(1, 1);
  try {
    const Trajectory traj = rollout(bench.system, cfg.x0, cfg.mode0, inputs,
                                    cfg.dt, cost, cfg.integrator);
    return traj.count_events(TransitionKind::Impact, bench.system);
  } catch (const ZenoCap&) {
    // Bounce cascade collapsed within one timestep: over any finite target.
    return cfg.integrator.max_events_per_step * cfg.horizon;
  }
}

// Constant seed force whose rollout shows exactly `target` impacts: scan a
// force grid, then bisect both edges of the widest matching run and take
// its midpoint (edge forces graze the guard and make poor seeds). Downward
// (negative) forces compress the bounce sequence when the horizon is short.
double search_bounce_force(const BenchmarkSystem& bench,
                           const ExperimentConfig& cfg, int target) {
  if (bench.system.input_dim() != 1) {
    throw ConfigError("bounce_count seed requires a scalar-input system");
  }

  // Supporting forces in [0, mg] give the gentlest seeds; downward forces
  // compress the bounce sequence and are scanned only when the supported
  // range cannot reach the target on this horizon.
  const auto scan = [&](double lo, double hi, int grid, int& run_lo,
                        int& run_hi, std::vector<double>& force) {
    force.resize(grid);
    std::vector<int> count(grid);
    for (int i = 0; i < grid; ++i) {
      force[i] = lo + (hi - lo) * i / (grid - 1);
      count[i] = count_impacts_for_force(bench, cfg, force[i]);
    }
    run_lo = run_hi = -1;
    for (int i = 0; i < grid;) {
      if (count[i] != target) {
        ++i;
        continue;
      }
      int j = i;
      while (j + 1 < grid && count[j + 1] == target) ++j;
      if (run_lo < 0 || j - i > run_hi - run_lo) {
        run_lo = i;
        run_hi = j;
      }
      i = j + 1;
    }
    return run_lo >= 0;
  };

  std::vector<double> force;
  int best_lo = -1, best_hi = -1;
  if (!scan(0.0, kGravity, 65, best_lo, best_hi, force) &&
      !scan(-20.0 * kGravity, 0.0, 129, best_lo, best_hi, force)) {
    throw ConfigError("bounce_count: no constant force yields " +
                      std::to_string(target) + " impacts on this horizon");
  }

  auto refine = [&](double inside, double outside) {
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (count_impacts_for_force(bench, cfg, mid) == target) {
        inside = mid;
      } else {
        outside = mid;
      }
    }
    return inside;
  };
  const int grid = static_cast<int>(force.size());
  double left = force[best_lo];
  double right = force[best_hi];
  if (best_lo > 0) left = refine(force[best_lo], force[best_lo - 1]);
  if (best_hi + 1 < grid) right = refine(force[best_hi], force[best_hi + 1]);
  return 0.5 * (left + right);
}

std::vector<Vec> quadcopter_thrust_seed(const SeedPolicy& policy,
                                        const BenchmarkSystem& bench,
                                        const ExperimentConfig& cfg,
                                        int* switch_step) {
  const double high = policy.initial_thrust_mg * kGravity;
  const double low = policy.contact_thrust_mg * kGravity;
  const ModeId latched = 3;

  std::vector<Vec> inputs;
  inputs.reserve(cfg.horizon);
  Vec x = cfg.x0;
  ModeId mode = cfg.mode0;
  if (switch_step) *switch_step = -1;
  for (int k = 0; k < cfg.horizon; ++k) {
    const double total = mode == latched ? low : high;
    if (mode == latched && switch_step && *switch_step < 0) *switch_step = k;
    inputs.push_back(Vec::Constant(2, 0.5 * total));
    const StepResult res = step(bench.system, {mode, x, cfg.dt * k},
                                inputs.back(), cfg.dt, cfg.integrator);
    x = res.x_next;
    mode = res.mode_next;
  }
  return inputs;
}

}  // namespace

std::vector<Vec> seed_inputs(const SeedPolicy& policy,
                             const BenchmarkSystem& bench,
                             const ExperimentConfig& cfg, Vec* resolved_force,
                             int* quad_switch_step) {
  const int m = bench.system.input_dim();
  if (resolved_force) *resolved_force = Vec();
  if (quad_switch_step) *quad_switch_step = -1;

  switch (policy.kind) {
    case SeedPolicy::Kind::ZeroInput:
      return std::vector<Vec>(cfg.horizon, Vec::Zero(m));
    case SeedPolicy::Kind::ConstantForce: {
      if (policy.force.size() != m) {
        throw ConfigError("constant_force seed: force dimension mismatch");
      }
      if (resolved_force) *resolved_force = policy.force;
      return std::vector<Vec>(cfg.horizon, policy.force);
    }
    case SeedPolicy::Kind::BounceCount: {
      const double force = search_bounce_force(bench, cfg, policy.count);
      if (resolved_force) *resolved_force = Vec::Constant(1, force);
      return std::vector<Vec>(cfg.horizon, Vec::Constant(1, force));
    }
    case SeedPolicy::Kind::ImpulseWindow: {
      if (policy.force.size() != m) {
        throw ConfigError("impulse_window seed: force dimension mismatch");
      }
      std::vector<Vec> inputs(cfg.horizon, Vec::Zero(m));
      for (int k = 0; k < cfg.horizon; ++k) {
        const double t = cfg.dt * k;
        if (t >= policy.t_start && t < policy.t_end) inputs[k] = policy.force;
      }
      if (resolved_force) *resolved_force = policy.force;
      return inputs;
    }
    case SeedPolicy::Kind::QuadcopterThrust:
      return quadcopter_thrust_seed(policy, bench, cfg, quad_switch_step);
  }
  throw ConfigError("unhandled seed policy");
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const std::string& out_dir) {
  const BenchmarkSystem bench = make_system(config.system_name, config.params);

  Vec resolved_force;
  int quad_switch = -1;
  const std::vector<Vec> seeds =
      seed_inputs(config.seed, bench, config, &resolved_force, &quad_switch);

  CostModel cost;
  cost.q_terminal = config.q_terminal;
  cost.x_des = config.x_des;
  cost.r_input = config.r_input;
  cost.q_run = config.q_run;

  std::vector<RunRecord> records;
  for (const Method& method : config.methods) {
    RunRecord rec;
    rec.config = config;
    rec.method = method;
    rec.resolved_force = resolved_force;
    rec.quad_switch_step = quad_switch;

    SolverConfig scfg = config.solver;
    scfg.variant = method.variant;
    scfg.use_reference_extension = method.use_extension;

    const auto t_begin = std::chrono::steady_clock::now();
    SolveResult solved;
    try {
      solved = solve(bench.system, config.x0, config.mode0, seeds, config.dt,
                     cost, scfg, config.integrator);
    } catch (const std::exception& err) {
      rec.error = err.what();
      records.push_back(std::move(rec));
      continue;
    }
    rec.wall_time_s = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t_begin)
                          .count();

    const Trajectory& traj = solved.trajectory;
    rec.final_cost = traj.cost;
    rec.converged = solved.stats.converged;
    rec.dj_final =
        solved.stats.dj_trace.empty() ? 0.0 : solved.stats.dj_trace.back();
    rec.iterations = solved.stats.iterations;
    rec.cost_trace = solved.stats.cost_trace;
    rec.dj_trace = solved.stats.dj_trace;
    rec.event_count_trace = solved.stats.event_count_trace;
    rec.error = solved.stats.error;
    rec.final_state = traj.states.back();
    for (const auto& ev : traj.events) {
      const Transition& tr = bench.system.transition(ev.transition_index);
      rec.events.push_back({ev.t_event, tr.name, tr.kind, tr.from, tr.to});
      if (tr.kind == TransitionKind::Impact) ++rec.impact_count;
      if (tr.kind == TransitionKind::Liftoff) ++rec.liftoff_count;
    }

    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      const std::string base =
          out_dir + "/" + config.name + "." + method_name(method);
      write_run_record(rec, base + ".record.json");
      dump_trajectory(traj, bench.system, base + ".traj.csv",
                      base + ".events.csv");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string run_record_to_json_text(const RunRecord& rec) {
  json j;
  j["format_version"] = 1;
  j["experiment"] = rec.config.name;
  j["method"] = method_name(rec.method);
  j["config"] = config_to_json(rec.config);

  json seed;
  if (rec.resolved_force.size() > 0) {
    seed["resolved_force"] = vec_to_json(rec.resolved_force);
  }
  if (rec.quad_switch_step >= 0) seed["quad_switch_step"] = rec.quad_switch_step;
  j["seed_resolution"] = seed;

  json result;
  result["final_cost"] = rec.final_cost;
  result["converged"] = rec.converged;
  result["dj_final"] = rec.dj_final;
  result["iterations"] = rec.iterations;
  result["cost_trace"] = rec.cost_trace;
  result["dj_trace"] = rec.dj_trace;
  result["event_count_trace"] = rec.event_count_trace;
  result["impact_count"] = rec.impact_count;
  result["liftoff_count"] = rec.liftoff_count;
  result["final_state"] = vec_to_json(rec.final_state);
  result["wall_time_s"] = rec.wall_time_s;
  result["error"] = rec.error;
  json events = json::array();
  for (const auto& ev : rec.events) {
    events.push_back({{"t", ev.t},
                      {"name", ev.name},
                      {"kind", kind_name(ev.kind)},
                      {"from", ev.from},
                      {"to", ev.to}});
  }
  result["events"] = events;
  j["result"] = result;
  return j.dump(2);
}

void write_run_record(const RunRecord& rec, const std::string& path) {
  write_atomic(path, run_record_to_json_text(rec));
}

std::pair<ExperimentConfig, Method> config_from_record_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open record '" + path + "'");
  json j = json::parse(in);
  ExperimentConfig cfg = config_from_json_text(j.at("config").dump());
  return {cfg, method_from_name(j.at("method").get<std::string>())};
}

void dump_trajectory(const Trajectory& traj, const HybridSystem& sys,
                     const std::string& csv_path,
                     const std::string& events_path) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();

  std::ostringstream out;
  out << "# hilqr trajectory v1\n";
  out << "t";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  for (int i = 0; i < m; ++i) out << ",u" << i;
  out << ",mode\n";
  for (size_t k = 0; k < traj.states.size(); ++k) {
    out << format_full(traj.time_at(static_cast<int>(k)));
    for (int i = 0; i < n; ++i) out << "," << format_full(traj.states[k][i]);
    for (int i = 0; i < m; ++i) {
      out << ",";
      if (k < traj.inputs.size()) out << format_full(traj.inputs[k][i]);
    }
    out << "," << traj.modes[k] << "\n";
  }
  write_atomic(csv_path, out.str());

  std::ostringstream ev_out;
  ev_out << "# hilqr events v1\n";
  ev_out << "t,name,kind,from,to";
  for (int i = 0; i < n; ++i) ev_out << ",x_pre" << i;
  for (int i = 0; i < n; ++i) ev_out << ",x_post" << i;
  ev_out << "\n";
  for (const auto& ev : traj.events) {
    const Transition& tr = sys.transition(ev.transition_index);
    ev_out << format_full(ev.t_event) << "," << tr.name << ","
           << kind_name(tr.kind) << "," << tr.from << "," << tr.to;
    for (int i = 0; i < n; ++i) ev_out << "," << format_full(ev.x_pre[i]);
    for (int i = 0; i < n; ++i) ev_out << "," << format_full(ev.x_post[i]);
    ev_out << "\n";
  }
  write_atomic(events_path, ev_out.str());
}

TableRow record_to_row(const RunRecord& rec) {
  TableRow row;
  row.optimal = rec.config.table_optimal;
  row.seed = rec.config.table_seed;
  row.method = method_name(rec.method);
  if (rec.error.empty() || rec.final_cost > 0.0) {
    row.actual = std::to_string(rec.impact_count);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", rec.final_cost);
    row.cost = buf;
    row.converged = rec.converged ? "Yes" : "No";
  }
  return row;
}

void emit_table(const std::vector<RunRecord>& records,
                const std::vector<TableRow>& external_rows,
                const std::string& csv_path, const std::string& txt_path) {
  if (records.empty() && external_rows.empty()) {
    throw ConfigError("emit_table: nothing to write");
  }
  std::vector<TableRow> rows;
  for (const auto& rec : records) rows.push_back(record_to_row(rec));
  rows.insert(rows.end(), external_rows.begin(), external_rows.end());

  const std::array<std::string, 6> header = {"optimal", "seed",  "method",
                                             "actual",  "cost", "converged"};
  auto cell = [](const std::string& s) { return s.empty() ? "-" : s; };
  auto fields = [&cell](const TableRow& r) {
    return std::array<std::string, 6>{cell(r.optimal), cell(r.seed),
                                      cell(r.method), cell(r.actual),
                                      cell(r.cost),   cell(r.converged)};
  };

  std::ostringstream csv;
  csv << header[0];
  for (size_t i = 1; i < header.size(); ++i) csv << "," << header[i];
  csv << "\n";
  for (const auto& row : rows) {
    const auto f = fields(row);
    csv << f[0];
    for (size_t i = 1; i < f.size(); ++i) csv << "," << f[i];
    csv << "\n";
  }
  write_atomic(csv_path, csv.str());

  std::array<size_t, 6> width;
  for (size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows) {
    const auto f = fields(row);
    for (size_t i = 0; i < f.size(); ++i) width[i] = std::max(width[i], f[i].size());
  }
  std::ostringstream txt;
  auto emit_row = [&](const std::array<std::string, 6>& f) {
    for (size_t i = 0; i < f.size(); ++i) {
      txt << f[i] << std::string(width[i] - f[i].size() + 2, ' ');
    }
    txt << "\n";
  };
  emit_row(header);
  for (const auto& row : rows) emit_row(fields(row));
  write_atomic(txt_path, txt.str());
}

}  // namespace hilqr
