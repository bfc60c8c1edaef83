#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hilqr/experiment.hpp"

namespace fs = std::filesystem;

namespace {

// Suite directories may carry reference rows (published values that are
// displayed, not recomputed) in external_rows.json.
std::vector<hilqr::TableRow> load_external_rows(const fs::path& path) {
  std::vector<hilqr::TableRow> rows;
  if (!fs::exists(path)) return rows;
  std::ifstream in(path);
  nlohmann::json j = nlohmann::json::parse(in);
  for (const auto& r : j) {
    hilqr::TableRow row;
    row.optimal = r.value("optimal", "");
    row.seed = r.value("seed", "");
    row.method = r.value("method", "");
    row.actual = r.value("actual", "");
    row.cost = r.value("cost", "");
    row.converged = r.value("converged", "");
    rows.push_back(row);
  }
  return rows;
}

void apply_overrides(hilqr::ExperimentConfig& config,
                     const std::string& variant, bool no_extension,
                     int seed_bounces) {
  if (!variant.empty()) {
    config.methods.clear();
    if (variant == "both") {
      config.methods.push_back({hilqr::GradientVariant::Saltation, true});
      config.methods.push_back({hilqr::GradientVariant::ResetJacobian, true});
    } else if (variant == "saltation") {
      config.methods.push_back({hilqr::GradientVariant::Saltation, true});
    } else if (variant == "reset-jacobian") {
      config.methods.push_back({hilqr::GradientVariant::ResetJacobian, true});
    } else {
      throw hilqr::ConfigError("unknown --variant '" + variant + "'");
    }
  }
  if (no_extension) {
    for (auto& method : config.methods) method.use_extension = false;
  }
  if (seed_bounces >= 0) {
    config.seed.kind = hilqr::SeedPolicy::Kind::BounceCount;
    config.seed.count = seed_bounces;
  }
}

void print_records(const std::vector<hilqr::RunRecord>& records) {
  for (const auto& rec : records) {
    std::cout << rec.config.name << " [" << hilqr::method_name(rec.method)
              << "] ";
    if (!rec.error.empty() && rec.iterations == 0) {
      std::cout << "error: " << rec.error << "\n";
      continue;
    }
    std::cout << "cost=" << rec.final_cost
              << " converged=" << (rec.converged ? "yes" : "no")
              << " |dJ|=" << rec.dj_final << " iters=" << rec.iterations
              << " impacts=" << rec.impact_count << " ("
              << rec.wall_time_s << "s)";
    if (!rec.error.empty()) std::cout << " [" << rec.error << "]";
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid iLQR experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", variant, record_path;
  std::string traj_path, events_path;
  bool no_extension = false;
  int seed_bounces = -1;

  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", config_path, "experiment config (json)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--variant", variant, "saltation | reset-jacobian | both");
  run->add_flag("--no-extension", no_extension,
                "disable reference extensions on mode mismatch");
  run->add_option("--seed-bounces", seed_bounces,
                  "override the seed with a bounce-count policy");

  std::string suite_dir;
  auto* suite = app.add_subcommand("suite", "run all configs in a directory");
  suite->add_option("dir", suite_dir, "directory of experiment configs")
      ->required()
      ->check(CLI::ExistingDirectory);
  suite->add_option("--out", out_dir, "output directory");
  suite->add_option("--variant", variant, "saltation | reset-jacobian | both");

  auto* dump = app.add_subcommand("dump", "re-run a record and dump files");
  dump->add_option("record", record_path, "run record (json)")
      ->required()
      ->check(CLI::ExistingFile);
  dump->add_option("--trajectory", traj_path, "trajectory csv path")
      ->required();
  dump->add_option("--events", events_path, "events csv path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      hilqr::ExperimentConfig config = hilqr::load_config(config_path);
      apply_overrides(config, variant, no_extension, seed_bounces);
      const auto records = hilqr::run_experiment(config, out_dir);
      print_records(records);
    } else if (suite->parsed()) {
      std::vector<fs::path> configs;
      for (const auto& entry : fs::directory_iterator(suite_dir)) {
        if (entry.path().extension() == ".json" &&
            entry.path().filename() != "external_rows.json") {
          configs.push_back(entry.path());
        }
      }
      std::sort(configs.begin(), configs.end());
      std::vector<hilqr::RunRecord> all;
      for (const auto& path : configs) {
        hilqr::ExperimentConfig config = hilqr::load_config(path.string());
        apply_overrides(config, variant, false, -1);
        auto records = hilqr::run_experiment(config, out_dir);
        print_records(records);
        all.insert(all.end(), records.begin(), records.end());
      }
      const auto external =
          load_external_rows(fs::path(suite_dir) / "external_rows.json");
      fs::create_directories(out_dir);
      hilqr::emit_table(all, external, out_dir + "/table.csv",
                        out_dir + "/table.txt");
      std::cout << "table written to " << out_dir << "/table.{csv,txt}\n";
    } else if (dump->parsed()) {
      const auto [config, method] = hilqr::config_from_record_file(record_path);
      const hilqr::BenchmarkSystem bench =
          hilqr::make_system(config.system_name, config.params);

      // Reconstruct the trajectory from the recorded config for dumping.
      hilqr::CostModel cost;
      cost.q_terminal = config.q_terminal;
      cost.x_des = config.x_des;
      cost.r_input = config.r_input;
      cost.q_run = config.q_run;
      hilqr::SolverConfig scfg = config.solver;
      scfg.variant = method.variant;
      scfg.use_reference_extension = method.use_extension;
      const auto seeds = hilqr::seed_inputs(config.seed, bench, config);
      const auto solved =
          hilqr::solve(bench.system, config.x0, config.mode0, seeds, config.dt,
                       cost, scfg, config.integrator);
      if (events_path.empty()) events_path = traj_path + ".events.csv";
      hilqr::dump_trajectory(solved.trajectory, bench.system, traj_path,
                             events_path);
      std::cout << "trajectory written to " << traj_path << "\n";
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
