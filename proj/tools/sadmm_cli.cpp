#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sadmm/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::size_t> t_max;
  bool check = false;
};

void add_common(CLI::App* cmd, Common& c, bool run_flags) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--preset", c.preset, "preset name; skips the config file");
  cmd->add_option("--out", c.out, "output directory");
  if (run_flags) {
    cmd->add_option("--seed", c.seed, "oracle seed");
    cmd->add_option("--workers", c.workers, "replication threads (0: all cores)");
    cmd->add_option("--t-max", c.t_max, "iteration budget");
    cmd->add_flag("--check", c.check, "enable per-iteration invariant probes");
  }
}

sadmm::ExperimentConfig resolve(const Common& c) {
  if (c.config.empty() == c.preset.empty()) {
    throw sadmm::ConfigError("give exactly one of --config or --preset");
  }
  sadmm::ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = sadmm::load_config(c.config);
  } else {
    cfg.preset.name = c.preset;
  }
  if (const char* env = std::getenv("SADMM_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  if (c.t_max) cfg.solver.t_max = *c.t_max;
  if (c.check) cfg.solver.check_invariants = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic, linearized and stochastic ADMM experiments"};
  app.require_subcommand(1);

  Common run_opts, check_opts, validate_opts, ref_opts;
  auto* run_cmd = app.add_subcommand("run", "run replications and write trajectories and reports");
  add_common(run_cmd, run_opts, true);
  auto* check_cmd = app.add_subcommand("check-invariants", "run with invariant probes enabled");
  add_common(check_cmd, check_opts, true);
  auto* validate_cmd = app.add_subcommand("validate", "parse and check a config");
  add_common(validate_cmd, validate_opts, false);
  auto* ref_cmd = app.add_subcommand("reference", "compute and cache the reference optimum");
  add_common(ref_cmd, ref_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return sadmm::run_experiment(resolve(run_opts), std::cout);
    }
    if (check_cmd->parsed()) {
      check_opts.check = true;
      return sadmm::run_experiment(resolve(check_opts), std::cout);
    }
    if (validate_cmd->parsed()) {
      const sadmm::ExperimentConfig cfg = resolve(validate_opts);
      sadmm::validate_config(cfg);
      const sadmm::Preset preset = sadmm::make_preset(cfg.preset);
      std::cout << "ok: " << preset.description << "\n"
                << "variant " << sadmm::to_string(cfg.solver.variant) << ", schedule "
                << sadmm::to_string(cfg.solver.schedule.kind) << ", beta "
                << sadmm::format_double(cfg.solver.beta) << ", t_max " << cfg.solver.t_max
                << ", replications " << cfg.replications << ", seed " << cfg.seed << "\n";
      return 0;
    }
    if (ref_cmd->parsed()) {
      const sadmm::ExperimentConfig cfg = resolve(ref_opts);
      const sadmm::Preset preset = sadmm::make_preset(cfg.preset);
      const sadmm::ReferenceSolution ref = sadmm::compute_reference(*preset.spec);
      std::filesystem::create_directories(cfg.output_dir);
      const auto path = cfg.output_dir / "reference.txt";
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << sadmm::serialize_reference(ref, sadmm::fingerprint(cfg.preset));
      if (!out) throw sadmm::Error("cannot write " + path.string());
      std::cout << sadmm::to_string(ref.method) << " theta* = " << sadmm::format_double(ref.point.theta_star)
                << ", feasibility <= " << sadmm::format_double(ref.certified_tolerance) << "\n"
                << "wrote " << path.string() << "\n";
      return 0;
    }
  } catch (const sadmm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
