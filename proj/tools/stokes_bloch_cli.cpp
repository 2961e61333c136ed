#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stokes_bloch/commands.hpp"

namespace sb = stokes_bloch;

namespace {

struct Common {
  std::string config;
  std::string out;
  int jobs = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--jobs", c.jobs, "worker threads (default: logical cores)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "seed for random direction sampling");
}

// --out wins over STOKES_BLOCH_OUT, which wins over the config file.
std::filesystem::path resolve_out_dir(const Common& c, const sb::RunConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("STOKES_BLOCH_OUT"); env != nullptr && *env != '\0') return env;
  if (cfg.output_dir) return *cfg.output_dir;
  return "stokes_bloch_out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic Stokes homogenization and Bloch wave analysis"};
  app.require_subcommand(1);
  Common common;
  auto* tensor = app.add_subcommand("tensor", "homogenized viscosity tensor and its invariants");
  auto* bands = app.add_subcommand("bands", "bottom Bloch branches over the shift ladder");
  auto* propagation = app.add_subcommand("propagation", "propagation relation, reconstruction, equivalence");
  auto* converge = app.add_subcommand("converge", "eps-ladder convergence against the homogenized solution");
  for (auto* cmd : {tensor, bands, propagation, converge}) add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(sb::ExitCode::config_error);
  }

  sb::RunContext ctx;
  try {
    ctx.config = sb::load_config(common.config);
  } catch (const sb::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(sb::ExitCode::config_error);
  }
  for (auto* cmd : {tensor, bands, propagation, converge}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) ctx.config.seed = common.seed;
  }
  ctx.jobs = common.jobs > 0 ? common.jobs : sb::default_jobs();
  ctx.out_dir = resolve_out_dir(common, ctx.config);

  sb::CommandOutcome outcome;
  std::string name;
  try {
    if (tensor->parsed()) {
      name = "tensor";
      outcome = sb::cmd_tensor(ctx);
    } else if (bands->parsed()) {
      name = "bands";
      outcome = sb::cmd_bands(ctx);
    } else if (propagation->parsed()) {
      name = "propagation";
      outcome = sb::cmd_propagation(ctx);
    } else {
      name = "converge";
      outcome = sb::cmd_converge(ctx);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(sb::ExitCode::invariant_failed);
  }
  std::cout << name << ": " << sb::to_string(outcome.code) << " (" << outcome.report.checks().size() << " checks, "
            << outcome.report.warnings().size() << " warnings) -> " << ctx.out_dir.string() << '\n';
  return static_cast<int>(outcome.code);
}
