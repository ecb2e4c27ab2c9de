#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace sbd;
  CLI::App app{"Spatial birth-death wireless network simulator"};
  app.require_subcommand(1);

  cli::Options opt;
  std::string config;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "experiment config file (key = value, [sections])");
  app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides simulation.seed)");
  app.add_option("--jobs", opt.jobs, "parallel worker threads")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "run the dynamics; metrics JSON, events, snapshots");
  auto* heuristics = app.add_subcommand("heuristics", "lambda sweep of the steady-state heuristics");
  auto* stats = app.add_subcommand("stats", "spatial statistics of snapshot files");
  std::string pattern;
  stats->add_option("snapshots", pattern, "glob of snapshot CSV files")->required();
  auto* figures = app.add_subcommand("figures", "canned figure data recipes");
  std::string figure;
  figures->add_option("figure", figure, "fig2, fig3, fig5-6, fig8, fig9 or all")->required();
  auto* chain = app.add_subcommand("chain", "tessellated chain, fluid model or refinement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }
  if (!config.empty()) opt.config_path = config;
  if (seed_opt->count() > 0) opt.seed = seed;

  try {
    const cli::Context ctx = cli::make_context(opt);
    if (*simulate) return cli::cmd_simulate(ctx);
    if (*heuristics) return cli::cmd_heuristics(ctx);
    if (*stats) return cli::cmd_stats(ctx, pattern);
    if (*figures) return cli::cmd_figures(ctx, figure);
    if (*chain) return cli::cmd_chain(ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumerical);
  }
  return 0;
}
