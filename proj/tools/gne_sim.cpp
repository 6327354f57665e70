#include "gne/gne.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Distributed GNE seeking simulator"};
  app.require_subcommand(1);

  std::string path;
  auto* validate = app.add_subcommand("validate", "check step sizes and the positive-definiteness certificate");
  validate->add_option("config", path, "configuration file")->required();

  gne::RunOptions run;
  std::uint64_t seed = 0;
  std::string out;
  auto* runc = app.add_subcommand("run", "run one solver and write its record as CSV");
  runc->add_option("config", path, "configuration file")->required();
  runc->add_option("--mode", run.mode, "sync | async | sync-fb | async-fb")
      ->check(CLI::IsMember({"sync", "async", "sync-fb", "async-fb"}));
  auto* seed_opt = runc->add_option("--seed", seed, "instance and scheduler seed");
  auto* out_opt = runc->add_option("--out", out, "CSV path (default $GNE_OUT_DIR/run_<mode>_seed<s>.csv)");
  runc->add_flag("--force", run.force, "run even when validation fails");

  gne::SweepOptions sw;
  std::string dir;
  auto* sweepc = app.add_subcommand("sweep", "vary the delay bound or the minimum activation probability");
  sweepc->add_option("config", path, "configuration file")->required();
  sweepc->add_option("--vary", sw.vary, "eps | pmin")->required()->check(CLI::IsMember({"eps", "pmin"}));
  sweepc->add_option("--values", sw.values, "comma-separated values")->required()->delimiter(',');
  sweepc->add_option("--seeds", sw.seeds, "seeds 1..N per value")->check(CLI::PositiveNumber);
  auto* dir_opt = sweepc->add_option("--out", dir, "output directory (default $GNE_OUT_DIR/sweep)");
  sweepc->add_option("--mode", sw.mode, "solver mode")->check(CLI::IsMember({"sync", "async", "sync-fb", "async-fb"}));
  sweepc->add_option("--jobs", sw.jobs, "worker threads")->check(CLI::PositiveNumber);
  sweepc->add_flag("--force", sw.force, "run even when validation fails");

  auto* exportc = app.add_subcommand("export", "print a self-contained replay configuration");
  exportc->add_option("config", path, "configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gne::exit_config;
  }

  if (validate->parsed()) return gne::cmd_validate(path);
  if (runc->parsed()) {
    if (*seed_opt) run.seed = seed;
    if (*out_opt) run.out = out;
    return gne::cmd_run(path, run);
  }
  if (sweepc->parsed()) {
    if (*dir_opt) sw.out_dir = dir;
    return gne::cmd_sweep(path, sw);
  }
  return gne::cmd_export(path);
}
