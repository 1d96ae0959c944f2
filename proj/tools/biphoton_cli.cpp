// biphoton: simulate, analyze and fit biphoton interference experiments.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "biphoton/commands.hpp"
#include "biphoton/experiment.hpp"

namespace cmd = biphoton::commands;

namespace {

void add_common(CLI::App* app, cmd::Options& o, bool config_required) {
  auto* config = app->add_option("--config", o.config, "experiment config (.cfg)");
  if (config_required) config->required()->check(CLI::ExistingFile);
  else config->check(CLI::ExistingFile);
  app->add_option("--out", o.out, std::string("output directory (default: config [output] dir, then $") +
                                      cmd::kOutDirEnv + ", then .)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biphoton interference digital twin"};
  app.set_version_flag("--version", std::string(biphoton::experiment::kVersion));
  app.require_subcommand(1);

  cmd::Options o;

  auto* simulate = app.add_subcommand("simulate", "simulate an acquisition and write a time-tag file");
  add_common(simulate, o, true);
  simulate->add_option("--seed", o.seed, "master seed (overrides the config)");
  simulate->add_option("--format", o.format, "tag file format")->check(CLI::IsMember({"bin", "csv"}));
  simulate->add_flag("--no-dispersion", o.no_dispersion, "remove the dispersive spools");

  auto* analyze = app.add_subcommand("analyze", "coincidence histogram, g2(0) and real rate from a tag file");
  add_common(analyze, o, true);
  analyze->add_option("--tags", o.tags, "time-tag file (bin or csv)")->required()->check(CLI::ExistingFile);

  auto* spectrum = app.add_subcommand("spectrum", "time-of-flight spectrum from a tag file");
  add_common(spectrum, o, true);
  spectrum->add_option("--tags", o.tags, "time-tag file (bin or csv)")->required()->check(CLI::ExistingFile);

  auto* fit = app.add_subcommand("fit", "fit the two-resonance interference model to a spectrum CSV");
  add_common(fit, o, false);
  fit->add_option("--spectrum", o.spectrum, "spectrum CSV (lambda_nm,count[,accidental])")
      ->required()
      ->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "real coincidence rate against pump power");
  add_common(sweep, o, true);
  sweep->add_option("--seed", o.seed, "master seed (overrides the config)");
  sweep->add_option("--powers", o.powers, "pump powers in mW, comma separated")->required()->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  if (*simulate) return cmd::simulate(o, std::cout, std::cerr);
  if (*analyze) return cmd::analyze(o, std::cout, std::cerr);
  if (*spectrum) return cmd::spectrum(o, std::cout, std::cerr);
  if (*fit) return cmd::fit(o, std::cout, std::cerr);
  return cmd::sweep(o, std::cout, std::cerr);
}
