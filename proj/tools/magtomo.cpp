#include "commands.hpp"

#include "magtomo/core.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  using magtomo::cli::Options;
  CLI::App app{"Magnetic ray transform of tensor fields: forward maps, symbol checks and inversion"};
  app.set_version_flag("--version", std::string(magtomo::version()));
  app.require_subcommand(1);

  Options opt;
  auto common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory, or the main output file");
    sub->add_option("--threads", opt.threads, "worker threads (default: MAGTOMO_THREADS, else all cores)");
    sub->add_option("--seed", opt.seed, "seed for sampled inputs");
  };

  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"geodesic", "integrate one magnetic geodesic; writes path.csv"},
      {"convexity", "strict magnetic convexity of the boundary at a point"},
      {"foliation", "magnetic convexity of every level of the layer schedule"},
      {"trapping", "look for trapped orbits from random seeds"},
      {"transform", "transform of a field along the local ray family; writes If.csv"},
      {"symbol-check", "ellipticity scan of the model normal-operator symbol"},
      {"find-f0", "smallest F with a positive restricted symbol"},
      {"invert-local", "local reconstruction from family data; writes recon.json"},
      {"invert-global", "layer stripping over a schedule; writes recon.json"},
      {"roundtrip", "forward map then local inversion of a known field"},
  };
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    common(sub);
    const std::string name = c.name;
    if (name == "transform" || name == "invert-local" || name == "invert-global" || name == "roundtrip")
      sub->add_option("--field", opt.field, "field manifest or component expressions (JSON)")->check(CLI::ExistingFile);
    if (name == "transform")
      sub->add_option("--family", opt.family, "configuration holding the geometry and family")->check(CLI::ExistingFile);
    if (name == "invert-local")
      sub->add_option("--data", opt.data, "transform CSV")->check(CLI::ExistingFile);
    if (name == "invert-global" || name == "foliation")
      sub->add_option("--schedule", opt.schedule, "layer schedule (JSON)")->check(CLI::ExistingFile);
    if (name == "symbol-check" || name == "find-f0") {
      sub->add_option("--kind", opt.kind, "bf or hb");
      sub->add_option("--grid", opt.grid, "frequency grid (JSON)")->check(CLI::ExistingFile);
    }
    if (name == "symbol-check") sub->add_option("--F", opt.F, "conjugation strength");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return magtomo::cli::run(app.get_subcommands().front()->get_name(), opt);
}
