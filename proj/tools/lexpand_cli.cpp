#include "lexpand/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> stages;
  std::optional<double> tol;
  std::optional<std::size_t> bins;
  std::optional<std::size_t> nmax;
  std::optional<std::string> epsilon;
  std::optional<std::size_t> depth_cap;
  std::optional<std::string> mode;
  std::optional<std::string> potential;
};

lexpand::RunConfig resolve(const Flags& f) {
  using namespace lexpand;
  auto sys = load_system(f.config);
  RunConfig rc = run_config_from(sys, f.config);
  rc.out_dir = f.out;
  rc.stages = f.stages;
  if (f.seed) rc.seed = *f.seed;
  if (f.tol) rc.tol = *f.tol;
  if (f.bins) rc.bins = *f.bins;
  if (f.nmax) rc.n_max = *f.nmax;
  if (f.depth_cap) rc.depth_cap = *f.depth_cap;
  if (f.mode) rc.mode = parse_base_mode(*f.mode);
  if (f.potential) rc.potential = parse_potential(*f.potential);
  if (f.epsilon) {
    auto q = parse_rational(*f.epsilon);
    if (!q) throw Error(ErrorKind::invalid_input, "--epsilon is not a number: " + *f.epsilon);
    rc.epsilon = *q;
  }
  rc.validate();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov partitions, thermodynamic formalism and invariant measures for expanding circle-map semigroups"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"verify", "certify the expanding cover and topological mixing"},
      {"partition", "build the Markov partition and check its structure"},
      {"induce-check", "check the inducing-scheme conditions on the partition"},
      {"thermo", "pressure, Gibbs measure and equilibrium check for a potential"},
      {"measures", "acip, entropy, Perron vector, lifted measure and stationarity"},
      {"report", "run the --stages given, then collect all stage reports"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "system file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "master seed (overrides the system file)");
    sub->add_option("--stages", flags.stages, "stages to run before the report")->delimiter(',');
    sub->add_option("--tol", flags.tol, "truncation and stationarity tolerance");
    sub->add_option("--bins", flags.bins, "Ulam bins (power of two, at least 64)");
    sub->add_option("--nmax", flags.nmax, "largest period for the pressure fit");
    sub->add_option("--epsilon", flags.epsilon, "base ball radius, exact (e.g. 1/16)");
    sub->add_option("--depth-cap", flags.depth_cap, "longest word in the partition");
    sub->add_option("--mode", flags.mode, "base cover: overlap or tiling");
    sub->add_option("--potential", flags.potential, "constant:c, logderiv:t or coordinate");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto rc = resolve(flags);
    return lexpand::run_command(command, rc, std::cout);
  } catch (const lexpand::Error& e) {
    std::cerr << "lexpand " << command << ": " << e.what() << "\n";
    return lexpand::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "lexpand " << command << ": " << e.what() << "\n";
    return 2;
  }
}
