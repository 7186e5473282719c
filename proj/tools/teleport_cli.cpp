// Command line front end: run, grid, search-k, rates.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "teleport/harness.hpp"

namespace {

struct Flags {
  std::string config_file;
  teleport::ConfigPairs values;
};

/// Registers one flag per config key on `app`; values land in flags.values
/// only when given, so they can override a config file.
void add_config_flags(CLI::App& app, Flags& flags) {
  app.add_option("--config", flags.config_file, "key = value file; flags override it");
  const std::pair<const char*, const char*> keys[] = {
      {"algorithm", "dsgd | teleport | teleport-overlap | client-sampling | search-k"},
      {"n", "number of nodes"},
      {"d", "dimension"},
      {"k", "number of active nodes"},
      {"topology", "ring | torus | complete | exponential"},
      {"sigma2", "gradient noise variance"},
      {"zeta2", "heterogeneity"},
      {"eta", "step size, or 'grid'"},
      {"T", "iterations"},
      {"seed", "master seed"},
      {"target_error", "error threshold for iterations-to-target"},
      {"criterion", "k selection criterion for search-k: theory | practice"},
      {"seeds", "number of seeds, counted up from --seed"},
      {"jobs", "concurrent branches in search-k"},
      {"out_dir", "output directory"},
  };
  for (const auto& [key, help] : keys) {
    std::string flag = std::string("--") + key;
    for (auto& c : flag)
      if (c == '_') c = '-';
    app.add_option_function<std::string>(
        flag, [&flags, key = std::string(key)](const std::string& v) { flags.values[key] = v; }, help);
  }
}

teleport::ExperimentConfig resolve(const Flags& flags, teleport::ConfigPairs defaults) {
  teleport::ConfigPairs pairs = std::move(defaults);
  if (!flags.config_file.empty())
    for (auto& [k, v] : teleport::read_config_file(flags.config_file)) pairs[k] = v;
  for (auto& [k, v] : flags.values) pairs[k] = v;
  return teleport::apply_config({}, pairs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized SGD simulator: teleportation, DSGD and client sampling on quadratics"};
  app.require_subcommand(1);

  Flags run_flags, grid_flags, search_flags, rates_flags;
  auto* run = app.add_subcommand("run", "run one algorithm at the given eta (or every grid eta)");
  auto* grid = app.add_subcommand("grid", "grid search over eta, ranked by iterations to target");
  auto* search = app.add_subcommand("search-k", "select k by the doubling search, per eta");
  auto* rates = app.add_subcommand("rates", "emit bound curves as CSV on standard output");
  add_config_flags(*run, run_flags);
  add_config_flags(*grid, grid_flags);
  add_config_flags(*search, search_flags);
  add_config_flags(*rates, rates_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : teleport::exit_config_error;
  }

  try {
    if (run->parsed()) return teleport::run_experiment(resolve(run_flags, {}), std::cerr);
    if (grid->parsed()) return teleport::run_experiment(resolve(grid_flags, {{"eta", "grid"}}), std::cerr);
    if (search->parsed()) {
      auto config = resolve(search_flags, {{"eta", "grid"}});
      config.algorithm = teleport::Algorithm::search_k;
      return teleport::run_experiment(config, std::cerr);
    }
    return teleport::write_rates(resolve(rates_flags, {}), std::cout);
  } catch (const teleport::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return teleport::exit_config_error;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return teleport::exit_config_error;
  }
}
