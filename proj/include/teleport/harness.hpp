#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "teleport/algorithms.hpp"
#include "teleport/metrics.hpp"
#include "teleport/tuning.hpp"

namespace teleport {

enum class Algorithm { dsgd, teleport, teleport_overlap, client_sampling, search_k };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dsgd: return "dsgd";
    case Algorithm::teleport: return "teleport";
    case Algorithm::teleport_overlap: return "teleport-overlap";
    case Algorithm::client_sampling: return "client-sampling";
    case Algorithm::search_k: return "search-k";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  for (auto a : {Algorithm::dsgd, Algorithm::teleport, Algorithm::teleport_overlap, Algorithm::client_sampling,
                 Algorithm::search_k}) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorKind::invalid_parameter, "unknown algorithm '" + s + "'");
}

/// The step sizes tried when eta is "grid".
inline std::vector<double> eta_grid() {
  return {0.1, 0.075, 0.05, 0.025, 0.01, 0.0075, 0.005, 0.0025, 0.001, 0.00075, 0.0005, 0.00025, 0.0001};
}

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::teleport;
  int n = 100;
  int d = 50;
  long T = 1000;
  std::optional<int> k;
  Family topology = Family::ring;
  double sigma2 = 0.0;
  double zeta2 = 0.0;
  std::vector<double> etas;  // empty until set; "grid" expands to eta_grid()
  std::uint64_t seed = 0;
  std::optional<double> target_error;
  Criterion criterion = Criterion::min_mean_grad_norm;
  int seeds = 1;  // repetitions, seeds seed, seed+1, ...
  int jobs = 1;
  std::string out_dir = ".";

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::invalid_parameter, what); };
    if (n < 1 || d < 1) bad("n and d must be >= 1");
    if (T < 1) bad("T must be >= 1");
    if (!(sigma2 >= 0.0) || !(zeta2 >= 0.0)) bad("sigma2 and zeta2 must be nonnegative");
    if (etas.empty()) bad("eta is required");
    for (double eta : etas)
      if (!(eta > 0.0) || !std::isfinite(eta)) bad("eta must be positive");
    const bool needs_k = algorithm != Algorithm::dsgd && algorithm != Algorithm::search_k;
    if (needs_k && !k) bad("k is required for " + to_string(algorithm));
    if (k && (*k < 1 || *k > n)) bad("k must lie in 1..n");
    if (target_error && !(*target_error > 0.0)) bad("target_error must be positive");
    if (seeds < 1) bad("seeds must be >= 1");
    if (jobs < 1) bad("jobs must be >= 1");
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::invalid_parameter, key + ": not a number: '" + v + "'");
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::invalid_parameter, key + ": not an integer: '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

}  // namespace detail

using ConfigPairs = std::map<std::string, std::string>;

/// Reads `key = value` lines; blank lines and lines starting with '#' are skipped.
inline ConfigPairs read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_parameter, "cannot open config file " + path);
  ConfigPairs pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::invalid_parameter, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    pairs[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return pairs;
}

/// Applies key/value pairs on top of `base`. Unknown keys are an error.
inline ExperimentConfig apply_config(ExperimentConfig base, const ConfigPairs& pairs) {
  for (const auto& [key, v] : pairs) {
    if (key == "algorithm") base.algorithm = parse_algorithm(v);
    else if (key == "n") base.n = static_cast<int>(detail::parse_long(key, v));
    else if (key == "d") base.d = static_cast<int>(detail::parse_long(key, v));
    else if (key == "T") base.T = detail::parse_long(key, v);
    else if (key == "k") base.k = static_cast<int>(detail::parse_long(key, v));
    else if (key == "topology") base.topology = parse_family(v);
    else if (key == "sigma2") base.sigma2 = detail::parse_double(key, v);
    else if (key == "zeta2") base.zeta2 = detail::parse_double(key, v);
    else if (key == "eta") base.etas = v == "grid" ? eta_grid() : std::vector<double>{detail::parse_double(key, v)};
    else if (key == "seed") {
      if (v.empty() || v[0] == '-') throw Error(ErrorKind::invalid_parameter, "seed must be a nonnegative integer");
      try {
        std::size_t used = 0;
        base.seed = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw Error(ErrorKind::invalid_parameter, "seed: not an integer: '" + v + "'");
      }
    }
    else if (key == "target_error") base.target_error = detail::parse_double(key, v);
    else if (key == "criterion") base.criterion = parse_criterion(v);
    else if (key == "seeds") base.seeds = static_cast<int>(detail::parse_long(key, v));
    else if (key == "jobs") base.jobs = static_cast<int>(detail::parse_long(key, v));
    else if (key == "out_dir") base.out_dir = v;
    else throw Error(ErrorKind::invalid_parameter, "unknown config key '" + key + "'");
  }
  return base;
}

/// Every run starts all parameters from the all-ones vector.
inline Vector initial_point(int d) { return Vector::Ones(d); }

/// Outcome of one (eta, seed) run. For search-k, k is the selected branch.
struct RunSummary {
  std::string algorithm;
  Family topology = Family::ring;
  int n = 0;
  int k = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::optional<long> iters_to_target;
  double final_error = 0.0;
  bool diverged = false;
};

struct EtaResult {
  double eta = 0.0;
  std::vector<RunSummary> per_seed;
};

struct GridResult {
  std::vector<EtaResult> results;  // in the order tried
  std::optional<std::size_t> best;  // empty when every run diverged
};

/// Receives every trace as soon as it is produced.
using TraceSink = std::function<void(const RunTrace&)>;

/// Runs the configured algorithm once at (eta, seed). Traces go to `sink`.
inline RunSummary run_once(const ExperimentConfig& config, double eta, std::uint64_t seed,
                           const RunOptions& options = {}, const TraceSink& sink = {}) {
  const StreamPlan plan{seed};
  Stream problem_stream = plan.problem_stream();
  const auto problem = make_quadratic(config.n, config.d, config.zeta2, problem_stream);
  const NoiseModel noise{config.sigma2};
  const Vector init = initial_point(config.d);

  RunSummary s;
  s.algorithm = to_string(config.algorithm);
  s.topology = config.topology;
  s.n = config.n;
  s.eta = eta;
  s.seed = seed;

  RunTrace chosen;
  switch (config.algorithm) {
    case Algorithm::dsgd:
      chosen = run_dsgd(problem, noise, build_topology(config.topology, config.n), eta, config.T, plan, init, options);
      break;
    case Algorithm::teleport:
      chosen = run_teleportation(problem, noise, *config.k, build_topology(config.topology, *config.k), eta, config.T,
                                 plan, init, options);
      break;
    case Algorithm::teleport_overlap:
      chosen = run_teleportation_overlap(problem, noise, *config.k, build_topology(config.topology, *config.k), eta,
                                         config.T, plan, init, options);
      break;
    case Algorithm::client_sampling:
      chosen = run_client_sampling(problem, noise, build_topology(config.topology, config.n), *config.k, eta,
                                   config.T, plan, init, options);
      break;
    case Algorithm::search_k: {
      SearchOptions search;
      search.criterion = config.criterion;
      search.run = options;
      search.jobs = config.jobs;
      auto outcome = search_k(problem, noise, config.topology, eta, config.T, plan, init, search);
      if (sink)
        for (const auto& trace : outcome.traces) sink(trace);
      chosen = std::move(outcome.traces[outcome.selected_index]);
      break;
    }
  }
  if (sink && config.algorithm != Algorithm::search_k) sink(chosen);

  s.k = chosen.k;
  s.final_error = chosen.records.back().error;
  s.diverged = chosen.diverged;
  if (config.target_error) s.iters_to_target = iterations_to_target(chosen, *config.target_error);
  return s;
}

namespace detail {

/// Sort key of an eta over its seeds: reached everywhere first, by mean
/// iterations; then runs that finished finitely, by mean final error;
/// diverged last.
struct EtaRank {
  int tier = 0;
  double score = 0.0;
  double eta = 0.0;

  bool operator<(const EtaRank& o) const {
    if (tier != o.tier) return tier < o.tier;
    if (score != o.score) return score < o.score;
    return eta < o.eta;
  }
};

inline EtaRank rank_of(const EtaResult& r) {
  EtaRank rank;
  rank.eta = r.eta;
  bool all_reached = true, any_diverged = false;
  double iters = 0.0, error = 0.0;
  for (const auto& s : r.per_seed) {
    all_reached = all_reached && s.iters_to_target.has_value();
    any_diverged = any_diverged || s.diverged;
    if (s.iters_to_target) iters += static_cast<double>(*s.iters_to_target);
    error += s.final_error;
  }
  const double m = static_cast<double>(r.per_seed.size());
  if (all_reached) {
    rank.tier = 0;
    rank.score = iters / m;
  } else if (!any_diverged) {
    rank.tier = 1;
    rank.score = error / m;
  } else {
    rank.tier = 2;
  }
  return rank;
}

}  // namespace detail

inline std::vector<std::uint64_t> seed_list(const ExperimentConfig& config) {
  std::vector<std::uint64_t> out;
  for (int r = 0; r < config.seeds; ++r) out.push_back(config.seed + static_cast<std::uint64_t>(r));
  return out;
}

/// Tries every eta of the config over every seed and ranks them: fewest
/// iterations to target, never-reached and diverged last, ties to the smaller
/// eta. Without a target error, finite runs are ranked by final error.
inline GridResult grid_search_eta(const ExperimentConfig& config, const RunOptions& options = {},
                                  const TraceSink& sink = {}) {
  config.validate();
  GridResult out;
  for (double eta : config.etas) {
    EtaResult r;
    r.eta = eta;
    for (auto seed : seed_list(config)) r.per_seed.push_back(run_once(config, eta, seed, options, sink));
    out.results.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < out.results.size(); ++i) {
    if (detail::rank_of(out.results[i]).tier == 2) continue;
    if (!out.best || detail::rank_of(out.results[i]) < detail::rank_of(out.results[*out.best])) out.best = i;
  }
  return out;
}

// ---- CSV output ----

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trace_file_name(const RunTrace& trace) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "trace_%s_eta%g_k%d_seed%" PRIu64 ".csv", trace.algorithm.c_str(), trace.eta,
                trace.k, trace.seed);
  return buf;
}

/// One row per iteration 0..T. Rows after a divergence are written as inf.
inline void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "iteration,error,consensus_error,grad_norm_sq\n";
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << format_number(r.error) << ',' << format_number(r.consensus_error) << ','
        << format_number(r.grad_norm_sq) << '\n';
  }
  const long last = trace.records.empty() ? -1 : trace.records.back().iteration;
  for (long t = last + 1; t <= trace.horizon; ++t) out << t << ",inf,inf,inf\n";
}

inline void write_summary_header(std::ostream& out) {
  out << "algorithm,topology,n,k,eta,seed,iters_to_target,final_error\n";
}

inline void write_summary_row(std::ostream& out, const RunSummary& s) {
  out << s.algorithm << ',' << to_string(s.topology) << ',' << s.n << ',' << s.k << ',' << format_number(s.eta)
      << ',' << s.seed << ',';
  if (s.iters_to_target) out << *s.iters_to_target;
  out << ',' << format_number(s.final_error) << '\n';
}

/// Mean over seeds; iters_to_target stays empty unless every seed reached it.
/// The seed column reads "mean" and k is the most common selection.
inline void write_mean_row(std::ostream& out, const EtaResult& r) {
  std::map<int, int> votes;
  double error = 0.0, iters = 0.0;
  bool all_reached = true;
  for (const auto& s : r.per_seed) {
    ++votes[s.k];
    error += s.final_error;
    all_reached = all_reached && s.iters_to_target.has_value();
    if (s.iters_to_target) iters += static_cast<double>(*s.iters_to_target);
  }
  const auto& first = r.per_seed.front();
  const int k = std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) { return a.second < b.second; })
                    ->first;
  const double m = static_cast<double>(r.per_seed.size());
  out << first.algorithm << ',' << to_string(first.topology) << ',' << first.n << ',' << k << ','
      << format_number(r.eta) << ",mean,";
  if (all_reached) out << format_number(iters / m);
  out << ',' << format_number(error / m) << '\n';
}

enum ExitCode { exit_ok = 0, exit_config_error = 1, exit_no_feasible_eta = 2 };

/// Runs the grid, writes trace_*.csv per (eta, k, seed), summary.csv with one
/// row per run and best.csv with the winning eta (plus a mean row when more
/// than one seed is used). Returns the process exit status.
inline int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);

  const auto sink = [&](const RunTrace& trace) {
    std::ofstream f(dir / trace_file_name(trace));
    write_trace_csv(f, trace);
  };
  const auto grid = grid_search_eta(config, {}, sink);

  std::ofstream summary(dir / "summary.csv");
  write_summary_header(summary);
  for (const auto& r : grid.results)
    for (const auto& s : r.per_seed) write_summary_row(summary, s);

  std::ofstream best(dir / "best.csv");
  write_summary_header(best);
  if (!grid.best) {
    log << "no feasible eta: every run diverged\n";
    return exit_no_feasible_eta;
  }
  const auto& winner = grid.results[*grid.best];
  for (const auto& s : winner.per_seed) write_summary_row(best, s);
  if (winner.per_seed.size() > 1) write_mean_row(best, winner);
  log << "best eta " << format_number(winner.eta) << '\n';
  return exit_ok;
}

/// Bound curves for DSGD on n nodes and teleportation for every valid k,
/// with L = n and r0 measured from the all-ones start.
inline int write_rates(const ExperimentConfig& config, std::ostream& out) {
  if (config.n < 1 || config.d < 1 || config.T < 1) throw Error(ErrorKind::invalid_parameter, "n, d, T must be >= 1");
  Stream problem_stream = StreamPlan{config.seed}.problem_stream();
  const auto problem = make_quadratic(config.n, config.d, config.zeta2, problem_stream);
  BoundInputs in;
  in.T = config.T;
  in.sigma2 = config.sigma2;
  in.zeta2 = config.zeta2;
  in.L = problem.smoothness();
  in.r0 = (initial_point(config.d) - problem.optimum()).squaredNorm();
  in.n = config.n;

  out << "algorithm,topology,n,k,p,T,term1,term2,term3,total\n";
  const auto row = [&](const std::string& name, int k, double p, const RateEstimate& r) {
    out << name << ',' << to_string(config.topology) << ',' << config.n << ',' << k << ',' << format_number(p) << ','
        << config.T << ',' << format_number(r.term1) << ',' << format_number(r.term2) << ','
        << format_number(r.term3) << ',' << format_number(r.total) << '\n';
  };
  const double p_dsgd = build_topology(config.topology, config.n).p();
  row("dsgd", config.n, p_dsgd, rate_dsgd(in, p_dsgd));
  for (int k = 1; k <= config.n; ++k) {
    std::optional<MixingMatrix> W;
    try {
      W = build_topology(config.topology, k);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::unsupported_dimension) continue;
      throw;
    }
    row("teleport", k, W->p(), rate_teleportation(in, k, W->p()));
  }
  return exit_ok;
}

}  // namespace teleport
