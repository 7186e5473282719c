#pragma once

#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <numeric>
#include <string_view>
#include <vector>

#include "teleport/algorithms.hpp"
#include "teleport/error.hpp"
#include "teleport/metrics.hpp"
#include "teleport/problem.hpp"
#include "teleport/topology.hpp"

namespace teleport {

/// floor(log2(n + 1)) for n >= 1.
inline int floor_log2_plus_one(int n) {
  int e = 0;
  while ((2LL << e) <= static_cast<long long>(n) + 1) ++e;
  return e;
}

/// Powers of two 2^0 .. 2^(floor(log2(n+1)) - 1); they sum to at most n.
inline std::vector<int> power_of_two_candidates(int n) {
  if (n < 1) throw Error(ErrorKind::invalid_parameter, "n must be >= 1");
  std::vector<int> out;
  const int e = floor_log2_plus_one(n);
  for (int j = 0; j < e; ++j) out.push_back(1 << j);
  return out;
}

/// Active-node counts tried by the doubling search: the powers of two plus n.
inline std::vector<int> candidate_ks(int n) {
  std::vector<int> out = power_of_two_candidates(n);
  if (out.empty() || out.back() != n) out.push_back(n);
  return out;
}

/// Gradient evaluations per iteration when all power-of-two branches run
/// side by side.
inline long branch_gradient_budget(int n) {
  const auto ks = power_of_two_candidates(n);
  return std::accumulate(ks.begin(), ks.end(), 0L);
}

namespace detail {

/// T (sigma2 + zeta2) / (L r0), with the degenerate cases mapped to 0.
inline double selection_ratio(const BoundInputs& in) {
  in.validate();
  const double noise = in.sigma2 + in.zeta2;
  if (noise == 0.0 || in.r0 == 0.0) return 0.0;
  return static_cast<double>(in.T) * noise / (in.L * in.r0);
}

/// min(ceil(ratio^(1/q)), cap) without trusting pow() at exact powers.
inline long ceil_root_capped(double ratio, int q, long cap) {
  if (ratio <= 0.0) return 0;
  const double root = std::pow(ratio, 1.0 / q);
  if (!std::isfinite(root) || root >= static_cast<double>(cap)) return cap;
  auto c = static_cast<long>(std::ceil(root));
  while (c > 1 && std::pow(static_cast<long double>(c - 1), q) >= static_cast<long double>(ratio)) --c;
  while (std::pow(static_cast<long double>(c), q) < static_cast<long double>(ratio)) ++c;
  return std::min(c, cap);
}

}  // namespace detail

/// k = max{1, min{ceil(ratio^(1/7)), n}} for a ring over the active nodes.
inline int theoretical_k_ring(const BoundInputs& in) {
  const double ratio = detail::selection_ratio(in);
  const long k = detail::ceil_root_capped(ratio, 7, in.n);
  return static_cast<int>(std::max(1L, k));
}

/// k = max{1, min{ceil(ratio^(1/3)), ceil(ratio), n}} for an exponential graph.
inline int theoretical_k_exp(const BoundInputs& in) {
  const double ratio = detail::selection_ratio(in);
  const long by_root = detail::ceil_root_capped(ratio, 3, in.n);
  const long by_ratio = detail::ceil_root_capped(ratio, 1, in.n);
  return static_cast<int>(std::max(1L, std::min(by_root, by_ratio)));
}

enum class Criterion { min_mean_grad_norm, min_final_error };

inline std::string_view to_string(Criterion c) {
  return c == Criterion::min_mean_grad_norm ? "min-mean-grad-norm" : "min-final-error";
}

inline Criterion parse_criterion(std::string_view name) {
  if (name == "min-mean-grad-norm" || name == "theory") return Criterion::min_mean_grad_norm;
  if (name == "min-final-error" || name == "practice") return Criterion::min_final_error;
  throw Error(ErrorKind::invalid_parameter, "unknown criterion '" + std::string(name) + "'");
}

/// Score of one branch under `criterion`; +inf for a diverged run.
inline double criterion_value(const RunTrace& trace, Criterion criterion) {
  if (trace.diverged || trace.records.empty()) return std::numeric_limits<double>::infinity();
  if (criterion == Criterion::min_final_error) return trace.records.back().error;
  double acc = 0.0;
  for (const auto& r : trace.records) acc += r.grad_norm_sq;
  return acc / static_cast<double>(trace.records.size());
}

struct SearchOutcome {
  std::vector<int> candidates;
  std::vector<RunTrace> traces;  // parallel to candidates
  std::vector<double> values;    // criterion value per candidate
  int selected_k = 1;
  std::size_t selected_index = 0;
  double selected_value = 0.0;
};

struct SearchOptions {
  Criterion criterion = Criterion::min_mean_grad_norm;
  RunOptions run;
  int jobs = 1;  // branches run concurrently, at most this many at once
};

/// Doubling search over the number of active nodes: runs teleportation for
/// every k in candidate_ks(n) with the same eta, T and plan, and keeps the k
/// with the smallest criterion value (ties go to the smaller k).
inline SearchOutcome search_k(const QuadraticProblem& problem, const NoiseModel& noise, Family family, double eta,
                              long T, const StreamPlan& plan, const Vector& init, const SearchOptions& options = {}) {
  SearchOutcome out;
  out.candidates = candidate_ks(problem.n());
  const std::size_t count = out.candidates.size();
  out.traces.resize(count);

  auto branch = [&](std::size_t idx) {
    const int k = out.candidates[idx];
    const MixingMatrix W = build_topology(family, k);
    return run_teleportation(problem, noise, k, W, eta, T, plan, init, options.run);
  };

  const std::size_t jobs = static_cast<std::size_t>(std::max(1, options.jobs));
  for (std::size_t start = 0; start < count; start += jobs) {
    const std::size_t stop = std::min(count, start + jobs);
    if (jobs == 1) {
      out.traces[start] = branch(start);
      continue;
    }
    std::vector<std::future<RunTrace>> pending;
    for (std::size_t idx = start; idx < stop; ++idx) pending.push_back(std::async(std::launch::async, branch, idx));
    for (std::size_t idx = start; idx < stop; ++idx) out.traces[idx] = pending[idx - start].get();
  }

  out.values.reserve(count);
  for (const auto& trace : out.traces) out.values.push_back(criterion_value(trace, options.criterion));
  out.selected_index = 0;
  for (std::size_t idx = 1; idx < count; ++idx) {
    if (out.values[idx] < out.values[out.selected_index]) out.selected_index = idx;
  }
  out.selected_k = out.candidates[out.selected_index];
  out.selected_value = out.values[out.selected_index];
  return out;
}

}  // namespace teleport
