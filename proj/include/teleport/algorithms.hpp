#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "teleport/error.hpp"
#include "teleport/metrics.hpp"
#include "teleport/problem.hpp"
#include "teleport/random.hpp"
#include "teleport/topology.hpp"
#include "teleport/trace.hpp"

namespace teleport {

/// One round's bijection between tokens (0..k-1, i.e. columns of the active
/// state) and the nodes (1..n) hosting them.
class ActiveAssignment {
 public:
  ActiveAssignment(long round, int n, std::vector<int> node_of_token)
      : round_(round), node_of_token_(std::move(node_of_token)), token_of_node_(static_cast<std::size_t>(n) + 1, -1) {
    for (std::size_t m = 0; m < node_of_token_.size(); ++m) {
      token_of_node_[static_cast<std::size_t>(node_of_token_[m])] = static_cast<int>(m);
    }
  }

  long round() const { return round_; }
  int k() const { return static_cast<int>(node_of_token_.size()); }
  int n() const { return static_cast<int>(token_of_node_.size()) - 1; }
  int node_of_token(int m) const { return node_of_token_[static_cast<std::size_t>(m)]; }
  const std::vector<int>& nodes() const { return node_of_token_; }

  /// Token held by `node` this round, or nullopt if the node is inactive.
  std::optional<int> token_of_node(int node) const {
    const int m = token_of_node_[static_cast<std::size_t>(node)];
    if (m < 0) return std::nullopt;
    return m;
  }

  bool is_active(int node) const { return token_of_node_[static_cast<std::size_t>(node)] >= 0; }

 private:
  long round_;
  std::vector<int> node_of_token_;
  std::vector<int> token_of_node_;
};

/// Samples k of n nodes without replacement (partial Fisher-Yates on the
/// round's active-set stream) and assigns tokens by a uniform permutation
/// drawn from the round's token stream. Pure in (n, k, round, plan).
inline ActiveAssignment sample_active_set(int n, int k, long round, const StreamPlan& plan) {
  if (k < 1 || k > n) {
    throw Error(ErrorKind::invalid_parameter, "active count k=" + std::to_string(k) + " not in 1..n=" + std::to_string(n));
  }
  Stream select = plan.stream(StreamPurpose::active_set, static_cast<std::uint64_t>(round));
  Stream permute = plan.stream(StreamPurpose::token_permutation, static_cast<std::uint64_t>(round));

  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 1);
  for (int m = 0; m < k; ++m) {
    std::uniform_int_distribution<int> pick(m, n - 1);
    std::swap(pool[static_cast<std::size_t>(m)], pool[static_cast<std::size_t>(pick(select))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  for (int m = k - 1; m > 0; --m) {
    std::uniform_int_distribution<int> pick(0, m);
    std::swap(pool[static_cast<std::size_t>(m)], pool[static_cast<std::size_t>(pick(permute))]);
  }
  return ActiveAssignment(round, n, std::move(pool));
}

namespace detail {

/// out = Z W^T, summing each column over the nonzeros of W's row in
/// ascending order.
inline void gossip_into(const Eigen::MatrixXd& Z, const MixingMatrix& W, Eigen::MatrixXd& out) {
  out.setZero(Z.rows(), Z.cols());
  for (int m = 0; m < W.k(); ++m) {
    for (const auto& [l, w] : W.row(m)) out.col(m).noalias() += w * Z.col(l);
  }
}

}  // namespace detail

/// Z W^T: column m becomes sum_l W(m, l) z_l. Preserves column means.
inline Eigen::MatrixXd gossip_step(const Eigen::MatrixXd& Z, const MixingMatrix& W) {
  if (Z.cols() != W.k()) {
    throw Error(ErrorKind::invalid_shape,
                "state has " + std::to_string(Z.cols()) + " columns, mixing matrix is " + std::to_string(W.k()));
  }
  Eigen::MatrixXd out;
  detail::gossip_into(Z, W, out);
  return out;
}

/// Early-termination controls for a run.
struct RunOptions {
  std::optional<double> stop_at_error;  // stop once error <= this
  double divergence_threshold = 1e12;
};

namespace detail {

/// Persistent gradient-noise streams, one per physical node (1..n).
class NodeStreams {
 public:
  NodeStreams(const StreamPlan& plan, int n) {
    streams_.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) streams_.push_back(plan.stream(StreamPurpose::gradient_noise, static_cast<std::uint64_t>(i)));
  }
  Stream& operator[](int node) { return streams_[static_cast<std::size_t>(node - 1)]; }

 private:
  std::vector<Stream> streams_;
};

/// y = x - eta * (grad f_node(x) + eps).
inline void local_sgd_step(const QuadraticProblem& problem, const NoiseModel& noise, int node, double eta,
                           const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> y, Vector& scratch,
                           Stream& stream) {
  scratch.noalias() = problem.curvature(node) * (x - problem.target(node));
  add_gradient_noise(noise, scratch, stream);
  y.noalias() = x - eta * scratch;
}

class Recorder {
 public:
  Recorder(RunTrace& trace, const QuadraticProblem& problem, const RunOptions& options)
      : trace_(trace), problem_(problem), options_(options) {}

  /// Appends metrics for Z at `iteration`; returns false when the run must stop.
  bool record(long iteration, const Eigen::MatrixXd& Z) {
    TraceRecord r;
    r.iteration = iteration;
    r.error = error_to_optimum(Z, problem_.optimum());
    r.consensus_error = consensus_error(Z);
    r.grad_norm_sq = problem_.gradient(Z.rowwise().mean()).squaredNorm();
    trace_.records.push_back(r);
    if (!std::isfinite(r.error) || !std::isfinite(r.grad_norm_sq) || r.error > options_.divergence_threshold) {
      trace_.diverged = true;
      return false;
    }
    if (options_.stop_at_error && r.error <= *options_.stop_at_error) {
      trace_.stopped_at_target = true;
      return false;
    }
    return true;
  }

 private:
  RunTrace& trace_;
  const QuadraticProblem& problem_;
  const RunOptions& options_;
};

inline void validate_run(const QuadraticProblem& problem, int k, double eta, long T, const Vector& init) {
  if (k < 1 || k > problem.n()) throw Error(ErrorKind::invalid_parameter, "k must lie in 1..n");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::invalid_parameter, "eta must be positive");
  if (T < 0) throw Error(ErrorKind::invalid_parameter, "T must be nonnegative");
  if (init.size() != problem.d()) throw Error(ErrorKind::invalid_shape, "init has wrong dimension");
}

inline RunTrace start_trace(std::string algorithm, int k, double eta, long T, const StreamPlan& plan) {
  RunTrace trace;
  trace.algorithm = std::move(algorithm);
  trace.k = k;
  trace.eta = eta;
  trace.seed = plan.seed;
  trace.horizon = T;
  trace.records.reserve(static_cast<std::size_t>(std::min<long>(T, 1L << 16)) + 1);
  return trace;
}

}  // namespace detail

/// Teleportation, token-indexed form: column m of Z is the parameter carried
/// by token m. Each round the tokens move to freshly sampled hosts, take one
/// SGD step with the host's stochastic gradient, and gossip over W_k.
inline RunTrace run_teleportation(const QuadraticProblem& problem, const NoiseModel& noise, int k,
                                  const MixingMatrix& W, double eta, long T, const StreamPlan& plan,
                                  const Vector& init, const RunOptions& options = {}) {
  detail::validate_run(problem, k, eta, T, init);
  if (W.k() != k) throw Error(ErrorKind::invalid_shape, "mixing matrix size differs from k");

  RunTrace trace = detail::start_trace("teleport", k, eta, T, plan);
  detail::Recorder recorder(trace, problem, options);
  detail::NodeStreams streams(plan, problem.n());

  Eigen::MatrixXd Z = init.replicate(1, k);
  Eigen::MatrixXd Y(problem.d(), k);
  Vector scratch(problem.d());
  bool running = recorder.record(0, Z);
  for (long t = 0; running && t < T; ++t) {
    const ActiveAssignment active = sample_active_set(problem.n(), k, t, plan);
    for (int m = 0; m < k; ++m) {
      const int node = active.node_of_token(m);
      detail::local_sgd_step(problem, noise, node, eta, Z.col(m), Y.col(m), scratch, streams[node]);
    }
    detail::gossip_into(Y, W, Z);
    running = recorder.record(t + 1, Z);
  }
  trace.final_params = std::move(Z);
  return trace;
}

/// Teleportation with overlapped communication: the next round's hosts are
/// sampled before mixing, and each current host sends its post-SGD parameter
/// straight to the next hosts adjacent in G_k. State is kept per node.
/// Produces the same trace as run_teleportation for the same plan.
inline RunTrace run_teleportation_overlap(const QuadraticProblem& problem, const NoiseModel& noise, int k,
                                          const MixingMatrix& W, double eta, long T, const StreamPlan& plan,
                                          const Vector& init, const RunOptions& options = {}) {
  detail::validate_run(problem, k, eta, T, init);
  if (W.k() != k) throw Error(ErrorKind::invalid_shape, "mixing matrix size differs from k");

  const int n = problem.n();
  const int d = problem.d();
  RunTrace trace = detail::start_trace("teleport-overlap", k, eta, T, plan);
  detail::Recorder recorder(trace, problem, options);
  detail::NodeStreams streams(plan, n);

  // Every node starts from init; inactive copies are stale and never read
  // before being overwritten on activation.
  std::vector<Vector> held(static_cast<std::size_t>(n) + 1, init);
  std::vector<Vector> sent(static_cast<std::size_t>(n) + 1, Vector(d));
  Vector scratch(d);
  Eigen::MatrixXd view(d, k);

  auto gather = [&](const ActiveAssignment& a) {
    for (int m = 0; m < k; ++m) view.col(m) = held[static_cast<std::size_t>(a.node_of_token(m))];
  };

  ActiveAssignment current = sample_active_set(n, k, 0, plan);
  gather(current);
  bool running = recorder.record(0, view);
  for (long t = 0; running && t < T; ++t) {
    ActiveAssignment next = sample_active_set(n, k, t + 1, plan);
    for (int node : current.nodes()) {
      const auto ni = static_cast<std::size_t>(node);
      detail::local_sgd_step(problem, noise, node, eta, held[ni], sent[ni], scratch, streams[node]);
    }
    for (int m = 0; m < k; ++m) {
      Vector& x = held[static_cast<std::size_t>(next.node_of_token(m))];
      x.setZero();
      for (const auto& [l, w] : W.row(m)) x.noalias() += w * sent[static_cast<std::size_t>(current.node_of_token(l))];
    }
    current = std::move(next);
    gather(current);
    running = recorder.record(t + 1, view);
  }
  trace.final_params = view;
  return trace;
}

/// Decentralized SGD: every node steps then gossips over W_n.
inline RunTrace run_dsgd(const QuadraticProblem& problem, const NoiseModel& noise, const MixingMatrix& W,
                         double eta, long T, const StreamPlan& plan, const Vector& init,
                         const RunOptions& options = {}) {
  const int n = problem.n();
  if (W.k() != n) throw Error(ErrorKind::invalid_shape, "mixing matrix must span all n nodes");
  detail::validate_run(problem, n, eta, T, init);

  RunTrace trace = detail::start_trace("dsgd", n, eta, T, plan);
  detail::Recorder recorder(trace, problem, options);
  detail::NodeStreams streams(plan, n);

  Eigen::MatrixXd X = init.replicate(1, n);
  Eigen::MatrixXd Y(problem.d(), n);
  Vector scratch(problem.d());
  bool running = recorder.record(0, X);
  for (long t = 0; running && t < T; ++t) {
    for (int i = 1; i <= n; ++i) {
      detail::local_sgd_step(problem, noise, i, eta, X.col(i - 1), Y.col(i - 1), scratch, streams[i]);
    }
    detail::gossip_into(Y, W, X);
    running = recorder.record(t + 1, X);
  }
  trace.final_params = std::move(X);
  return trace;
}

namespace detail {

inline void require_symmetric(const MixingMatrix& W) {
  if (!W.symmetric()) {
    throw Error(ErrorKind::invalid_parameter,
                "client sampling needs a symmetric mixing matrix to stay doubly stochastic");
  }
}

}  // namespace detail

/// Effective mixing matrix of one client-sampling round: edges between two
/// sampled nodes keep W_ij, mass on edges to unsampled nodes moves to the
/// self-loop, and unsampled nodes keep their parameter (identity row).
/// Doubly stochastic only for symmetric W, which is therefore required.
inline Eigen::MatrixXd client_sampling_weights(const MixingMatrix& W, const ActiveAssignment& active) {
  detail::require_symmetric(W);
  const int n = W.k();
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(n, n);
  for (int i = 1; i <= n; ++i) {
    if (!active.is_active(i)) continue;
    double self = 0.0;
    double lost = 0.0;
    for (const auto& [j, w] : W.row(i - 1)) {
      if (j == i - 1) self = w;
      else if (active.is_active(j + 1)) out(i - 1, j) = w;
      else lost += w;
    }
    out(i - 1, i - 1) = self + lost;
  }
  return out;
}

/// Decentralized SGD with client sampling: k sampled nodes step and gossip
/// over the induced subgraph of W_n (see client_sampling_weights).
inline RunTrace run_client_sampling(const QuadraticProblem& problem, const NoiseModel& noise,
                                    const MixingMatrix& W, int k, double eta, long T, const StreamPlan& plan,
                                    const Vector& init, const RunOptions& options = {}) {
  const int n = problem.n();
  if (W.k() != n) throw Error(ErrorKind::invalid_shape, "mixing matrix must span all n nodes");
  detail::require_symmetric(W);
  detail::validate_run(problem, k, eta, T, init);

  RunTrace trace = detail::start_trace("client-sampling", k, eta, T, plan);
  detail::Recorder recorder(trace, problem, options);
  detail::NodeStreams streams(plan, n);

  Eigen::MatrixXd X = init.replicate(1, n);
  Eigen::MatrixXd Y(problem.d(), n);
  Vector scratch(problem.d());
  bool running = recorder.record(0, X);
  for (long t = 0; running && t < T; ++t) {
    const ActiveAssignment active = sample_active_set(n, k, t, plan);
    for (int i : active.nodes()) {
      detail::local_sgd_step(problem, noise, i, eta, X.col(i - 1), Y.col(i - 1), scratch, streams[i]);
    }
    for (int i : active.nodes()) {
      const auto& row = W.row(i - 1);
      double lost = 0.0;
      for (const auto& [j, w] : row) {
        if (!active.is_active(j + 1)) lost += w;
      }
      auto x = X.col(i - 1);
      x.setZero();
      bool has_self = false;
      for (const auto& [j, w] : row) {
        if (j == i - 1) {
          x.noalias() += (w + lost) * Y.col(j);
          has_self = true;
        } else if (active.is_active(j + 1)) {
          x.noalias() += w * Y.col(j);
        }
      }
      if (!has_self && lost > 0.0) x.noalias() += lost * Y.col(i - 1);
    }
    running = recorder.record(t + 1, X);
  }
  trace.final_params = std::move(X);
  return trace;
}

}  // namespace teleport
