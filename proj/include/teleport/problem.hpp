#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include "teleport/error.hpp"
#include "teleport/random.hpp"

namespace teleport {

using Vector = Eigen::VectorXd;

/// Additive Gaussian gradient noise with E||eps||^2 = sigma2.
struct NoiseModel {
  double sigma2 = 0.0;
};

/// Synthetic heterogeneous quadratic over n nodes:
///   f_i(x) = 1/2 ||(i / sqrt(n)) (x - b_i)||^2,   f = (1/n) sum_i f_i.
/// Nodes are indexed 1..n. Immutable after construction.
class QuadraticProblem {
 public:
  QuadraticProblem(int n, int d, double zeta2, std::vector<Vector> targets)
      : n_(n), d_(d), zeta2_(zeta2), targets_(std::move(targets)) {
    if (n < 1 || d < 1) throw Error(ErrorKind::invalid_parameter, "n and d must be >= 1");
    if (static_cast<int>(targets_.size()) != n) throw Error(ErrorKind::invalid_shape, "need one target per node");
    weighted_target_sum_ = Vector::Zero(d);
    for (int i = 1; i <= n; ++i) {
      if (target(i).size() != d) throw Error(ErrorKind::invalid_shape, "target dimension mismatch");
      const double c = static_cast<double>(i) * i;
      curvature_sum_ += c;
      weighted_target_sum_ += c * target(i);
    }
    optimum_ = weighted_target_sum_ / curvature_sum_;
  }

  int n() const { return n_; }
  int d() const { return d_; }
  double zeta2() const { return zeta2_; }

  /// Smoothness constant max_i i^2 / n, attained at node n.
  double smoothness() const { return static_cast<double>(n_); }

  /// i^2 / n.
  double curvature(int i) const { return static_cast<double>(i) * i / n_; }

  const Vector& target(int i) const { return targets_[static_cast<std::size_t>(i - 1)]; }

  double local_value(int i, const Vector& x) const {
    check_node(i);
    return 0.5 * curvature(i) * (x - target(i)).squaredNorm();
  }

  double value(const Vector& x) const {
    double acc = 0.0;
    for (int i = 1; i <= n_; ++i) acc += local_value(i, x);
    return acc / n_;
  }

  /// grad f_i(x) = (i^2 / n)(x - b_i).
  Vector local_gradient(int i, const Vector& x) const {
    check_node(i);
    check_dim(x);
    return curvature(i) * (x - target(i));
  }

  /// grad f(x), from the precomputed aggregate sum_i i^2 b_i.
  Vector gradient(const Vector& x) const {
    check_dim(x);
    const double nn = static_cast<double>(n_) * n_;
    return (curvature_sum_ / nn) * x - weighted_target_sum_ / nn;
  }

  /// x* = (sum_i i^2 b_i) / (sum_i i^2).
  const Vector& optimum() const { return optimum_; }

  double optimal_value() const { return value(optimum_); }

  /// (1/n) sum_i ||grad f_i(x) - grad f(x)||^2 at a single point.
  double heterogeneity_at(const Vector& x) const {
    check_dim(x);
    const Vector g = gradient(x);
    double acc = 0.0;
    for (int i = 1; i <= n_; ++i) acc += (local_gradient(i, x) - g).squaredNorm();
    return acc / n_;
  }

  void check_node(int i) const {
    if (i < 1 || i > n_) {
      throw Error(ErrorKind::invalid_node, "node " + std::to_string(i) + " outside 1.." + std::to_string(n_));
    }
  }

 private:
  void check_dim(const Vector& x) const {
    if (x.size() != d_) throw Error(ErrorKind::invalid_shape, "vector dimension mismatch");
  }

  int n_;
  int d_;
  double zeta2_;
  std::vector<Vector> targets_;
  double curvature_sum_ = 0.0;
  Vector weighted_target_sum_;
  Vector optimum_;
};

/// Draws b_i ~ N(0, (zeta2 / i^2) I_d) in node order, coordinate order.
inline QuadraticProblem make_quadratic(int n, int d, double zeta2, Stream& stream) {
  if (n < 1 || d < 1) throw Error(ErrorKind::invalid_parameter, "n and d must be >= 1");
  if (!(zeta2 >= 0.0) || !std::isfinite(zeta2)) {
    throw Error(ErrorKind::invalid_parameter, "zeta2 must be finite and nonnegative");
  }
  std::vector<Vector> targets;
  targets.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    Vector b = Vector::Zero(d);
    if (zeta2 > 0.0) {
      boost::random::normal_distribution<double> normal(0.0, std::sqrt(zeta2) / i);
      for (int c = 0; c < d; ++c) b(c) = normal(stream);
    }
    targets.push_back(std::move(b));
  }
  return QuadraticProblem(n, d, zeta2, std::move(targets));
}

inline Vector local_gradient(const QuadraticProblem& problem, int i, const Vector& x) {
  return problem.local_gradient(i, x);
}

/// Appends N(0, (sigma2 / d) I_d) noise to `grad` in place, consuming d
/// draws from `stream` (none when sigma2 == 0).
inline void add_gradient_noise(const NoiseModel& noise, Eigen::Ref<Vector> grad, Stream& stream) {
  if (noise.sigma2 <= 0.0) return;
  boost::random::normal_distribution<double> normal(0.0, std::sqrt(noise.sigma2 / static_cast<double>(grad.size())));
  for (Eigen::Index c = 0; c < grad.size(); ++c) grad(c) += normal(stream);
}

/// grad f_i(x) + eps, eps ~ N(0, (sigma2 / d) I_d).
inline Vector stochastic_gradient(const QuadraticProblem& problem, const NoiseModel& noise, int i,
                                  const Vector& x, Stream& stream) {
  Vector g = problem.local_gradient(i, x);
  add_gradient_noise(noise, g, stream);
  return g;
}

inline const Vector& optimum(const QuadraticProblem& problem) { return problem.optimum(); }

inline double heterogeneity_at(const QuadraticProblem& problem, const Vector& x) {
  return problem.heterogeneity_at(x);
}

}  // namespace teleport
