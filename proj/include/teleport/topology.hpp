#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "teleport/error.hpp"

namespace teleport {

enum class Family { ring, torus, complete, exponential };

inline std::string_view to_string(Family family) {
  switch (family) {
    case Family::ring: return "ring";
    case Family::torus: return "torus";
    case Family::complete: return "complete";
    case Family::exponential: return "exponential";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  if (name == "ring") return Family::ring;
  if (name == "torus") return Family::torus;
  if (name == "complete") return Family::complete;
  if (name == "exponential") return Family::exponential;
  throw Error(ErrorKind::invalid_parameter, "unknown topology '" + std::string(name) + "'");
}

/// True when every entry is nonnegative and every row and column sums to one
/// within `tol`.
inline bool is_doubly_stochastic(const Eigen::MatrixXd& weights, double tol = 1e-12) {
  if (weights.rows() != weights.cols() || weights.rows() == 0) return false;
  if ((weights.array() < 0.0).any()) return false;
  const double row_dev = (weights.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_dev = (weights.colwise().sum().array() - 1.0).abs().maxCoeff();
  return row_dev <= tol && col_dev <= tol;
}

/// Spectral gap p = 1 - s^2, where s is the operator norm of W - (1/k) 11^T.
///
/// For symmetric W this is 1 - max(|lambda_2|, |lambda_k|)^2. The operator
/// norm is what the contraction ||XW - Xbar||_F^2 <= (1 - p)||X - Xbar||_F^2
/// needs, so it is also used for the non-symmetric exponential graph.
/// Throws violates_assumption when the result is not in (0, 1].
inline double spectral_gap(const Eigen::MatrixXd& weights) {
  if (!is_doubly_stochastic(weights)) {
    throw Error(ErrorKind::violates_assumption, "mixing matrix is not doubly stochastic");
  }
  const auto k = weights.rows();
  if (k == 1) return 1.0;
  const Eigen::MatrixXd centered =
      weights - Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const double s = svd.singularValues()(0);
  const double p = 1.0 - s * s;
  if (!(p > 1e-12)) {
    throw Error(ErrorKind::violates_assumption,
                "spectral gap " + std::to_string(p) + " is not in (0, 1]; graph is disconnected or periodic");
  }
  return std::min(p, 1.0);
}

/// A k x k doubly stochastic gossip matrix together with its spectral gap.
class MixingMatrix {
 public:
  using Row = std::vector<std::pair<int, double>>;

  /// Validates `weights` and computes the spectral gap.
  MixingMatrix(Eigen::MatrixXd weights, Family family)
      : weights_(std::move(weights)), family_(family) {
    p_ = spectral_gap(weights_);
    rows_.resize(static_cast<std::size_t>(weights_.rows()));
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
      for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
        if (weights_(i, j) != 0.0) rows_[static_cast<std::size_t>(i)].emplace_back(static_cast<int>(j), weights_(i, j));
      }
    }
  }

  int k() const { return static_cast<int>(weights_.rows()); }
  double p() const { return p_; }
  Family family() const { return family_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double operator()(int i, int j) const { return weights_(i, j); }

  /// Nonzero entries of row `i`, ascending by column.
  const Row& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

  bool symmetric() const { return (weights_.array() == weights_.transpose().array()).all(); }

 private:
  Eigen::MatrixXd weights_;
  Family family_;
  double p_ = 1.0;
  std::vector<Row> rows_;
};

namespace detail {

inline void require_positive(int k) {
  if (k <= 0) throw Error(ErrorKind::invalid_dimension, "k must be >= 1, got " + std::to_string(k));
}

inline Eigen::MatrixXd circulant(int k, const std::vector<int>& offsets, double weight) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int off : offsets) {
      const int j = ((i + off) % k + k) % k;
      w(i, j) += weight;
    }
  }
  return w;
}

inline int ceil_log2(int k) {
  int e = 0;
  while ((1 << e) < k) ++e;
  return e;
}

}  // namespace detail

/// Ring with self-loops: weight 1/3 on offsets -1, 0, +1. k = 2 and k = 1
/// degenerate to uniform averaging.
inline MixingMatrix build_ring(int k) {
  detail::require_positive(k);
  if (k <= 2) return MixingMatrix(Eigen::MatrixXd::Constant(k, k, 1.0 / k), Family::ring);
  return MixingMatrix(detail::circulant(k, {-1, 0, 1}, 1.0 / 3.0), Family::ring);
}

inline MixingMatrix build_complete(int k) {
  detail::require_positive(k);
  return MixingMatrix(Eigen::MatrixXd::Constant(k, k, 1.0 / k), Family::complete);
}

/// Static exponential graph: node i sends to i + 2^j (mod k) for
/// j < ceil(log2 k), uniform weight 1 / (ceil(log2 k) + 1). Not symmetric.
inline MixingMatrix build_exponential(int k) {
  detail::require_positive(k);
  const int hops = detail::ceil_log2(k);
  std::vector<int> offsets{0};
  for (int j = 0; j < hops; ++j) offsets.push_back((1 << j) % k);
  return MixingMatrix(detail::circulant(k, offsets, 1.0 / (hops + 1)), Family::exponential);
}

/// sqrt(k) x sqrt(k) wrap-around grid, weight 1/5 on self and the four
/// neighbours. Coinciding neighbours (side <= 2) accumulate their weight.
inline MixingMatrix build_torus(int k) {
  detail::require_positive(k);
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
  if (side * side != k) {
    throw Error(ErrorKind::unsupported_dimension, "torus needs a perfect square k, got " + std::to_string(k));
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, k);
  auto id = [side](int r, int c) { return ((r + side) % side) * side + (c + side) % side; };
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int i = id(r, c);
      w(i, i) += 0.2;
      w(i, id(r - 1, c)) += 0.2;
      w(i, id(r + 1, c)) += 0.2;
      w(i, id(r, c - 1)) += 0.2;
      w(i, id(r, c + 1)) += 0.2;
    }
  }
  return MixingMatrix(std::move(w), Family::torus);
}

inline MixingMatrix build_topology(Family family, int k) {
  switch (family) {
    case Family::ring: return build_ring(k);
    case Family::torus: return build_torus(k);
    case Family::complete: return build_complete(k);
    case Family::exponential: return build_exponential(k);
  }
  throw Error(ErrorKind::invalid_parameter, "unknown topology family");
}

}  // namespace teleport
