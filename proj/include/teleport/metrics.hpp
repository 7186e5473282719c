#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "teleport/error.hpp"
#include "teleport/trace.hpp"

namespace teleport {

/// (1/k) sum_m ||z_m - x*||^2 over the columns of Z.
inline double error_to_optimum(const Eigen::MatrixXd& Z, const Eigen::VectorXd& x_star) {
  if (Z.rows() != x_star.size() || Z.cols() == 0) {
    throw Error(ErrorKind::invalid_shape, "parameter matrix and optimum disagree in dimension");
  }
  return (Z.colwise() - x_star).colwise().squaredNorm().sum() / static_cast<double>(Z.cols());
}

/// (1/k) sum_m ||z_m - zbar||^2, zbar the column mean.
inline double consensus_error(const Eigen::MatrixXd& Z) {
  if (Z.cols() == 0) throw Error(ErrorKind::invalid_shape, "empty parameter matrix");
  const Eigen::VectorXd mean = Z.rowwise().mean();
  return (Z.colwise() - mean).colwise().squaredNorm().sum() / static_cast<double>(Z.cols());
}

/// First iteration whose error is <= target; nullopt if never reached.
inline std::optional<long> iterations_to_target(const RunTrace& trace, double target) {
  if (!(target > 0.0)) throw Error(ErrorKind::invalid_parameter, "target must be positive");
  for (const auto& r : trace.records) {
    if (r.error <= target) return r.iteration;
  }
  return std::nullopt;
}

/// Quantities shared by the rate expressions and the k-selection rules.
struct BoundInputs {
  long T = 1;
  double sigma2 = 0.0;
  double zeta2 = 0.0;
  double L = 1.0;
  double r0 = 0.0;  // f(xbar^(0)) - f*
  int n = 1;

  void validate() const {
    const bool finite = std::isfinite(sigma2) && std::isfinite(zeta2) && std::isfinite(L) && std::isfinite(r0);
    if (!finite || T < 1 || n < 1 || sigma2 < 0.0 || zeta2 < 0.0 || !(L > 0.0) || r0 < 0.0) {
      throw Error(ErrorKind::invalid_parameter, "bound inputs out of range");
    }
  }
};

/// Three additive terms of a rate bound with every hidden constant set to 1.
struct RateEstimate {
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double total = 0.0;
};

inline RateEstimate make_rate(double t1, double t2, double t3) { return {t1, t2, t3, t1 + t2 + t3}; }

/// Decentralized SGD over n nodes with spectral gap p.
inline RateEstimate rate_dsgd(const BoundInputs& in, double p) {
  in.validate();
  if (!(p > 0.0) || p > 1.0) throw Error(ErrorKind::invalid_parameter, "p must lie in (0, 1]");
  const double T = static_cast<double>(in.T);
  const double t1 = std::sqrt(in.L * in.r0 * in.sigma2 / (in.n * T));
  const double t2 = std::cbrt(in.L * in.L * in.r0 * in.r0 * (p * in.sigma2 + in.zeta2) * (1.0 - p) / (T * T * p * p));
  const double t3 = in.L * in.r0 / (T * p);
  return make_rate(t1, t2, t3);
}

/// Teleportation with k active nodes on a topology with spectral gap p_k.
inline RateEstimate rate_teleportation(const BoundInputs& in, int k, double p_k) {
  in.validate();
  if (!(p_k > 0.0) || p_k > 1.0) throw Error(ErrorKind::invalid_parameter, "p_k must lie in (0, 1]");
  if (k < 1 || k > in.n) throw Error(ErrorKind::invalid_parameter, "k must lie in 1..n");
  const double T = static_cast<double>(in.T);
  const double participation = in.n == 1 ? 0.0 : 1.0 - static_cast<double>(k - 1) / (in.n - 1);
  const double t1 = std::sqrt(in.L * in.r0 * (in.sigma2 + participation * in.zeta2) / (k * T));
  const double t2 = std::cbrt(in.L * in.L * in.r0 * in.r0 * (in.sigma2 + in.zeta2) * (1.0 - p_k) / (T * T * p_k));
  const double t3 = in.L * in.r0 / (T * p_k);
  return make_rate(t1, t2, t3);
}

}  // namespace teleport
