#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace teleport {

struct TraceRecord {
  long iteration = 0;
  double error = 0.0;            // (1/k) sum_m ||z_m - x*||^2
  double consensus_error = 0.0;  // (1/k) sum_m ||z_m - zbar||^2
  double grad_norm_sq = 0.0;     // ||grad f(zbar)||^2

  bool operator==(const TraceRecord&) const = default;
};

/// Per-iteration metrics of one run. Records start at iteration 0 (before
/// the first update) and normally run through T inclusive; a run stopped
/// early on divergence or on reaching a target is shorter and flagged.
struct RunTrace {
  std::string algorithm;
  int k = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  long horizon = 0;  // requested T
  std::vector<TraceRecord> records;
  Eigen::MatrixXd final_params;
  bool diverged = false;
  bool stopped_at_target = false;

  bool same_path(const RunTrace& other) const {
    return records == other.records && final_params.rows() == other.final_params.rows() &&
           final_params.cols() == other.final_params.cols() &&
           (final_params.array() == other.final_params.array()).all();
  }
};

}  // namespace teleport
