#include <gtest/gtest.h>

#include <numeric>

#include "teleport/tuning.hpp"

using namespace teleport;

namespace {

/// Inputs whose selection ratio T (sigma2 + zeta2) / (L r0) equals `ratio`.
BoundInputs with_ratio(double ratio, int n) {
  BoundInputs in;
  in.T = 1000;
  in.sigma2 = ratio;
  in.zeta2 = 0.0;
  in.L = 1000.0;
  in.r0 = 1.0;
  in.n = n;
  return in;
}

}  // namespace

TEST(Candidates, Examples) {
  EXPECT_EQ(candidate_ks(100), (std::vector<int>{1, 2, 4, 8, 16, 32, 100}));
  EXPECT_EQ(branch_gradient_budget(100), 63);
  EXPECT_EQ(candidate_ks(1), (std::vector<int>{1}));
  EXPECT_EQ(candidate_ks(7), (std::vector<int>{1, 2, 4, 7}));
  EXPECT_EQ(branch_gradient_budget(7), 7);
  EXPECT_EQ(candidate_ks(3), (std::vector<int>{1, 2, 3}));
  EXPECT_THROW(candidate_ks(0), Error);
}

TEST(Candidates, BudgetAndCoverSmallN) {
  for (int n = 2; n <= 600; ++n) {
    const auto powers = power_of_two_candidates(n);
    EXPECT_LE(std::accumulate(powers.begin(), powers.end(), 0L), n);
    for (int best = 1; best < n; ++best) {
      bool covered = false;
      for (int k : powers) covered = covered || (4 * k > best && k <= best);
      EXPECT_TRUE(covered) << "n=" << n << " k*=" << best;
    }
  }
}

TEST(TheoreticalK, RingFormula) {
  EXPECT_EQ(theoretical_k_ring(with_ratio(0.0, 100)), 1);
  EXPECT_EQ(theoretical_k_ring(with_ratio(128.0, 100)), 2);
  EXPECT_EQ(theoretical_k_ring(with_ratio(129.0, 100)), 3);
  EXPECT_EQ(theoretical_k_ring(with_ratio(1e14, 10)), 10);
  EXPECT_EQ(theoretical_k_ring(with_ratio(2187.0, 100)), 3);  // 3^7
  EXPECT_EQ(theoretical_k_ring(with_ratio(0.3, 100)), 1);
}

TEST(TheoreticalK, ExponentialFormula) {
  EXPECT_EQ(theoretical_k_exp(with_ratio(0.0, 100)), 1);
  EXPECT_EQ(theoretical_k_exp(with_ratio(8.0, 100)), 2);
  EXPECT_EQ(theoretical_k_exp(with_ratio(0.5, 100)), 1);
  EXPECT_EQ(theoretical_k_exp(with_ratio(27.0, 100)), 3);
  EXPECT_EQ(theoretical_k_exp(with_ratio(1e14, 10)), 10);
  EXPECT_EQ(theoretical_k_exp(with_ratio(1.5, 100)), 2);  // ceil(1.5) = 2, ceil(1.14) = 2
}

TEST(TheoreticalK, DegenerateInputs) {
  BoundInputs in = with_ratio(50.0, 20);
  in.r0 = 0.0;
  EXPECT_EQ(theoretical_k_ring(in), 1);
  EXPECT_EQ(theoretical_k_exp(in), 1);
  in.L = 0.0;
  EXPECT_THROW(theoretical_k_ring(in), Error);
}

TEST(TheoreticalK, MonotoneAndInRange) {
  for (int n : {1, 5, 100}) {
    int prev_ring = 1, prev_exp = 1;
    for (double ratio = 0.0; ratio < 1e9; ratio = ratio * 1.7 + 0.01) {
      const int ring = theoretical_k_ring(with_ratio(ratio, n));
      const int exp = theoretical_k_exp(with_ratio(ratio, n));
      EXPECT_GE(ring, prev_ring);
      EXPECT_GE(exp, prev_exp);
      EXPECT_GE(ring, 1);
      EXPECT_LE(ring, n);
      EXPECT_GE(exp, 1);
      EXPECT_LE(exp, n);
      prev_ring = ring;
      prev_exp = exp;
    }
  }
  // growing T at fixed noise
  BoundInputs in = with_ratio(3.0, 64);
  int prev = theoretical_k_ring(in);
  for (long T = 1000; T < 100000000; T *= 3) {
    in.T = T;
    EXPECT_GE(theoretical_k_ring(in), prev);
    prev = theoretical_k_ring(in);
  }
}

TEST(SearchK, StationaryStartTiesToSmallestK) {
  Stream s(4);
  const auto p = make_quadratic(20, 3, 0.0, s);
  const auto outcome = search_k(p, NoiseModel{0.0}, Family::ring, 0.01, 50, StreamPlan{2}, p.optimum());
  EXPECT_EQ(outcome.candidates, candidate_ks(20));
  EXPECT_EQ(outcome.selected_k, 1);
  for (double v : outcome.values) EXPECT_EQ(v, 0.0);
}

TEST(SearchK, DeterministicAndParallelSafe) {
  Stream s(5);
  const auto p = make_quadratic(30, 4, 10.0, s);
  SearchOptions serial;
  SearchOptions parallel;
  parallel.jobs = 4;
  const Vector init = Vector::Ones(4);
  const auto a = search_k(p, NoiseModel{10.0}, Family::exponential, 0.005, 200, StreamPlan{9}, init, serial);
  const auto b = search_k(p, NoiseModel{10.0}, Family::exponential, 0.005, 200, StreamPlan{9}, init, parallel);
  EXPECT_EQ(a.selected_k, b.selected_k);
  EXPECT_EQ(a.values, b.values);
  for (std::size_t i = 0; i < a.traces.size(); ++i) EXPECT_TRUE(a.traces[i].same_path(b.traces[i]));
}

TEST(SearchK, CriteriaScoreTraces) {
  RunTrace trace;
  trace.records = {{0, 4.0, 0.0, 2.0}, {1, 1.0, 0.0, 1.0}, {2, 0.5, 0.0, 0.0}};
  EXPECT_DOUBLE_EQ(criterion_value(trace, Criterion::min_mean_grad_norm), 1.0);
  EXPECT_DOUBLE_EQ(criterion_value(trace, Criterion::min_final_error), 0.5);
  trace.diverged = true;
  EXPECT_TRUE(std::isinf(criterion_value(trace, Criterion::min_final_error)));
  EXPECT_EQ(parse_criterion("theory"), Criterion::min_mean_grad_norm);
  EXPECT_EQ(parse_criterion("min-final-error"), Criterion::min_final_error);
}

TEST(SearchK, TorusRejectsNonSquareCandidates) {
  Stream s(6);
  const auto p = make_quadratic(8, 2, 0.0, s);
  EXPECT_THROW(search_k(p, {}, Family::torus, 0.01, 5, StreamPlan{}, Vector::Ones(2)), Error);
}
