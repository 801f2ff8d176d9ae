// Copyright 2026 The qmetro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "qmetro/detectors.hpp"
#include "qmetro/optics.hpp"
#include "test_support.hpp"

namespace qmetro {
namespace {

using testing::Gen;
using testing::max_abs;

/// Pascal's triangle, independent of the library's binomials.
std::vector<std::vector<double>> pascal(int rows) {
  std::vector<std::vector<double>> t(rows + 1);
  for (int n = 0; n <= rows; ++n) {
    t[n].assign(n + 1, 1.0);
    for (int k = 1; k < n; ++k) t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
  }
  return t;
}

void expect_valid(const DetectorPovm& povm) {
  EXPECT_GE(povm.theta().minCoeff(), 0.0);
  EXPECT_LE(povm.theta().maxCoeff(), 1.0);
  for (int k = 0; k <= povm.k_max(); ++k) EXPECT_NEAR(povm.theta().row(k).sum(), 1.0, 1e-9);
}

TEST(DetectorPovm, Validation) {
  RMatrix bad(2, 2);
  bad << 0.5, 0.6, 0.0, 1.0;
  EXPECT_THROW(DetectorPovm{bad}, std::invalid_argument);
  bad << 1.2, -0.2, 0.0, 1.0;
  EXPECT_THROW(DetectorPovm{bad}, std::invalid_argument);
  RMatrix good(2, 2);
  good << 1.0, 0.0, 0.3, 0.7;
  EXPECT_THROW(DetectorPovm(good, {"only one"}), std::invalid_argument);
  EXPECT_NO_THROW(DetectorPovm(good, {"a", "b"}));
}

TEST(IdealPnr, DeltaWithSaturationBucket) {
  const auto povm = ideal_pnr_povm(10, 12);
  expect_valid(povm);
  EXPECT_EQ(povm.outcomes(), 11);
  EXPECT_EQ(povm.theta()(3, 3), 1.0);
  EXPECT_EQ(povm.theta().row(3).sum(), 1.0);
  EXPECT_EQ(povm.theta()(12, 10), 1.0);
  EXPECT_EQ(povm.theta()(11, 10), 1.0);
  EXPECT_THROW(ideal_pnr_povm(5, 4), std::invalid_argument);
}

TEST(ClickPovm, CoarseGrainsPnr) {
  const auto click = click_povm_from(ideal_pnr_povm(6, 6));
  expect_valid(click);
  ASSERT_EQ(click.outcomes(), 2);
  for (int k = 0; k <= 6; ++k) EXPECT_EQ(click.theta()(k, 0), k == 0 ? 1.0 : 0.0);

  const double eta = 0.37;
  const auto lossy = click_povm_from(efficiency_povm(eta, 8, 8));
  expect_valid(lossy);
  for (int k = 0; k <= 8; ++k) EXPECT_NEAR(lossy.theta()(k, 0), std::pow(1 - eta, k), 1e-15);
}

TEST(EfficiencyPovm, BinomialRows) {
  EXPECT_LT(max_abs(efficiency_povm(1.0, 7, 7).theta() - ideal_pnr_povm(7, 7).theta()), 1e-15);
  const auto half = efficiency_povm(0.5, 4, 4);
  EXPECT_NEAR(half.theta()(2, 0), 0.25, 1e-15);
  EXPECT_NEAR(half.theta()(2, 1), 0.5, 1e-15);
  EXPECT_NEAR(half.theta()(2, 2), 0.25, 1e-15);

  const auto t = pascal(12);
  const double eta = 0.926;
  const auto povm = efficiency_povm(eta, 5, 12);
  expect_valid(povm);
  for (int k = 0; k <= 12; ++k) {
    std::vector<double> row(6, 0.0);
    for (int n = 0; n <= k; ++n) row[std::min(n, 5)] += t[k][n] * std::pow(eta, n) * std::pow(1 - eta, k - n);
    for (int n = 0; n <= 5; ++n) EXPECT_NEAR(povm.theta()(k, n), row[n], 1e-13);
  }
  EXPECT_THROW(efficiency_povm(1.1, 3, 3), std::invalid_argument);
}

TEST(ProbeMatrix, PoissonRows) {
  ProbeSet probes{{0.0, 1.0, 9.0}, {1, 1, 1}};
  const RMatrix c = coherent_probe_matrix(probes, 9);
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c.row(0).sum(), 1.0);
  EXPECT_NEAR(c(1, 1), std::exp(-1.0), 1e-15);
  double term = std::exp(-9.0), head = 0.0;
  for (int k = 0; k <= 9; ++k) {
    head += term;
    term *= 9.0 / (k + 1);
  }
  const RVector tail = poisson_tail(probes, 9);
  EXPECT_NEAR(tail(2), 1.0 - head, 1e-13);
  EXPECT_GT(tail(2), 0.4);
  probes.mean_photons[0] = -1.0;
  EXPECT_THROW(probes.validate(), std::invalid_argument);
  EXPECT_THROW(coherent_probe_matrix(probes, 3), std::invalid_argument);
}

TEST(ProbeSet, GeometricLadder) {
  const auto p = ProbeSet::geometric(0.1, 12.8, 8, 100);
  ASSERT_EQ(p.mean_photons.size(), 8u);
  for (std::size_t m = 0; m < 8; ++m) EXPECT_NEAR(p.mean_photons[m], 0.1 * std::pow(2.0, m), 1e-12);
}

TEST(JointOutcomes, VacuumAlwaysDark) {
  const FockCutoff c(4);
  const auto vac = TwoModeState::pure(tensor(fock_vector(0, c), fock_vector(0, c)), c);
  const auto dist = joint_outcome_probabilities(vac, efficiency_povm(0.3, 4, 6), click_povm_from(ideal_pnr_povm(4, 4)));
  EXPECT_EQ(dist.probs(0, 0), 1.0);
  EXPECT_EQ(dist.total(), 1.0);
}

TEST(JointOutcomes, CoincidenceAtZeroPhase) {
  const double z = 0.2;
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(z);
  cfg.cutoff = FockCutoff(6);
  const auto state = evolve_pipeline(cfg);
  const auto pnr = ideal_pnr_povm(6, 6);
  const auto dist = joint_outcome_probabilities(state, pnr, pnr);
  EXPECT_NEAR(dist.probs(1, 1), (1 - z * z) * z * z, 1e-15);
  EXPECT_NEAR(dist.probs(0, 0), 1 - z * z, 1e-15);
}

TEST(JointOutcomes, SumsToOneMinusTails) {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(0.6);
  cfg.loss = {0.9, 0.8, 0.7, 0.95};
  cfg.phase = 0.4;
  cfg.cutoff = FockCutoff(8);
  const auto state = evolve_pipeline(cfg);
  const auto dist = joint_outcome_probabilities(state, efficiency_povm(0.9, 4, 8), ideal_pnr_povm(8, 8));
  EXPECT_NEAR(dist.total(), state.trace(), 1e-13);
  EXPECT_GE(dist.total(), 1.0 - tmsv_tail_bound(0.6, FockCutoff(3)));
}

TEST(JointOutcomes, SignalMarginalMatchesPartialTrace) {
  Gen gen(41);
  const FockCutoff c(4);
  const auto state = TwoModeState::density(gen.density(c.joint_dim()), c);
  const auto povm_s = efficiency_povm(0.7, 3, 4);
  const auto dist = joint_outcome_probabilities(state, povm_s, efficiency_povm(0.4, 4, 4));
  const CMatrix marginal = partial_trace(state.density_matrix(), Mode::idler, c);
  for (int j = 0; j < povm_s.outcomes(); ++j) {
    double expected = 0.0;
    for (int m = 0; m < c.dim(); ++m) expected += marginal(m, m).real() * povm_s.theta()(m, j);
    EXPECT_NEAR(dist.probs.row(j).sum(), expected, 1e-14);
  }
}

TEST(JointOutcomes, ClickProbabilityIsOneMinusVacuum) {
  Gen gen(42);
  const FockCutoff c(4);
  const auto click = click_povm_from(ideal_pnr_povm(4, 4));
  for (int trial = 0; trial < 10; ++trial) {
    const auto state = TwoModeState::density(gen.density(c.joint_dim()), c);
    const auto dist = joint_outcome_probabilities(state, click, click);
    const CMatrix ms = partial_trace(state.density_matrix(), Mode::idler, c);
    EXPECT_NEAR(dist.probs.row(1).sum(), 1.0 - ms(0, 0).real(), 1e-12);
  }
}

TEST(JointOutcomes, PovmMustCoverCutoff) {
  const FockCutoff c(6);
  const auto vac = TwoModeState::pure(tensor(fock_vector(0, c), fock_vector(0, c)), c);
  EXPECT_THROW(joint_outcome_probabilities(vac, ideal_pnr_povm(3, 5), ideal_pnr_povm(3, 6)), CutoffMismatch);
}

}  // namespace
}  // namespace qmetro
