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

#include <unsupported/Eigen/MatrixFunctions>

#include "qmetro/optics.hpp"
#include "test_support.hpp"

namespace qmetro {
namespace {

using std::numbers::pi;
using testing::Gen;
using testing::max_abs;

/// exp(i phi (a^dag b + a b^dag)) with cos(phi) = sqrt(eta). Blocks with
/// n_s + n_i <= max_photons are invariant under the generator, so they come
/// out exact despite the truncation.
CMatrix splitter_by_exponential(double eta, FockCutoff c) {
  const CMatrix a = annihilation(c);
  const CMatrix one = CMatrix::Identity(c.dim(), c.dim());
  const CMatrix as = tensor(a, one);
  const CMatrix ai = tensor(one, a);
  const CMatrix h = as.adjoint() * ai + as * ai.adjoint();
  const double phi = std::acos(std::sqrt(eta));
  return (Complex(0.0, phi) * h).exp();
}

bool in_sector(FockCutoff c, int j) { return c.signal_of(j) + c.idler_of(j) <= c.max_photons(); }

double mean_number(const CMatrix& rho, Mode m, FockCutoff c) {
  return (number_operator(m, c) * rho).trace().real();
}

InterferometerConfig random_config(Gen& gen, int cutoff) {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(gen.uniform(0.05, 0.5));
  cfg.loss = {gen.uniform(0.5, 1.0), gen.uniform(0.5, 1.0), gen.uniform(0.5, 1.0), gen.uniform(0.5, 1.0)};
  cfg.phase = gen.uniform(-pi, 3 * pi);
  cfg.cutoff = FockCutoff(cutoff);
  return cfg;
}

TEST(Squeezing, MeanPhotonsRoundTrip) {
  EXPECT_EQ(SqueezingParams(0.0).mean_photons(), 0.0);
  EXPECT_NEAR(SqueezingParams(0.5).mean_photons(), 2.0 / 3.0, 1e-15);
  const auto s = SqueezingParams::from_mean_photons(3.631e-3);
  EXPECT_NEAR(s.z(), 4.26e-2, 5e-5);
  EXPECT_NEAR(s.mean_photons(), 3.631e-3, 1e-15);
  double previous = -1.0;
  for (double z = 0.0; z < 0.99; z += 0.01) {
    const double n = SqueezingParams(z).mean_photons();
    EXPECT_GT(n, previous);
    previous = n;
  }
  EXPECT_THROW(SqueezingParams(1.0), std::invalid_argument);
  EXPECT_THROW(SqueezingParams(-0.1), std::invalid_argument);
}

TEST(Tmsv, VacuumAtZeroSqueezing) {
  const FockCutoff c(5);
  const auto psi = tmsv_state(SqueezingParams(0.0), c);
  EXPECT_EQ(psi.amplitude(0, 0), Complex(1.0));
  EXPECT_DOUBLE_EQ(psi.trace(), 1.0);
}

TEST(Tmsv, AmplitudeAtTwoTwo) {
  const auto psi = tmsv_state(SqueezingParams(0.5), FockCutoff(10));
  EXPECT_NEAR(psi.amplitude(2, 2).real(), std::sqrt(0.75) * 0.25, 1e-16);
  EXPECT_EQ(psi.amplitude(2, 3), Complex(0.0));
}

TEST(Tmsv, NormDeficitWithinTailBound) {
  for (int cut : {1, 3, 6, 10}) {
    for (double z : {0.1, 0.3, 0.6, 0.9}) {
      const FockCutoff c(cut);
      const double deficit = 1.0 - tmsv_state(SqueezingParams(z), c).trace();
      double tail = 0.0;
      for (int n = cut + 1; n < 5000; ++n) tail += (1 - z * z) * std::pow(z, 2 * n);
      EXPECT_NEAR(tmsv_tail_bound(z, c), tail, 1e-14);
      EXPECT_LE(deficit, tmsv_tail_bound(z, c) + 1e-15);
    }
  }
}

TEST(BeamSplitter, TransmissivityOneIsIdentity) {
  const FockCutoff c(5);
  EXPECT_LT(max_abs(beam_splitter_unitary(1.0, c).matrix() - CMatrix::Identity(c.joint_dim(), c.joint_dim())),
            1e-15);
}

TEST(BeamSplitter, HongOuMandel) {
  const FockCutoff c(4);
  const CVector out = beam_splitter_unitary(0.5, c).matrix() * tensor(fock_vector(1, c), fock_vector(1, c));
  EXPECT_LT(std::abs(out(c.joint_index(1, 1))), 1e-15);
  EXPECT_NEAR(std::abs(out(c.joint_index(2, 0))), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(std::abs(out(c.joint_index(0, 2))), std::sqrt(0.5), 1e-15);
}

TEST(BeamSplitter, SinglePhotonSplitsEvenly) {
  const FockCutoff c(4);
  const CVector out = beam_splitter_unitary(0.5, c).matrix() * tensor(fock_vector(1, c), fock_vector(0, c));
  EXPECT_NEAR(std::abs(out(c.joint_index(1, 0))), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(out(c.joint_index(0, 1))), 1 / std::sqrt(2.0), 1e-15);
  // Reflection picks up a factor i.
  EXPECT_NEAR(out(c.joint_index(0, 1)).imag(), 1 / std::sqrt(2.0), 1e-15);
}

TEST(BeamSplitter, MatchesMatrixExponentialOnCompleteBlocks) {
  const FockCutoff c(7);
  for (double eta : {0.0, 0.1, 0.5, 0.77, 1.0}) {
    const CMatrix u = beam_splitter_unitary(eta, c).matrix();
    const CMatrix oracle = splitter_by_exponential(eta, c);
    double worst = 0.0;
    for (int a = 0; a < c.joint_dim(); ++a)
      for (int b = 0; b < c.joint_dim(); ++b)
        if (in_sector(c, a) && in_sector(c, b)) worst = std::max(worst, std::abs(u(a, b) - oracle(a, b)));
    EXPECT_LT(worst, 1e-12) << "eta=" << eta;
  }
}

TEST(BeamSplitter, ConservesTotalPhotonNumberExactly) {
  const FockCutoff c(6);
  const CMatrix u = beam_splitter_unitary(0.3, c).matrix();
  EXPECT_LT(unitarity_error(u), 1e-10);
  for (int a = 0; a < c.joint_dim(); ++a)
    for (int b = 0; b < c.joint_dim(); ++b) {
      const int na = c.signal_of(a) + c.idler_of(a);
      const int nb = c.signal_of(b) + c.idler_of(b);
      if (na != nb) {
        EXPECT_EQ(u(a, b), Complex(0.0));
      }
    }
}

TEST(BeamSplitter, ElementAgreesWithUnitary) {
  const FockCutoff c(5);
  const CMatrix u = beam_splitter_unitary(0.35, c).matrix();
  for (int n = 0; n <= 5; ++n)
    for (int m = 0; n + m <= 5; ++m)
      for (int p = 0; p <= n + m; ++p)
        EXPECT_LT(std::abs(u(c.joint_index(p, n + m - p), c.joint_index(n, m)) -
                           beam_splitter_element(0.35, p, n + m - p, n, m)),
                  1e-15);
  EXPECT_THROW(beam_splitter_unitary(1.2, c), std::invalid_argument);
}

TEST(PhaseShifter, Diagonal) {
  const FockCutoff c(4);
  EXPECT_LT(max_abs(phase_shifter(0.0, Mode::signal, c).matrix() - CMatrix::Identity(25, 25)), 1e-16);
  const CMatrix p = phase_shifter(pi, Mode::signal, c).matrix();
  EXPECT_NEAR(p(c.joint_index(1, 3), c.joint_index(1, 3)).real(), -1.0, 1e-15);
  const CMatrix q = phase_shifter(pi / 2, Mode::idler, c).matrix();
  EXPECT_NEAR(q(c.joint_index(0, 2), c.joint_index(0, 2)).real(), -1.0, 1e-15);
  EXPECT_NEAR(q(c.joint_index(2, 0), c.joint_index(2, 0)).real(), 1.0, 1e-15);
}

TEST(Loss, KrausSetIsComplete) {
  for (double eta : {0.0, 0.25, 0.5, 0.8, 1.0}) {
    const auto k = pure_loss_kraus(eta, FockCutoff(8));
    EXPECT_LT(kraus_completeness_error(k), 1e-12);
  }
}

TEST(Loss, DilationAgreesWithKraus) {
  Gen gen(21);
  const FockCutoff c(4);
  for (double eta : {0.0, 0.25, 0.5, 0.8, 1.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto state = TwoModeState::density(gen.density(c.joint_dim()), c);
      const Mode mode = trial % 2 ? Mode::signal : Mode::idler;
      const CMatrix a = loss_channel(state, mode, eta).density_matrix();
      const CMatrix b = loss_channel_kraus(state, mode, eta).density_matrix();
      EXPECT_LT(max_abs(a - b), 1e-12);
      EXPECT_NEAR(a.trace().real(), 1.0, 1e-12);
      EXPECT_LT(hermiticity_error(a), 1e-12);
      EXPECT_NO_THROW(check_density(a));
    }
  }
}

TEST(Loss, UnitTransmissivityIsIdentity) {
  Gen gen(22);
  const FockCutoff c(3);
  const CMatrix rho = gen.density(c.joint_dim());
  const auto out = loss_channel(TwoModeState::density(rho, c), Mode::signal, 1.0);
  EXPECT_LT(max_abs(out.density_matrix() - rho), 1e-14);
}

TEST(Loss, ZeroTransmissivityEmptiesMode) {
  Gen gen(23);
  const FockCutoff c(3);
  const CMatrix rho = gen.density(c.joint_dim());
  const CMatrix out = loss_channel(TwoModeState::density(rho, c), Mode::signal, 0.0).density_matrix();
  const CMatrix marginal = partial_trace(out, Mode::idler, c);
  EXPECT_NEAR(marginal(0, 0).real(), 1.0, 1e-14);
  EXPECT_LT(max_abs(partial_trace(out, Mode::signal, c) - partial_trace(rho, Mode::signal, c)), 1e-14);
}

TEST(Loss, SinglePhotonMarginal) {
  const FockCutoff c(3);
  const CVector one = tensor(fock_vector(1, c), fock_vector(0, c));
  for (double eta : {0.1, 0.6}) {
    const auto out = loss_channel(TwoModeState::pure(one, c), Mode::signal, eta);
    const CMatrix m = partial_trace(out.density_matrix(), Mode::idler, c);
    EXPECT_NEAR(m(0, 0).real(), 1 - eta, 1e-15);
    EXPECT_NEAR(m(1, 1).real(), eta, 1e-15);
  }
}

TEST(Loss, ScalesMeanPhotonNumberByTransmissivity) {
  Gen gen(24);
  const FockCutoff c(4);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix rho = gen.density(c.joint_dim());
    const double eta = gen.uniform();
    const CMatrix out = loss_channel(TwoModeState::density(rho, c), Mode::idler, eta).density_matrix();
    EXPECT_NEAR(mean_number(out, Mode::idler, c), eta * mean_number(rho, Mode::idler, c), 1e-10);
    EXPECT_NEAR(mean_number(out, Mode::signal, c), mean_number(rho, Mode::signal, c), 1e-10);
  }
  EXPECT_THROW(loss_channel(TwoModeState::density(CMatrix::Identity(25, 25) / 25.0, c), Mode::idler, -0.1),
               std::invalid_argument);
}

TEST(Loss, PreparationScalesSourcePhotonNumberPerArm) {
  const FockCutoff c(10);
  const auto psi = tmsv_state(SqueezingParams(0.3), c);
  const double before = mean_number(psi.density_matrix(), Mode::signal, c);
  const auto after = loss_channel(loss_channel(psi, Mode::signal, 0.7), Mode::idler, 0.4);
  EXPECT_NEAR(mean_number(after.density_matrix(), Mode::signal, c), 0.7 * before, 1e-10);
  EXPECT_NEAR(mean_number(after.density_matrix(), Mode::idler, c), 0.4 * before, 1e-10);
}

TEST(Pipeline, VacuumStaysVacuum) {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(0.0);
  cfg.loss = {0.3, 0.6, 0.7, 0.9};
  cfg.phase = 1.234;
  cfg.cutoff = FockCutoff(4);
  const CMatrix rho = evolve_pipeline(cfg).density_matrix();
  CMatrix vac = CMatrix::Zero(25, 25);
  vac(0, 0) = 1.0;
  EXPECT_LT(max_abs(rho - vac), 1e-15);
  EXPECT_LT(max_abs(analytic_phase_derivative(cfg)), 1e-15);
}

TEST(Pipeline, LosslessOutputIsPureWithEvenTotalNumber) {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(0.4);
  cfg.cutoff = FockCutoff(8);
  for (double theta : {0.0, 0.7, pi / 2}) {
    cfg.phase = theta;
    const CMatrix rho = evolve_pipeline(cfg).density_matrix();
    const double tr = rho.trace().real();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
    EXPECT_GE(es.eigenvalues().maxCoeff(), (1 - 1e-9) * tr);
    for (int j = 0; j < cfg.cutoff.joint_dim(); ++j) {
      const int n = cfg.cutoff.signal_of(j) + cfg.cutoff.idler_of(j);
      if (n % 2) {
        EXPECT_LT(std::abs(rho(j, j)), 1e-16);
      }
    }
  }
}

TEST(Pipeline, PopulationsAgainstDenseContraction) {
  // Independent construction at a smaller cutoff: exponential beam splitters,
  // explicit phase, amplitudes written out by hand.
  const double z = 0.3;
  const FockCutoff small(6);
  CVector psi = CVector::Zero(small.joint_dim());
  for (int n = 0; 2 * n <= small.max_photons(); ++n)
    psi(small.joint_index(n, n)) = std::sqrt(1 - z * z) * std::pow(z, n);
  const CMatrix bs = splitter_by_exponential(0.5, small);
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(z);
  cfg.cutoff = FockCutoff(10);
  for (double theta : {pi / 2, 0.9}) {
    CMatrix phase = CMatrix::Zero(small.joint_dim(), small.joint_dim());
    for (int j = 0; j < small.joint_dim(); ++j) phase(j, j) = std::polar(1.0, small.signal_of(j) * theta);
    const CVector out = bs * phase * bs * psi;
    const auto sigma4 = evolve_pipeline(cfg.with_phase(theta));
    EXPECT_NEAR(sigma4.population(1, 1), std::norm(out(small.joint_index(1, 1))), 1e-15);
    for (int s = 0; s <= 6; ++s)
      for (int i = 0; s + i <= 6; ++i)
        EXPECT_NEAR(sigma4.population(s, i), std::norm(out(small.joint_index(s, i))), 1e-15);
  }
}

TEST(Pipeline, SourceTraceWithinTail) {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams(0.5);
  cfg.loss = {0.8, 0.9, 1.0, 1.0};
  cfg.cutoff = FockCutoff(10);
  const auto sigma2 = prepare_source(cfg);
  EXPECT_LE(sigma2.trace(), 1.0 + 1e-12);
  EXPECT_GE(sigma2.trace(), 1.0 - tmsv_tail_bound(0.5, FockCutoff(5)) - 1e-12);
  EXPECT_NO_THROW(check_density(sigma2.density_matrix()));
}

TEST(Pipeline, DerivativeMatchesCentralDifference) {
  Gen gen(25);
  const double h = 1e-5;
  for (int trial = 0; trial < 8; ++trial) {
    const auto cfg = random_config(gen, 6);
    const CMatrix analytic = analytic_phase_derivative(cfg);
    const CMatrix fd = (evolve_pipeline(cfg.with_phase(cfg.phase + h)).density_matrix() -
                        evolve_pipeline(cfg.with_phase(cfg.phase - h)).density_matrix()) /
                       (2 * h);
    EXPECT_LT(max_abs(analytic - fd) / max_abs(analytic), 1e-6);
    EXPECT_LT(std::abs(analytic.trace()), 1e-12);
    EXPECT_LT(hermiticity_error(analytic), 1e-12);
  }
}

TEST(Pipeline, RelabelingSymmetry) {
  Gen gen(26);
  for (int trial = 0; trial < 5; ++trial) {
    const auto cfg = random_config(gen, 6);
    InterferometerConfig swapped = cfg;
    swapped.loss = cfg.loss.swapped();
    swapped.phase = -cfg.phase;
    const auto a = evolve_pipeline(cfg);
    const auto b = evolve_pipeline(swapped);
    for (int j = 0; j <= 6; ++j)
      for (int k = 0; j + k <= 6; ++k) EXPECT_NEAR(a.population(j, k), b.population(k, j), 1e-14);
  }
}

TEST(Pipeline, ReportedPhaseIsReduced) {
  InterferometerConfig cfg;
  cfg.phase = -0.5;
  EXPECT_NEAR(cfg.reported_phase(), 2 * pi - 0.5, 1e-15);
  EXPECT_EQ(cfg.phase, -0.5);
  EXPECT_NEAR(cfg.with_phase(7.0).reported_phase(), 7.0 - 2 * pi, 1e-15);
}

TEST(PureEvolution, RejectsLoss) {
  InterferometerConfig cfg;
  cfg.loss = LossModel::symmetric(0.9);
  EXPECT_THROW(evolve_pure(cfg), std::invalid_argument);
}

}  // namespace
}  // namespace qmetro
