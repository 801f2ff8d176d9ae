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

#pragma once

// Physical model: two-mode squeezed vacuum source, Fock-basis beam splitters
// and phase shifters, pure-loss channels, and the lossy Mach-Zehnder pipeline
//
//   sigma1 = |TMSV><TMSV|
//   sigma2 = preparation loss (eta_p per arm) applied to sigma1
//   sigma3 = BS(1/2) . P_s(theta) . BS(1/2) acting on sigma2
//   sigma4 = detection loss (eta_d per arm) applied to sigma3
//
// Beam splitter convention (reflection phase i):
//   a^dagger -> sqrt(eta) a^dagger + i sqrt(1-eta) b^dagger
//   b^dagger -> i sqrt(1-eta) a^dagger + sqrt(eta) b^dagger
// With this convention BS(1/2) BS(1/2) swaps the two modes, so at theta = 0
// the interferometer exchanges signal and idler up to phases.

#include <vector>

#include "qmetro/fock.hpp"

namespace qmetro {

double mean_photons_from_squeezing(double z);
double squeezing_from_mean_photons(double mean_photons);

class SqueezingParams {
 public:
  explicit SqueezingParams(double z = 0.0);
  static SqueezingParams from_mean_photons(double mean_photons);

  double z() const { return z_; }
  /// 2 z^2 / (1 - z^2), photons generated per trial in both modes.
  double mean_photons() const { return mean_photons_from_squeezing(z_); }

 private:
  double z_;
};

/// Transmissivities of the fictitious beam splitters, per arm.
struct LossModel {
  double eta_p_s = 1.0;
  double eta_p_i = 1.0;
  double eta_d_s = 1.0;
  double eta_d_i = 1.0;

  /// All loss at detection, equal on both arms.
  static LossModel symmetric(double eta);
  static LossModel detection(double eta_s, double eta_i);
  LossModel swapped() const { return {eta_p_i, eta_p_s, eta_d_i, eta_d_s}; }
  bool lossless() const;
  void validate() const;
};

struct InterferometerConfig {
  SqueezingParams squeezing{};
  LossModel loss{};
  /// Interferometer phase in radians. Kept unreduced.
  double phase = 0.0;
  FockCutoff cutoff{10};

  /// Phase reduced to [0, 2 pi).
  double reported_phase() const;
  InterferometerConfig with_phase(double theta) const;
};

/// (1 - z^2) sum_{n > max_photons} z^{2n} = z^{2(max_photons + 1)}; the norm
/// deficit of the truncated squeezed vacuum.
double tmsv_tail_bound(double z, FockCutoff cutoff);

/// sqrt(1 - z^2) sum_{n <= max_photons} z^n |n, n>.
TwoModeState tmsv_state(const SqueezingParams& squeezing, FockCutoff cutoff);

/// Two-mode beam splitter with transmissivity `eta`, built block by block in
/// total photon number N. Blocks with N <= max_photons are complete inside the
/// truncated space and are exact; on the incomplete blocks above that the
/// operator acts as the identity, so the interferometer is only meaningful for
/// states supported on n_s + n_i <= max_photons.
ModeOperator beam_splitter_unitary(double eta, FockCutoff cutoff);

/// <p, q| U_BS(eta) |n, m> for arbitrary photon numbers (no truncation).
Complex beam_splitter_element(double eta, int p, int q, int n, int m);

/// diag(exp(i n theta)) on the chosen mode of the joint space.
ModeOperator phase_shifter(double theta, Mode mode, FockCutoff cutoff);

/// Closed-form pure-loss Kraus operators
/// K_k = sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|.
std::vector<CMatrix> pure_loss_kraus(double eta, FockCutoff cutoff);

/// Loss by dilation: the mode is mixed with a vacuum ancilla on
/// beam_splitter_unitary(eta) and the ancilla is traced out.
TwoModeState loss_channel(const TwoModeState& state, Mode mode, double eta);

/// Same channel through pure_loss_kraus. Kept as an independent check.
TwoModeState loss_channel_kraus(const TwoModeState& state, Mode mode, double eta);

/// sigma2 restricted to n_s + n_i <= max_photons.
TwoModeState prepare_source(const InterferometerConfig& config);

/// sigma4 at config.phase.
TwoModeState evolve_pipeline(const InterferometerConfig& config);

/// d sigma4 / d theta at config.phase, exact.
CMatrix analytic_phase_derivative(const InterferometerConfig& config);

struct PureEvolution {
  CVector psi;
  CVector dpsi;
};

/// Lossless sigma3 as a vector and its phase derivative. Throws if any
/// transmissivity differs from 1.
PureEvolution evolve_pure(const InterferometerConfig& config);

}  // namespace qmetro
