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

// Fisher-information engine: classical FI of outcome tables, quantum FI of
// density operators, the shot-noise baseline and the comparison metrics built
// on top of phase sweeps.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qmetro/detectors.hpp"
#include "qmetro/fock.hpp"
#include "qmetro/interferometer.hpp"
#include "qmetro/optics.hpp"

namespace qmetro {

inline constexpr double kProbabilityFloor = 1e-15;
inline constexpr double kDerivativeFloor = 1e-12;
inline constexpr double kEigenvalueFloor = 1e-12;

struct FisherDiagnostics {
  int skipped = 0;        // p <= floor with negligible derivative
  int near_singular = 0;  // p <= floor but |dp| above the derivative floor
};

/// sum_i dp_i^2 / p_i over outcomes above the probability floor.
double classical_fisher(const OutcomeDistribution& dist, FisherDiagnostics* diagnostics = nullptr);

/// SLD quantum Fisher information
///   2 sum_{a,b: l_a + l_b > floor} |<a|drho|b>|^2 / (l_a + l_b).
double quantum_fisher(const CMatrix& rho, const CMatrix& drho, double eigenvalue_floor = kEigenvalueFloor);
/// Pure-state branch 4 (<dpsi|dpsi> - |<psi|dpsi>|^2 / <psi|psi>).
double quantum_fisher_pure(const CVector& psi, const CVector& dpsi);
/// Block-diagonal operators: sum of per-sector SLD terms.
double quantum_fisher(const SectorOperator& rho, const SectorOperator& drho,
                      double eigenvalue_floor = kEigenvalueFloor);

/// F_SNL = nbar, the generated mean photon number.
double shot_noise_limit(const SqueezingParams& squeezing);

/// `points` phases at the midpoints of a uniform partition of [0, 2 pi).
std::vector<double> midpoint_phase_grid(std::size_t points = 2048);

struct SweepOptions {
  bool compute_qfi = true;
  /// OpenMP threads; 0 keeps the runtime default.
  int threads = 0;
};

struct FisherReport {
  InterferometerConfig config;
  std::vector<double> phase_grid;
  std::vector<double> cfi;
  /// QFI of the lossy detected state sigma4, without an external phase reference.
  std::vector<double> qfi;
  /// Same for the lossless pipeline; phase independent.
  double qfi_lossless = 0.0;
  double snl = 0.0;
  /// FI divided by the generated mean photon number.
  std::vector<double> cfi_per_photon;
  std::vector<double> qfi_per_photon;
  int near_singular_outcomes = 0;
  std::string config_hash;
};

/// OpenMP-parallel sweep on the sector kernel.
FisherReport sweep_fisher(const InterferometerConfig& config, std::span<const double> phases,
                          const DetectorPair& detectors, const SweepOptions& options = {});

/// Serial sweep on the dense reference pipeline. Slow; kept for testing.
FisherReport sweep_fisher_reference(const InterferometerConfig& config, std::span<const double> phases,
                                    const DetectorPair& detectors, bool compute_qfi = true);

/// Classical FI at one phase from a prepared kernel.
double cfi_at(const Interferometer& interferometer, double phase, const DetectorPair& detectors);
OutcomeDistribution distribution_at(const Interferometer& interferometer, double phase,
                                    const DetectorPair& detectors);

enum class FisherKind { classical, quantum };

/// Fraction of grid phases with FI strictly above the SNL.
double sub_snl_fraction(const FisherReport& report, FisherKind which);

struct PhaseOptimum {
  double phase = 0.0;
  double value = 0.0;
};

/// max over theta of the CFI: coarse grid then golden-section to `tolerance`.
PhaseOptimum maximize_cfi(const Interferometer& interferometer, const DetectorPair& detectors,
                          int coarse_points = 256, double tolerance = 1e-6);

struct RatioPoint {
  double mean_photons = 0.0;
  double max_cfi_pnr = 0.0;
  double max_cfi_click = 0.0;
  double ratio = 0.0;
};

/// max_theta CFI(PNR) / max_theta CFI(click) for each nbar; the loss model and
/// cutoff come from `config`. PNR outcomes are capped at `n_max`.
std::vector<RatioPoint> pnr_click_ratio(const InterferometerConfig& config, std::span<const double> nbar_grid,
                                        int n_max = 10, int threads = 0);

/// Smallest extra loss on both arms (applied at detection) for which the CFI
/// at `phase` drops to the SNL, found by bisection on [0, 1].
double critical_added_loss(const InterferometerConfig& config, double phase, const DetectorPair& detectors,
                           double tolerance = 1e-5);

/// Stable hash of a configuration, used as report provenance.
std::string config_hash(const InterferometerConfig& config);

}  // namespace qmetro
