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

// Fast evaluation kernel for phase sweeps and fits.
//
// The beam splitters, the phase shifter and the loss channels all commute with
// a global rotation exp(i phi (n_s + n_i)), and every detector in this library
// is diagonal in the Fock basis. Coherences between different total photon
// numbers therefore never reach an outcome probability, and the quantum Fisher
// information without an external phase reference is that of the dephased
// state. The kernel keeps only the diagonal sectors N = n_s + n_i <= max_photons,
// each an (N+1) x (N+1) block in the basis |a, N-a>, a = 0..N.
//
// evolve_pipeline() and analytic_phase_derivative() in optics.hpp are the dense
// reference for this kernel.

#include <memory>
#include <vector>

#include "qmetro/fock.hpp"
#include "qmetro/optics.hpp"

namespace qmetro {

/// Block-diagonal operator, blocks[N] acting on span{|a, N-a>}.
struct SectorOperator {
  std::vector<CMatrix> blocks;

  static SectorOperator from_dense(const CMatrix& rho, FockCutoff cutoff);
  CMatrix to_dense(FockCutoff cutoff) const;
  /// diag as a d x d table indexed [n_s][n_i].
  RMatrix populations(FockCutoff cutoff) const;
};

/// Applies the pure-loss channel on one mode to a sector operator.
SectorOperator apply_sector_loss(const SectorOperator& op, Mode mode, double eta);

struct DetectedState {
  SectorOperator rho;
  SectorOperator drho;
};

class Interferometer {
 public:
  /// Precomputes the phase-independent part of the pipeline; config.phase is
  /// ignored.
  explicit Interferometer(const InterferometerConfig& config);

  const InterferometerConfig& config() const { return config_; }
  FockCutoff cutoff() const { return config_.cutoff; }

  /// sigma4 and d sigma4 / d theta restricted to the photon-number sectors.
  DetectedState detected(double phase) const;

  struct Populations {
    RMatrix p;   // [n_s][n_i]
    RMatrix dp;  // d/dtheta of p
  };
  Populations populations(double phase) const;
  /// Populations only, without the derivative.
  RMatrix probabilities(double phase) const;

 private:
  RMatrix undetected_populations(double phase, RMatrix* derivative) const;

  InterferometerConfig config_;
  std::shared_ptr<const std::vector<CMatrix>> shared_splitter_;  // BS(1/2) per sector
  std::vector<CMatrix> mixed_;                                   // BS sigma2 BS^dagger per sector
  RMatrix thin_s_;
  RMatrix thin_i_;
};

}  // namespace qmetro
