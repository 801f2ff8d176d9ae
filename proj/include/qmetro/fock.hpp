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

// Truncated Fock-space substrate for one and two bosonic modes.
//
// Two-mode objects live on a d*d dimensional space, d = max_photons + 1, with
// the joint index fixed as  n_s * d + n_i  (signal-major). Everything in the
// library relies on this convention.

#include <complex>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qmetro {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

class CutoffMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-mode photon-number truncation.
class FockCutoff {
 public:
  explicit FockCutoff(int max_photons = 10);

  int max_photons() const { return max_photons_; }
  int dim() const { return max_photons_ + 1; }
  int joint_dim() const { return dim() * dim(); }

  int joint_index(int n_s, int n_i) const { return n_s * dim() + n_i; }
  int signal_of(int joint) const { return joint / dim(); }
  int idler_of(int joint) const { return joint % dim(); }

  friend bool operator==(const FockCutoff&, const FockCutoff&) = default;

 private:
  int max_photons_;
};

enum class Mode { signal, idler };

inline Mode other(Mode m) { return m == Mode::signal ? Mode::idler : Mode::signal; }

/// Two-mode state: pure amplitude vector or density operator.
class TwoModeState {
 public:
  static TwoModeState pure(CVector amplitudes, FockCutoff cutoff);
  static TwoModeState density(CMatrix rho, FockCutoff cutoff);

  bool is_pure() const { return std::holds_alternative<CVector>(repr_); }
  FockCutoff cutoff() const { return cutoff_; }

  /// Throws std::logic_error for density-operator states.
  const CVector& amplitudes() const;
  /// Density operator; for pure states this is |psi><psi|.
  CMatrix density_matrix() const;

  Complex amplitude(int n_s, int n_i) const;
  double population(int n_s, int n_i) const;
  /// Norm squared for pure states, trace for density operators.
  double trace() const;

 private:
  TwoModeState(std::variant<CVector, CMatrix> repr, FockCutoff cutoff)
      : repr_(std::move(repr)), cutoff_(cutoff) {}

  std::variant<CVector, CMatrix> repr_;
  FockCutoff cutoff_;
};

enum class OperatorKind { unitary, observable };

class ModeOperator {
 public:
  /// Validates U^dagger U = 1 to `tol` in max-abs norm.
  static ModeOperator unitary(CMatrix u, double tol = 1e-10);
  /// Validates Hermiticity to `tol`.
  static ModeOperator observable(CMatrix h, double tol = 1e-10);

  const CMatrix& matrix() const { return matrix_; }
  OperatorKind kind() const { return kind_; }

 private:
  ModeOperator(CMatrix m, OperatorKind k) : matrix_(std::move(m)), kind_(k) {}

  CMatrix matrix_;
  OperatorKind kind_;
};

double unitarity_error(const CMatrix& u);
double hermiticity_error(const CMatrix& h);
/// max-abs deviation of sum_k K_k^dagger K_k from the identity.
double kraus_completeness_error(std::span<const CMatrix> kraus);

/// Validates a density operator: square, Hermitian to 1e-10, eigenvalues
/// >= -psd_tol. Throws std::invalid_argument otherwise.
void check_density(const CMatrix& rho, double psd_tol = 1e-10);

CVector fock_vector(int n, FockCutoff cutoff);
CMatrix annihilation(FockCutoff cutoff);
CMatrix number_operator(FockCutoff cutoff);
/// n_s (x) 1 or 1 (x) n_i on the joint space.
CMatrix number_operator(Mode mode, FockCutoff cutoff);

CVector tensor(const CVector& a, const CVector& b);
CMatrix tensor(const CMatrix& a, const CMatrix& b);

/// Traces out `traced` and returns the one-mode density of the other mode.
CMatrix partial_trace(const CMatrix& rho, Mode traced, FockCutoff cutoff);

/// <obs>, real. Throws if obs is not Hermitian or the imaginary residue
/// exceeds 1e-10.
double expectation(const TwoModeState& state, const ModeOperator& obs);

/// Zeroes every element whose row or column has n_s + n_i > max_total.
CMatrix project_total_number(const CMatrix& rho, FockCutoff cutoff, int max_total);
/// Removes coherences between different total photon numbers.
CMatrix dephase_total_number(const CMatrix& rho, FockCutoff cutoff);

/// Applies a single-mode Kraus set to `mode` of a two-mode operator:
/// sum_k (K_k (x) 1) rho (K_k (x) 1)^dagger (or the idler analogue).
/// Exploits sparsity of the Kraus operators.
CMatrix apply_local_kraus(const CMatrix& rho, std::span<const CMatrix> kraus, Mode mode,
                          FockCutoff cutoff);

}  // namespace qmetro
