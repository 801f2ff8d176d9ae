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

#include "qmetro/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qmetro {

FockCutoff::FockCutoff(int max_photons) : max_photons_(max_photons) {
  if (max_photons < 0) {
    throw std::invalid_argument("FockCutoff: max_photons must be non-negative");
  }
}

TwoModeState TwoModeState::pure(CVector amplitudes, FockCutoff cutoff) {
  if (amplitudes.size() != cutoff.joint_dim()) {
    throw CutoffMismatch("TwoModeState: amplitude vector size does not match cutoff");
  }
  return TwoModeState(std::move(amplitudes), cutoff);
}

TwoModeState TwoModeState::density(CMatrix rho, FockCutoff cutoff) {
  if (rho.rows() != cutoff.joint_dim() || rho.cols() != cutoff.joint_dim()) {
    throw CutoffMismatch("TwoModeState: density operator shape does not match cutoff");
  }
  return TwoModeState(std::move(rho), cutoff);
}

const CVector& TwoModeState::amplitudes() const {
  if (!is_pure()) throw std::logic_error("TwoModeState: not a pure state");
  return std::get<CVector>(repr_);
}

CMatrix TwoModeState::density_matrix() const {
  if (is_pure()) {
    const auto& psi = std::get<CVector>(repr_);
    return psi * psi.adjoint();
  }
  return std::get<CMatrix>(repr_);
}

Complex TwoModeState::amplitude(int n_s, int n_i) const {
  return amplitudes()(cutoff_.joint_index(n_s, n_i));
}

double TwoModeState::population(int n_s, int n_i) const {
  const int j = cutoff_.joint_index(n_s, n_i);
  if (is_pure()) return std::norm(std::get<CVector>(repr_)(j));
  return std::get<CMatrix>(repr_)(j, j).real();
}

double TwoModeState::trace() const {
  if (is_pure()) return std::get<CVector>(repr_).squaredNorm();
  return std::get<CMatrix>(repr_).trace().real();
}

ModeOperator ModeOperator::unitary(CMatrix u, double tol) {
  if (u.rows() != u.cols()) throw std::invalid_argument("unitary: matrix is not square");
  if (const double err = unitarity_error(u); err > tol) {
    throw std::invalid_argument("unitary: U^dagger U deviates from identity by " +
                                std::to_string(err));
  }
  return ModeOperator(std::move(u), OperatorKind::unitary);
}

ModeOperator ModeOperator::observable(CMatrix h, double tol) {
  if (h.rows() != h.cols()) throw std::invalid_argument("observable: matrix is not square");
  if (hermiticity_error(h) > tol) throw std::invalid_argument("observable: not Hermitian");
  return ModeOperator(std::move(h), OperatorKind::observable);
}

double unitarity_error(const CMatrix& u) {
  const CMatrix id = CMatrix::Identity(u.cols(), u.cols());
  return (u.adjoint() * u - id).cwiseAbs().maxCoeff();
}

double hermiticity_error(const CMatrix& h) { return (h - h.adjoint()).cwiseAbs().maxCoeff(); }

double kraus_completeness_error(std::span<const CMatrix> kraus) {
  if (kraus.empty()) return 1.0;
  CMatrix sum = CMatrix::Zero(kraus.front().cols(), kraus.front().cols());
  for (const auto& k : kraus) sum += k.adjoint() * k;
  return (sum - CMatrix::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff();
}

void check_density(const CMatrix& rho, double psd_tol) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("density operator is not square");
  if (hermiticity_error(rho) > 1e-10) {
    throw std::invalid_argument("density operator is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -psd_tol) {
    throw std::invalid_argument("density operator has eigenvalue " +
                                std::to_string(es.eigenvalues().minCoeff()));
  }
}

CVector fock_vector(int n, FockCutoff cutoff) {
  if (n < 0 || n > cutoff.max_photons()) throw std::out_of_range("fock_vector: n beyond cutoff");
  CVector v = CVector::Zero(cutoff.dim());
  v(n) = 1.0;
  return v;
}

CMatrix annihilation(FockCutoff cutoff) {
  CMatrix a = CMatrix::Zero(cutoff.dim(), cutoff.dim());
  for (int n = 1; n < cutoff.dim(); ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMatrix number_operator(FockCutoff cutoff) {
  CMatrix n = CMatrix::Zero(cutoff.dim(), cutoff.dim());
  for (int k = 0; k < cutoff.dim(); ++k) n(k, k) = k;
  return n;
}

CMatrix number_operator(Mode mode, FockCutoff cutoff) {
  const CMatrix id = CMatrix::Identity(cutoff.dim(), cutoff.dim());
  return mode == Mode::signal ? tensor(number_operator(cutoff), id)
                              : tensor(id, number_operator(cutoff));
}

CVector tensor(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) throw CutoffMismatch("tensor: cutoff mismatch");
  const Eigen::Index d = a.size();
  CVector out(d * d);
  for (Eigen::Index s = 0; s < d; ++s) out.segment(s * d, d) = a(s) * b;
  return out;
}

CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw CutoffMismatch("tensor: cutoff mismatch");
  }
  const Eigen::Index r = b.rows(), c = b.cols();
  CMatrix out(a.rows() * r, a.cols() * c);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * r, j * c, r, c) = a(i, j) * b;
  }
  return out;
}

CMatrix partial_trace(const CMatrix& rho, Mode traced, FockCutoff cutoff) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("partial_trace: non-square input");
  if (rho.rows() != cutoff.joint_dim()) throw CutoffMismatch("partial_trace: cutoff mismatch");
  const int d = cutoff.dim();
  CMatrix out = CMatrix::Zero(d, d);
  for (int x = 0; x < d; ++x) {
    for (int y = 0; y < d; ++y) {
      Complex acc = 0.0;
      for (int t = 0; t < d; ++t) {
        acc += traced == Mode::idler ? rho(cutoff.joint_index(x, t), cutoff.joint_index(y, t))
                                     : rho(cutoff.joint_index(t, x), cutoff.joint_index(t, y));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

double expectation(const TwoModeState& state, const ModeOperator& obs) {
  if (obs.kind() != OperatorKind::observable && hermiticity_error(obs.matrix()) > 1e-10) {
    throw std::invalid_argument("expectation: observable is not Hermitian");
  }
  const CMatrix& h = obs.matrix();
  if (h.rows() != state.cutoff().joint_dim()) throw CutoffMismatch("expectation: cutoff mismatch");
  Complex value;
  if (state.is_pure()) {
    const auto& psi = state.amplitudes();
    value = psi.dot(h * psi);
  } else {
    value = (state.density_matrix() * h).trace();
  }
  if (std::abs(value.imag()) > 1e-10) {
    throw std::runtime_error("expectation: imaginary residue above tolerance");
  }
  return value.real();
}

CMatrix project_total_number(const CMatrix& rho, FockCutoff cutoff, int max_total) {
  CMatrix out = rho;
  for (int j = 0; j < cutoff.joint_dim(); ++j) {
    if (cutoff.signal_of(j) + cutoff.idler_of(j) > max_total) {
      out.row(j).setZero();
      out.col(j).setZero();
    }
  }
  return out;
}

CMatrix dephase_total_number(const CMatrix& rho, FockCutoff cutoff) {
  CMatrix out = rho;
  for (int r = 0; r < cutoff.joint_dim(); ++r) {
    const int nr = cutoff.signal_of(r) + cutoff.idler_of(r);
    for (int c = 0; c < cutoff.joint_dim(); ++c) {
      if (cutoff.signal_of(c) + cutoff.idler_of(c) != nr) out(r, c) = 0.0;
    }
  }
  return out;
}

namespace {

struct Entry {
  int row;
  int col;
  Complex value;
};

std::vector<Entry> nonzeros(const CMatrix& k) {
  std::vector<Entry> out;
  for (int c = 0; c < k.cols(); ++c) {
    for (int r = 0; r < k.rows(); ++r) {
      if (k(r, c) != Complex(0.0)) out.push_back({r, c, k(r, c)});
    }
  }
  return out;
}

}  // namespace

CMatrix apply_local_kraus(const CMatrix& rho, std::span<const CMatrix> kraus, Mode mode,
                          FockCutoff cutoff) {
  const int d = cutoff.dim();
  if (rho.rows() != cutoff.joint_dim() || rho.cols() != cutoff.joint_dim()) {
    throw CutoffMismatch("apply_local_kraus: state does not match cutoff");
  }
  auto idx = [&](int local, int spectator) {
    return mode == Mode::signal ? cutoff.joint_index(local, spectator)
                                : cutoff.joint_index(spectator, local);
  };
  CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
  for (const auto& k : kraus) {
    if (k.rows() != d || k.cols() != d) throw CutoffMismatch("apply_local_kraus: Kraus shape");
    const auto nz = nonzeros(k);
    for (const auto& a : nz) {
      for (const auto& b : nz) {
        const Complex w = a.value * std::conj(b.value);
        for (int s = 0; s < d; ++s) {
          for (int t = 0; t < d; ++t) out(idx(a.row, s), idx(b.row, t)) += w * rho(idx(a.col, s), idx(b.col, t));
        }
      }
    }
  }
  return out;
}

}  // namespace qmetro
