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

#include "qmetro/interferometer.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace qmetro {

namespace {

double loss_amplitude(int n, int k, double eta) {
  // sqrt(C(n,k) eta^(n-k) (1-eta)^k)
  const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::sqrt(std::round(std::exp(log_binom)) * std::pow(eta, n - k) * std::pow(1.0 - eta, k));
}

}  // namespace

SectorOperator SectorOperator::from_dense(const CMatrix& rho, FockCutoff cutoff) {
  SectorOperator out;
  const int cmax = cutoff.max_photons();
  out.blocks.reserve(cmax + 1);
  for (int total = 0; total <= cmax; ++total) {
    CMatrix b(total + 1, total + 1);
    for (int a = 0; a <= total; ++a) {
      for (int c = 0; c <= total; ++c) {
        b(a, c) = rho(cutoff.joint_index(a, total - a), cutoff.joint_index(c, total - c));
      }
    }
    out.blocks.push_back(std::move(b));
  }
  return out;
}

CMatrix SectorOperator::to_dense(FockCutoff cutoff) const {
  CMatrix rho = CMatrix::Zero(cutoff.joint_dim(), cutoff.joint_dim());
  for (int total = 0; total < static_cast<int>(blocks.size()); ++total) {
    for (int a = 0; a <= total; ++a) {
      for (int c = 0; c <= total; ++c) {
        rho(cutoff.joint_index(a, total - a), cutoff.joint_index(c, total - c)) = blocks[total](a, c);
      }
    }
  }
  return rho;
}

RMatrix SectorOperator::populations(FockCutoff cutoff) const {
  RMatrix p = RMatrix::Zero(cutoff.dim(), cutoff.dim());
  for (int total = 0; total < static_cast<int>(blocks.size()); ++total) {
    for (int a = 0; a <= total; ++a) p(a, total - a) = blocks[total](a, a).real();
  }
  return p;
}

SectorOperator apply_sector_loss(const SectorOperator& op, Mode mode, double eta) {
  if (eta == 1.0) return op;
  const int sectors = static_cast<int>(op.blocks.size());
  SectorOperator out;
  out.blocks.reserve(op.blocks.size());
  for (int total = 0; total < sectors; ++total) out.blocks.push_back(CMatrix::Zero(total + 1, total + 1));
  RMatrix amp = RMatrix::Zero(sectors, sectors);
  for (int n = 0; n < sectors; ++n)
    for (int k = 0; k <= n; ++k) amp(n, k) = loss_amplitude(n, k, eta);
  for (int total = 0; total < sectors; ++total) {
    const CMatrix& in = op.blocks[total];
    for (int a = 0; a <= total; ++a) {
      for (int c = 0; c <= total; ++c) {
        const Complex v = in(a, c);
        if (v == Complex(0.0)) continue;
        if (mode == Mode::signal) {
          for (int k = 0; k <= std::min(a, c); ++k) {
            out.blocks[total - k](a - k, c - k) += amp(a, k) * amp(c, k) * v;
          }
        } else {
          const int na = total - a, nc = total - c;
          for (int k = 0; k <= std::min(na, nc); ++k) {
            out.blocks[total - k](a, c) += amp(na, k) * amp(nc, k) * v;
          }
        }
      }
    }
  }
  return out;
}

namespace {

/// BS(1/2) restricted to each sector N <= max_photons. Depends on the cutoff
/// only, so it is shared between kernels.
std::shared_ptr<const std::vector<CMatrix>> balanced_splitter(FockCutoff cutoff) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const std::vector<CMatrix>>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[cutoff.max_photons()];
  if (!slot) {
    auto blocks = std::make_shared<std::vector<CMatrix>>();
    for (int total = 0; total <= cutoff.max_photons(); ++total) {
      CMatrix b(total + 1, total + 1);
      for (int p = 0; p <= total; ++p) {
        for (int n = 0; n <= total; ++n) b(p, n) = beam_splitter_element(0.5, p, total - p, n, total - n);
      }
      blocks->push_back(std::move(b));
    }
    slot = std::move(blocks);
  }
  return slot;
}

/// T(a, m) = C(a, m) eta^m (1 - eta)^(a - m): probability that m of a photons
/// survive.
RMatrix thinning_matrix(double eta, int dim) {
  RMatrix t = RMatrix::Zero(dim, dim);
  for (int a = 0; a < dim; ++a) {
    for (int m = 0; m <= a; ++m) {
      const double amp = loss_amplitude(a, a - m, eta);
      t(a, m) = amp * amp;
    }
  }
  return t;
}

}  // namespace

Interferometer::Interferometer(const InterferometerConfig& config) : config_(config) {
  config.loss.validate();
  const auto cutoff = config.cutoff;
  const int cmax = cutoff.max_photons();
  const double z = config.squeezing.z();

  // Dephased TMSV over the full two-mode box: sector 2n holds |n, n>.
  SectorOperator source;
  source.blocks.reserve(2 * cmax + 1);
  for (int total = 0; total <= 2 * cmax; ++total) {
    CMatrix b = CMatrix::Zero(total + 1, total + 1);
    if (total % 2 == 0) b(total / 2, total / 2) = (1.0 - z * z) * std::pow(z * z, total / 2);
    source.blocks.push_back(std::move(b));
  }
  source = apply_sector_loss(apply_sector_loss(source, Mode::signal, config.loss.eta_p_s), Mode::idler,
                             config.loss.eta_p_i);
  source.blocks.resize(cmax + 1);

  shared_splitter_ = balanced_splitter(cutoff);
  const auto& splitter = *shared_splitter_;
  mixed_.reserve(cmax + 1);
  for (int total = 0; total <= cmax; ++total) {
    mixed_.push_back(splitter[total] * source.blocks[total] * splitter[total].adjoint());
  }
  thin_s_ = thinning_matrix(config.loss.eta_d_s, cutoff.dim());
  thin_i_ = thinning_matrix(config.loss.eta_d_i, cutoff.dim());
}

DetectedState Interferometer::detected(double phase) const {
  DetectedState out;
  const int sectors = static_cast<int>(mixed_.size());
  out.rho.blocks.reserve(sectors);
  out.drho.blocks.reserve(sectors);
  for (int total = 0; total < sectors; ++total) {
    const CMatrix& x = mixed_[total];
    CMatrix shifted(total + 1, total + 1);
    CMatrix dshifted(total + 1, total + 1);
    for (int a = 0; a <= total; ++a) {
      for (int c = 0; c <= total; ++c) {
        const Complex v = x(a, c) * std::polar(1.0, (a - c) * phase);
        shifted(a, c) = v;
        dshifted(a, c) = Complex(0.0, a - c) * v;
      }
    }
    const CMatrix& b = (*shared_splitter_)[total];
    out.rho.blocks.push_back(b * shifted * b.adjoint());
    out.drho.blocks.push_back(b * dshifted * b.adjoint());
  }
  const auto& loss = config_.loss;
  out.rho = apply_sector_loss(apply_sector_loss(out.rho, Mode::signal, loss.eta_d_s), Mode::idler, loss.eta_d_i);
  out.drho = apply_sector_loss(apply_sector_loss(out.drho, Mode::signal, loss.eta_d_s), Mode::idler, loss.eta_d_i);
  return out;
}

RMatrix Interferometer::undetected_populations(double phase, RMatrix* derivative) const {
  const auto cutoff = config_.cutoff;
  RMatrix p = RMatrix::Zero(cutoff.dim(), cutoff.dim());
  if (derivative) *derivative = RMatrix::Zero(cutoff.dim(), cutoff.dim());
  const auto& splitter = *shared_splitter_;
  for (int total = 0; total < static_cast<int>(mixed_.size()); ++total) {
    const CMatrix& x = mixed_[total];
    const CMatrix& b = splitter[total];
    CMatrix shifted(total + 1, total + 1);
    for (int a = 0; a <= total; ++a) {
      for (int c = 0; c <= total; ++c) shifted(a, c) = x(a, c) * std::polar(1.0, (a - c) * phase);
    }
    const CMatrix y = b * shifted;
    for (int a = 0; a <= total; ++a) {
      p(a, total - a) = y.row(a).dot(b.row(a)).real();
    }
    if (derivative) {
      for (int a = 0; a <= total; ++a) {
        for (int c = 0; c <= total; ++c) shifted(a, c) *= Complex(0.0, a - c);
      }
      const CMatrix dy = b * shifted;
      for (int a = 0; a <= total; ++a) (*derivative)(a, total - a) = dy.row(a).dot(b.row(a)).real();
    }
  }
  return p;
}

Interferometer::Populations Interferometer::populations(double phase) const {
  RMatrix dp;
  const RMatrix p = undetected_populations(phase, &dp);
  return {thin_s_.transpose() * p * thin_i_, thin_s_.transpose() * dp * thin_i_};
}

RMatrix Interferometer::probabilities(double phase) const {
  return thin_s_.transpose() * undetected_populations(phase, nullptr) * thin_i_;
}

}  // namespace qmetro
