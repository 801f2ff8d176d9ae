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

#include "qmetro/optics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qmetro {

namespace {

void check_transmissivity(double eta, const char* what) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument(std::string(what) + ": transmissivity must lie in [0, 1]");
  }
}

double log_factorial(int n) { return std::lgamma(n + 1.0); }

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::round(std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k)));
}

Complex i_power(int k) {
  switch (k % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

// K_a[x, t] = <x, a| U_BS(eta) |t, 0>: the mode is the first port of the
// beam splitter, the vacuum ancilla the second.
std::vector<CMatrix> dilation_kraus(double eta, FockCutoff cutoff) {
  const CMatrix u = beam_splitter_unitary(eta, cutoff).matrix();
  const int d = cutoff.dim();
  std::vector<CMatrix> kraus(d, CMatrix::Zero(d, d));
  for (int a = 0; a < d; ++a) {
    for (int x = 0; x < d; ++x) {
      for (int t = 0; t < d; ++t) kraus[a](x, t) = u(cutoff.joint_index(x, a), cutoff.joint_index(t, 0));
    }
  }
  return kraus;
}

CMatrix apply_loss(const CMatrix& rho, Mode mode, double eta, FockCutoff cutoff) {
  if (eta == 1.0) return rho;
  const auto kraus = dilation_kraus(eta, cutoff);
  return apply_local_kraus(rho, kraus, mode, cutoff);
}

struct MziOperators {
  CMatrix m;
  CMatrix dm;
};

MziOperators mzi(double theta, FockCutoff cutoff) {
  const CMatrix bs = beam_splitter_unitary(0.5, cutoff).matrix();
  const CMatrix ps = phase_shifter(theta, Mode::signal, cutoff).matrix();
  const CMatrix dps = Complex(0.0, 1.0) * number_operator(Mode::signal, cutoff) * ps;
  return {bs * ps * bs, bs * dps * bs};
}

}  // namespace

double mean_photons_from_squeezing(double z) { return 2.0 * z * z / (1.0 - z * z); }

double squeezing_from_mean_photons(double mean_photons) {
  if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons)) {
    throw std::invalid_argument("mean photon number must be finite and non-negative");
  }
  return std::sqrt(mean_photons / (2.0 + mean_photons));
}

SqueezingParams::SqueezingParams(double z) : z_(z) {
  if (!(z >= 0.0 && z < 1.0)) throw std::invalid_argument("squeezing parameter z must lie in [0, 1)");
}

SqueezingParams SqueezingParams::from_mean_photons(double mean_photons) {
  return SqueezingParams(squeezing_from_mean_photons(mean_photons));
}

LossModel LossModel::symmetric(double eta) { return {1.0, 1.0, eta, eta}; }

LossModel LossModel::detection(double eta_s, double eta_i) { return {1.0, 1.0, eta_s, eta_i}; }

bool LossModel::lossless() const {
  return eta_p_s == 1.0 && eta_p_i == 1.0 && eta_d_s == 1.0 && eta_d_i == 1.0;
}

void LossModel::validate() const {
  check_transmissivity(eta_p_s, "eta_p_s");
  check_transmissivity(eta_p_i, "eta_p_i");
  check_transmissivity(eta_d_s, "eta_d_s");
  check_transmissivity(eta_d_i, "eta_d_i");
}

double InterferometerConfig::reported_phase() const {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(phase, two_pi);
  if (r < 0.0) r += two_pi;
  return r;
}

InterferometerConfig InterferometerConfig::with_phase(double theta) const {
  InterferometerConfig c = *this;
  c.phase = theta;
  return c;
}

double tmsv_tail_bound(double z, FockCutoff cutoff) {
  return std::pow(z * z, cutoff.max_photons() + 1);
}

TwoModeState tmsv_state(const SqueezingParams& squeezing, FockCutoff cutoff) {
  const double z = squeezing.z();
  CVector psi = CVector::Zero(cutoff.joint_dim());
  const double norm = std::sqrt(1.0 - z * z);
  double zn = 1.0;
  for (int n = 0; n <= cutoff.max_photons(); ++n) {
    psi(cutoff.joint_index(n, n)) = norm * zn;
    zn *= z;
  }
  return TwoModeState::pure(std::move(psi), cutoff);
}

Complex beam_splitter_element(double eta, int p, int q, int n, int m) {
  if (p + q != n + m || p < 0 || q < 0 || n < 0 || m < 0) return 0.0;
  const double t = std::sqrt(eta);
  const double r = std::sqrt(1.0 - eta);
  const double scale =
      std::exp(0.5 * (log_factorial(p) + log_factorial(q) - log_factorial(n) - log_factorial(m)));
  Complex acc = 0.0;
  // a^dagger^n contributes j photons to the first port, b^dagger^m keeps l in
  // the second port.
  for (int j = 0; j <= n; ++j) {
    const int l = j + m - p;
    if (l < 0 || l > m) continue;
    const int reflected = (n - j) + (m - l);
    const double mag = binomial(n, j) * binomial(m, l) * std::pow(t, j + l) * std::pow(r, reflected);
    acc += mag * i_power(reflected);
  }
  return acc * scale;
}

ModeOperator beam_splitter_unitary(double eta, FockCutoff cutoff) {
  check_transmissivity(eta, "beam_splitter_unitary");
  const int cmax = cutoff.max_photons();
  CMatrix u = CMatrix::Zero(cutoff.joint_dim(), cutoff.joint_dim());
  for (int total = 0; total <= 2 * cmax; ++total) {
    const int lo = std::max(0, total - cmax);
    const int hi = std::min(total, cmax);
    for (int n = lo; n <= hi; ++n) {
      const int col = cutoff.joint_index(n, total - n);
      if (total > cmax) {
        u(col, col) = 1.0;
        continue;
      }
      for (int p = 0; p <= total; ++p) {
        u(cutoff.joint_index(p, total - p), col) = beam_splitter_element(eta, p, total - p, n, total - n);
      }
    }
  }
  return ModeOperator::unitary(std::move(u));
}

ModeOperator phase_shifter(double theta, Mode mode, FockCutoff cutoff) {
  if (!std::isfinite(theta)) throw std::invalid_argument("phase_shifter: phase must be finite");
  CMatrix p = CMatrix::Zero(cutoff.joint_dim(), cutoff.joint_dim());
  for (int j = 0; j < cutoff.joint_dim(); ++j) {
    const int n = mode == Mode::signal ? cutoff.signal_of(j) : cutoff.idler_of(j);
    p(j, j) = std::polar(1.0, n * theta);
  }
  return ModeOperator::unitary(std::move(p));
}

std::vector<CMatrix> pure_loss_kraus(double eta, FockCutoff cutoff) {
  check_transmissivity(eta, "pure_loss_kraus");
  const int d = cutoff.dim();
  std::vector<CMatrix> kraus(d, CMatrix::Zero(d, d));
  for (int k = 0; k < d; ++k) {
    for (int n = k; n < d; ++n) {
      kraus[k](n - k, n) = std::sqrt(binomial(n, k) * std::pow(eta, n - k) * std::pow(1.0 - eta, k));
    }
  }
  return kraus;
}

TwoModeState loss_channel(const TwoModeState& state, Mode mode, double eta) {
  check_transmissivity(eta, "loss_channel");
  const auto cutoff = state.cutoff();
  return TwoModeState::density(apply_loss(state.density_matrix(), mode, eta, cutoff), cutoff);
}

TwoModeState loss_channel_kraus(const TwoModeState& state, Mode mode, double eta) {
  const auto cutoff = state.cutoff();
  const auto kraus = pure_loss_kraus(eta, cutoff);
  return TwoModeState::density(apply_local_kraus(state.density_matrix(), kraus, mode, cutoff),
                               cutoff);
}

TwoModeState prepare_source(const InterferometerConfig& config) {
  config.loss.validate();
  const auto cutoff = config.cutoff;
  CMatrix rho = tmsv_state(config.squeezing, cutoff).density_matrix();
  rho = apply_loss(rho, Mode::signal, config.loss.eta_p_s, cutoff);
  rho = apply_loss(rho, Mode::idler, config.loss.eta_p_i, cutoff);
  return TwoModeState::density(project_total_number(rho, cutoff, cutoff.max_photons()), cutoff);
}

TwoModeState evolve_pipeline(const InterferometerConfig& config) {
  const auto cutoff = config.cutoff;
  const CMatrix sigma2 = prepare_source(config).density_matrix();
  const auto ops = mzi(config.phase, cutoff);
  CMatrix rho = ops.m * sigma2 * ops.m.adjoint();
  rho = apply_loss(rho, Mode::signal, config.loss.eta_d_s, cutoff);
  rho = apply_loss(rho, Mode::idler, config.loss.eta_d_i, cutoff);
  return TwoModeState::density(std::move(rho), cutoff);
}

CMatrix analytic_phase_derivative(const InterferometerConfig& config) {
  const auto cutoff = config.cutoff;
  const CMatrix sigma2 = prepare_source(config).density_matrix();
  const auto ops = mzi(config.phase, cutoff);
  const CMatrix half = ops.dm * sigma2 * ops.m.adjoint();
  CMatrix drho = half + half.adjoint();
  drho = apply_loss(drho, Mode::signal, config.loss.eta_d_s, cutoff);
  drho = apply_loss(drho, Mode::idler, config.loss.eta_d_i, cutoff);
  return drho;
}

PureEvolution evolve_pure(const InterferometerConfig& config) {
  if (!config.loss.lossless()) throw std::invalid_argument("evolve_pure: configuration has loss");
  const auto cutoff = config.cutoff;
  CVector psi = tmsv_state(config.squeezing, cutoff).amplitudes();
  for (int n = 0; n <= cutoff.max_photons(); ++n) {
    if (2 * n > cutoff.max_photons()) psi(cutoff.joint_index(n, n)) = 0.0;
  }
  const auto ops = mzi(config.phase, cutoff);
  return {ops.m * psi, ops.dm * psi};
}

}  // namespace qmetro
