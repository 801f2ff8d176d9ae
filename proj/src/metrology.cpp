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

#include "qmetro/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include <omp.h>

namespace qmetro {

namespace {

int thread_count(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

double sld_sum(const CMatrix& rho, const CMatrix& drho, double floor) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  const RVector& lambda = es.eigenvalues();
  const CMatrix d = es.eigenvectors().adjoint() * drho * es.eigenvectors();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < lambda.size(); ++a) {
    for (Eigen::Index b = 0; b < lambda.size(); ++b) {
      const double s = lambda(a) + lambda(b);
      if (s > floor) acc += std::norm(d(a, b)) / s;
    }
  }
  return 2.0 * acc;
}

InterferometerConfig lossless(const InterferometerConfig& config) {
  InterferometerConfig c = config;
  c.loss = LossModel{};
  return c;
}

double lossless_sector_qfi(const InterferometerConfig& config) {
  const Interferometer kernel(lossless(config));
  const auto state = kernel.detected(0.0);
  return quantum_fisher(state.rho, state.drho);
}

FisherReport empty_report(const InterferometerConfig& config, std::span<const double> phases) {
  if (phases.empty()) throw std::invalid_argument("sweep_fisher: empty phase grid");
  FisherReport r;
  r.config = config;
  r.phase_grid.assign(phases.begin(), phases.end());
  r.cfi.assign(phases.size(), 0.0);
  r.qfi.assign(phases.size(), 0.0);
  r.snl = shot_noise_limit(config.squeezing);
  r.config_hash = config_hash(config);
  return r;
}

void finish_report(FisherReport& r) {
  r.cfi_per_photon.resize(r.cfi.size());
  r.qfi_per_photon.resize(r.qfi.size());
  const double n = r.snl;
  for (std::size_t i = 0; i < r.cfi.size(); ++i) {
    r.cfi_per_photon[i] = n > 0.0 ? r.cfi[i] / n : 0.0;
    r.qfi_per_photon[i] = n > 0.0 ? r.qfi[i] / n : 0.0;
  }
}

}  // namespace

double classical_fisher(const OutcomeDistribution& dist, FisherDiagnostics* diagnostics) {
  if (dist.probs.rows() != dist.dprobs.rows() || dist.probs.cols() != dist.dprobs.cols()) {
    throw std::invalid_argument("classical_fisher: probability and derivative tables differ in shape");
  }
  FisherDiagnostics diag;
  double fi = 0.0;
  for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
    const double p = dist.probs.data()[i];
    const double dp = dist.dprobs.data()[i];
    if (p < -kProbabilityFloor) throw std::invalid_argument("classical_fisher: negative probability");
    if (p <= kProbabilityFloor) {
      if (std::abs(dp) <= kDerivativeFloor) {
        ++diag.skipped;
      } else {
        ++diag.near_singular;
      }
      continue;
    }
    fi += dp * dp / p;
  }
  if (diagnostics) *diagnostics = diag;
  return fi;
}

double quantum_fisher(const CMatrix& rho, const CMatrix& drho, double eigenvalue_floor) {
  if (rho.rows() != rho.cols() || drho.rows() != rho.rows() || drho.cols() != rho.cols()) {
    throw std::invalid_argument("quantum_fisher: shape mismatch");
  }
  if (hermiticity_error(rho) > 1e-10 || hermiticity_error(drho) > 1e-10) {
    throw std::invalid_argument("quantum_fisher: non-Hermitian input");
  }
  return sld_sum(rho, drho, eigenvalue_floor);
}

double quantum_fisher_pure(const CVector& psi, const CVector& dpsi) {
  const double norm = psi.squaredNorm();
  if (norm <= 0.0) throw std::invalid_argument("quantum_fisher_pure: zero state");
  return 4.0 * (dpsi.squaredNorm() - std::norm(psi.dot(dpsi)) / norm);
}

double quantum_fisher(const SectorOperator& rho, const SectorOperator& drho, double eigenvalue_floor) {
  if (rho.blocks.size() != drho.blocks.size()) throw std::invalid_argument("quantum_fisher: sector mismatch");
  double acc = 0.0;
  for (std::size_t n = 0; n < rho.blocks.size(); ++n) acc += sld_sum(rho.blocks[n], drho.blocks[n], eigenvalue_floor);
  return acc;
}

double shot_noise_limit(const SqueezingParams& squeezing) { return squeezing.mean_photons(); }

std::vector<double> midpoint_phase_grid(std::size_t points) {
  if (points == 0) throw std::invalid_argument("midpoint_phase_grid: need at least one point");
  std::vector<double> grid(points);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = (static_cast<double>(i) + 0.5) * step;
  return grid;
}

OutcomeDistribution distribution_at(const Interferometer& interferometer, double phase,
                                    const DetectorPair& detectors) {
  const auto pop = interferometer.populations(phase);
  return {outcome_table(pop.p, detectors), outcome_table(pop.dp, detectors), phase};
}

double cfi_at(const Interferometer& interferometer, double phase, const DetectorPair& detectors) {
  return classical_fisher(distribution_at(interferometer, phase, detectors));
}

FisherReport sweep_fisher(const InterferometerConfig& config, std::span<const double> phases,
                          const DetectorPair& detectors, const SweepOptions& options) {
  FisherReport report = empty_report(config, phases);
  const Interferometer kernel(config);
  const auto n = static_cast<std::int64_t>(phases.size());
  int near_singular = 0;

#pragma omp parallel for schedule(static) num_threads(thread_count(options.threads)) reduction(+ : near_singular)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto state = kernel.detected(phases[i]);
    const OutcomeDistribution dist{outcome_table(state.rho.populations(kernel.cutoff()), detectors),
                                   outcome_table(state.drho.populations(kernel.cutoff()), detectors),
                                   phases[i]};
    FisherDiagnostics diag;
    report.cfi[i] = classical_fisher(dist, &diag);
    near_singular += diag.near_singular;
    if (options.compute_qfi) report.qfi[i] = quantum_fisher(state.rho, state.drho);
  }

  report.near_singular_outcomes = near_singular;
  if (options.compute_qfi) report.qfi_lossless = lossless_sector_qfi(config);
  finish_report(report);
  return report;
}

FisherReport sweep_fisher_reference(const InterferometerConfig& config, std::span<const double> phases,
                                    const DetectorPair& detectors, bool compute_qfi) {
  FisherReport report = empty_report(config, phases);
  const auto cutoff = config.cutoff;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto at = config.with_phase(phases[i]);
    const auto rho = evolve_pipeline(at);
    const CMatrix drho = analytic_phase_derivative(at);
    FisherDiagnostics diag;
    report.cfi[i] =
        classical_fisher(joint_outcome_probabilities(rho, drho, detectors.signal, detectors.idler, phases[i]), &diag);
    report.near_singular_outcomes += diag.near_singular;
    if (compute_qfi) {
      report.qfi[i] = quantum_fisher(dephase_total_number(rho.density_matrix(), cutoff),
                                     dephase_total_number(drho, cutoff));
    }
  }
  if (compute_qfi) {
    const auto at = lossless(config);
    const auto rho = evolve_pipeline(at);
    report.qfi_lossless = quantum_fisher(dephase_total_number(rho.density_matrix(), cutoff),
                                         dephase_total_number(analytic_phase_derivative(at), cutoff));
  }
  finish_report(report);
  return report;
}

double sub_snl_fraction(const FisherReport& report, FisherKind which) {
  if (!(report.snl > 0.0)) throw std::invalid_argument("sub_snl_fraction: shot-noise limit is zero");
  const auto& fi = which == FisherKind::classical ? report.cfi : report.qfi;
  if (fi.empty()) return 0.0;
  const auto above = std::count_if(fi.begin(), fi.end(), [&](double f) { return f > report.snl; });
  return static_cast<double>(above) / static_cast<double>(fi.size());
}

PhaseOptimum maximize_cfi(const Interferometer& interferometer, const DetectorPair& detectors, int coarse_points,
                          double tolerance) {
  const auto grid = midpoint_phase_grid(static_cast<std::size_t>(std::max(coarse_points, 3)));
  PhaseOptimum best{grid[0], -1.0};
  for (double theta : grid) {
    const double f = cfi_at(interferometer, theta, detectors);
    if (f > best.value) best = {theta, f};
  }
  const double step = grid[1] - grid[0];
  double lo = best.phase - step;
  double hi = best.phase + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = cfi_at(interferometer, x1, detectors);
  double f2 = cfi_at(interferometer, x2, detectors);
  while (hi - lo > tolerance) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = cfi_at(interferometer, x2, detectors);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = cfi_at(interferometer, x1, detectors);
    }
  }
  const double mid = 0.5 * (lo + hi);
  const double fm = cfi_at(interferometer, mid, detectors);
  if (fm > best.value) best = {mid, fm};
  return best;
}

std::vector<RatioPoint> pnr_click_ratio(const InterferometerConfig& config, std::span<const double> nbar_grid,
                                        int n_max, int threads) {
  if (nbar_grid.empty()) throw std::invalid_argument("pnr_click_ratio: empty photon-number grid");
  const int kmax = config.cutoff.max_photons();
  const auto pnr = DetectorPair::ideal_pnr(std::min(n_max, kmax), kmax);
  const auto click = DetectorPair::click(kmax);
  std::vector<RatioPoint> out(nbar_grid.size());
  const auto n = static_cast<std::int64_t>(nbar_grid.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(threads))
  for (std::int64_t i = 0; i < n; ++i) {
    InterferometerConfig c = config;
    c.squeezing = SqueezingParams::from_mean_photons(nbar_grid[i]);
    const Interferometer kernel(c);
    RatioPoint p;
    p.mean_photons = nbar_grid[i];
    p.max_cfi_pnr = maximize_cfi(kernel, pnr).value;
    p.max_cfi_click = maximize_cfi(kernel, click).value;
    p.ratio = p.max_cfi_click > 0.0 ? p.max_cfi_pnr / p.max_cfi_click : 1.0;
    out[i] = p;
  }
  return out;
}

double critical_added_loss(const InterferometerConfig& config, double phase, const DetectorPair& detectors,
                           double tolerance) {
  const double snl = shot_noise_limit(config.squeezing);
  auto margin = [&](double added) {
    InterferometerConfig c = config;
    c.loss.eta_d_s *= 1.0 - added;
    c.loss.eta_d_i *= 1.0 - added;
    return cfi_at(Interferometer(c), phase, detectors) - snl;
  };
  if (margin(0.0) <= 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    (margin(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::string config_hash(const InterferometerConfig& config) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "z=%.17g;ep=%.17g,%.17g;ed=%.17g,%.17g;phase=%.17g;cutoff=%d",
                config.squeezing.z(), config.loss.eta_p_s, config.loss.eta_p_i, config.loss.eta_d_s,
                config.loss.eta_d_i, config.phase, config.cutoff.max_photons());
  std::uint64_t h = 14695981039346656037ull;
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace qmetro
