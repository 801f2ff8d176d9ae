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

#include "qmetro/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace qmetro {

namespace {

std::vector<std::string> numbered_labels(int n_max) {
  std::vector<std::string> labels;
  for (int n = 0; n < n_max; ++n) labels.push_back(std::to_string(n));
  labels.push_back(std::to_string(n_max) + "+");
  return labels;
}

void check_k_max(const DetectorPovm& povm, FockCutoff cutoff) {
  if (povm.k_max() < cutoff.max_photons()) {
    throw CutoffMismatch("POVM k_max " + std::to_string(povm.k_max()) + " below state cutoff " +
                         std::to_string(cutoff.max_photons()));
  }
}

}  // namespace

DetectorPovm::DetectorPovm(RMatrix theta, std::vector<std::string> labels)
    : theta_(std::move(theta)), labels_(std::move(labels)) {
  if (theta_.rows() == 0 || theta_.cols() == 0) throw std::invalid_argument("DetectorPovm: empty theta");
  if (labels_.empty()) {
    for (int n = 0; n < theta_.cols(); ++n) labels_.push_back(std::to_string(n));
  }
  if (static_cast<Eigen::Index>(labels_.size()) != theta_.cols()) {
    throw std::invalid_argument("DetectorPovm: one label per outcome required");
  }
  if (theta_.minCoeff() < 0.0 || theta_.maxCoeff() > 1.0) {
    throw std::invalid_argument("DetectorPovm: entries must lie in [0, 1]");
  }
  for (Eigen::Index k = 0; k < theta_.rows(); ++k) {
    if (std::abs(theta_.row(k).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("DetectorPovm: row " + std::to_string(k) + " violates completeness");
    }
  }
}

DetectorPovm ideal_pnr_povm(int n_max, int k_max) {
  if (n_max < 1 || n_max > k_max) throw std::invalid_argument("ideal_pnr_povm: need 1 <= n_max <= k_max");
  RMatrix theta = RMatrix::Zero(k_max + 1, n_max + 1);
  for (int k = 0; k <= k_max; ++k) theta(k, std::min(k, n_max)) = 1.0;
  return DetectorPovm(std::move(theta), numbered_labels(n_max));
}

DetectorPovm click_povm_from(const DetectorPovm& pnr) {
  RMatrix theta(pnr.theta().rows(), 2);
  theta.col(0) = pnr.theta().col(0);
  theta.col(1) = pnr.theta().rightCols(pnr.outcomes() - 1).rowwise().sum();
  return DetectorPovm(std::move(theta), {"no-click", "click"});
}

DetectorPovm efficiency_povm(double eta, int n_max, int k_max) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("efficiency_povm: eta must lie in [0, 1]");
  if (n_max < 1 || n_max > k_max) throw std::invalid_argument("efficiency_povm: need 1 <= n_max <= k_max");
  RMatrix theta = RMatrix::Zero(k_max + 1, n_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    for (int n = 0; n <= k; ++n) {
      const double log_binom = std::lgamma(k + 1.0) - std::lgamma(n + 1.0) - std::lgamma(k - n + 1.0);
      const double p = std::round(std::exp(log_binom)) * std::pow(eta, n) * std::pow(1.0 - eta, k - n);
      theta(k, std::min(n, n_max)) += p;
    }
  }
  return DetectorPovm(std::move(theta), numbered_labels(n_max));
}

DetectorPair DetectorPair::ideal_pnr(int n_max, int k_max) {
  auto povm = ideal_pnr_povm(n_max, k_max);
  return {povm, povm};
}

DetectorPair DetectorPair::click(int k_max) {
  auto povm = click_povm_from(ideal_pnr_povm(k_max, k_max));
  return {povm, povm};
}

RMatrix outcome_table(const RMatrix& populations, const DetectorPair& detectors) {
  const auto d = populations.rows();
  if (detectors.signal.theta().rows() < d || detectors.idler.theta().rows() < d) {
    throw CutoffMismatch("outcome_table: POVM k_max below state cutoff");
  }
  return detectors.signal.theta().topRows(d).transpose() * populations * detectors.idler.theta().topRows(d);
}

OutcomeDistribution joint_outcome_probabilities(const TwoModeState& state, const DetectorPovm& signal,
                                                const DetectorPovm& idler) {
  const auto cutoff = state.cutoff();
  check_k_max(signal, cutoff);
  check_k_max(idler, cutoff);
  RMatrix pop(cutoff.dim(), cutoff.dim());
  for (int s = 0; s < cutoff.dim(); ++s) {
    for (int i = 0; i < cutoff.dim(); ++i) pop(s, i) = state.population(s, i);
  }
  const DetectorPair pair{signal, idler};
  OutcomeDistribution out;
  out.probs = outcome_table(pop, pair);
  out.dprobs = RMatrix::Zero(out.probs.rows(), out.probs.cols());
  return out;
}

OutcomeDistribution joint_outcome_probabilities(const TwoModeState& state, const CMatrix& dstate,
                                                const DetectorPovm& signal, const DetectorPovm& idler,
                                                double phase) {
  auto out = joint_outcome_probabilities(state, signal, idler);
  const auto cutoff = state.cutoff();
  if (dstate.rows() != cutoff.joint_dim()) throw CutoffMismatch("derivative shape does not match state");
  RMatrix dpop(cutoff.dim(), cutoff.dim());
  for (int s = 0; s < cutoff.dim(); ++s) {
    for (int i = 0; i < cutoff.dim(); ++i) {
      const int j = cutoff.joint_index(s, i);
      dpop(s, i) = dstate(j, j).real();
    }
  }
  out.dprobs = outcome_table(dpop, {signal, idler});
  out.phase = phase;
  return out;
}

void ProbeSet::validate() const {
  if (mean_photons.size() != shots.size()) throw std::invalid_argument("ProbeSet: one shot count per probe");
  for (double a : mean_photons) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("ProbeSet: negative probe amplitude");
  }
  for (double s : shots) {
    if (!(s > 0.0)) throw std::invalid_argument("ProbeSet: shots must be positive");
  }
}

ProbeSet ProbeSet::geometric(double first, double last, int count, double shots_per_probe) {
  if (count < 2 || !(first > 0.0) || !(last > first)) throw std::invalid_argument("ProbeSet::geometric: bad ladder");
  ProbeSet p;
  const double ratio = std::pow(last / first, 1.0 / (count - 1));
  double a = first;
  for (int m = 0; m < count; ++m) {
    p.mean_photons.push_back(m == count - 1 ? last : a);
    p.shots.push_back(shots_per_probe);
    a *= ratio;
  }
  return p;
}

RMatrix coherent_probe_matrix(const ProbeSet& probes, int k_max) {
  if (k_max < 0) throw std::invalid_argument("coherent_probe_matrix: k_max must be non-negative");
  for (double a : probes.mean_photons) {
    if (!(a >= 0.0)) throw std::invalid_argument("coherent_probe_matrix: negative amplitude");
  }
  RMatrix c(probes.mean_photons.size(), k_max + 1);
  for (std::size_t m = 0; m < probes.mean_photons.size(); ++m) {
    const double mu = probes.mean_photons[m];
    for (int k = 0; k <= k_max; ++k) {
      c(m, k) = mu == 0.0 ? (k == 0 ? 1.0 : 0.0)
                          : std::exp(k * std::log(mu) - mu - std::lgamma(k + 1.0));
    }
  }
  return c;
}

RVector poisson_tail(const ProbeSet& probes, int k_max) {
  const RMatrix c = coherent_probe_matrix(probes, k_max);
  return (1.0 - c.rowwise().sum().array()).max(0.0).matrix();
}

void ResponseMatrix::validate() const {
  if (static_cast<Eigen::Index>(shots.size()) != frequencies.rows()) {
    throw std::invalid_argument("ResponseMatrix: one shot count per probe row");
  }
  if (frequencies.size() == 0) throw std::invalid_argument("ResponseMatrix: empty");
  if (frequencies.minCoeff() < 0.0 || frequencies.maxCoeff() > 1.0) {
    throw std::invalid_argument("ResponseMatrix: frequencies must lie in [0, 1]");
  }
  for (Eigen::Index m = 0; m < frequencies.rows(); ++m) {
    if (std::abs(frequencies.row(m).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("ResponseMatrix: row " + std::to_string(m) + " is not normalised");
    }
  }
}

}  // namespace qmetro
