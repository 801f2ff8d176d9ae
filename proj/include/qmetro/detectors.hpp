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

// Fock-diagonal detector POVMs and coherent-probe detector tomography.
//
// A DetectorPovm stores theta(k, n): the probability that k incident photons
// produce outcome n. Rows are indexed by photon number k = 0..k_max, columns by
// outcome.

#include <cstdint>
#include <string>
#include <vector>

#include "qmetro/fock.hpp"

namespace qmetro {

class DetectorPovm {
 public:
  /// Validates entries in [0, 1] and row sums equal to 1 within 1e-9.
  DetectorPovm(RMatrix theta, std::vector<std::string> labels = {});

  const RMatrix& theta() const { return theta_; }
  const std::vector<std::string>& labels() const { return labels_; }
  int k_max() const { return static_cast<int>(theta_.rows()) - 1; }
  int outcomes() const { return static_cast<int>(theta_.cols()); }

 private:
  RMatrix theta_;
  std::vector<std::string> labels_;
};

/// Outcome n < n_max for exactly n photons; outcome n_max absorbs k >= n_max.
DetectorPovm ideal_pnr_povm(int n_max, int k_max);
/// Column 0 ("no-click") kept, all other columns summed into "click".
DetectorPovm click_povm_from(const DetectorPovm& pnr);
/// Binomial thinning with efficiency eta, saturating at n_max.
DetectorPovm efficiency_povm(double eta, int n_max, int k_max);

struct DetectorPair {
  DetectorPovm signal;
  DetectorPovm idler;

  static DetectorPair ideal_pnr(int n_max, int k_max);
  static DetectorPair click(int k_max);
};

/// Joint outcome table p(j, k) and its phase derivative.
struct OutcomeDistribution {
  RMatrix probs;
  RMatrix dprobs;
  double phase = 0.0;

  double total() const { return probs.sum(); }
};

/// p(j,k) = sum_{m,n} P(m,n) theta_s(m,j) theta_i(n,k) for a table of Fock
/// populations P indexed [n_s][n_i].
RMatrix outcome_table(const RMatrix& populations, const DetectorPair& detectors);

OutcomeDistribution joint_outcome_probabilities(const TwoModeState& state, const DetectorPovm& signal,
                                                const DetectorPovm& idler);
/// Same with the derivative carried along from d(state)/d(theta).
OutcomeDistribution joint_outcome_probabilities(const TwoModeState& state, const CMatrix& dstate,
                                                const DetectorPovm& signal, const DetectorPovm& idler,
                                                double phase);

// ---------------------------------------------------------------------------
// Tomography

struct ProbeSet {
  std::vector<double> mean_photons;  // |alpha_m|^2
  std::vector<double> shots;         // trials recorded per probe

  void validate() const;
  /// Geometric ladder from `first` to `last` with `count` points.
  static ProbeSet geometric(double first, double last, int count, double shots_per_probe);
};

/// C(m, k) = |alpha_m|^{2k} exp(-|alpha_m|^2) / k!, k = 0..k_max. Rows are not
/// renormalised; the deficit is the Poisson tail above k_max.
RMatrix coherent_probe_matrix(const ProbeSet& probes, int k_max);
/// Upper Poisson tail mass lost per probe row.
RVector poisson_tail(const ProbeSet& probes, int k_max);

/// Row-stochastic empirical frequencies, probes x outcomes.
struct ResponseMatrix {
  RMatrix frequencies;
  std::vector<double> shots;

  void validate() const;
};

class IdentifiabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TomographyOptions {
  int max_iterations = 100000;
  double tolerance = 1e-10;  // stop when the log-likelihood gain drops below this
  bool allow_rank_deficient = false;
  bool record_trace = true;
};

struct TomographyResult {
  DetectorPovm povm;
  int iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;  // projected onto the completeness constraints
  double condition_number = 0.0;
  int rank = 0;
  std::vector<double> log_likelihood_trace;
};

/// Maximum-likelihood POVM from R = C Pi, by an expectation-maximisation
/// fixed point that keeps theta >= 0 and every row on the simplex.
TomographyResult tomography_mle(const ResponseMatrix& response, const RMatrix& probe_matrix,
                                const TomographyOptions& options = {});

/// Multinomial log-likelihood sum_m shots_m sum_n R_mn log (C theta)_mn.
double tomography_log_likelihood(const ResponseMatrix& response, const RMatrix& probe_matrix,
                                 const RMatrix& theta);

/// Noiseless responses R = C~ theta with C~ the row-normalised probe matrix.
ResponseMatrix expected_response(const ProbeSet& probes, const DetectorPovm& povm);
/// Multinomial sampling of the detector response.
ResponseMatrix sample_response(const ProbeSet& probes, const DetectorPovm& povm, std::uint64_t seed);

}  // namespace qmetro
