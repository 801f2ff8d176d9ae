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

// Model fitting to joint-count histograms, bootstrap confidence bands and the
// shot-noise limit with its uncertainty.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qmetro/detectors.hpp"
#include "qmetro/optics.hpp"

namespace qmetro {

using CountTable = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Joint counts C(j, k) per phase setting. Vacuum events included.
struct CountHistogram {
  std::vector<double> phases;
  std::vector<CountTable> counts;
  std::int64_t trials_per_phase = 0;

  /// Shape and sign checks; in strict mode every phase must account for all
  /// trials.
  void validate(bool strict) const;
  std::int64_t total_counts() const;
  std::size_t distinct_phases() const;
};

enum class FitParameter { z, eta_p_s, eta_p_i, eta_d_s, eta_d_i };

std::string to_string(FitParameter p);
FitParameter fit_parameter_from_string(const std::string& name);
double get_parameter(const InterferometerConfig& config, FitParameter p);
void set_parameter(InterferometerConfig& config, FitParameter p, double value);

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitOptions {
  std::vector<FitParameter> free{FitParameter::z, FitParameter::eta_p_s, FitParameter::eta_p_i};
  int starts = 8;
  /// C10 / C01 are left out of the likelihood unless set; the remaining cells
  /// are fitted conditionally on not being single-photon events.
  bool include_single_photon = false;
  bool strict = true;
  int max_evaluations = 6000;
  std::uint64_t seed = 1;
  double z_upper = 0.9;
  /// Starting point in natural units, one value per free parameter.
  std::optional<std::vector<double>> initial;
  /// Edge of the initial simplex in the transformed coordinates.
  double initial_step = 0.5;
  /// Simplex stopping rule: vertex spread in transformed coordinates.
  double x_tolerance = 1e-7;
  int threads = 0;
};

struct FitResult {
  InterferometerConfig config;  // fixed values plus estimates
  std::vector<FitParameter> free;
  RVector estimates;
  RMatrix covariance;  // natural units, from the observed information
  bool covariance_valid = false;
  bool identifiable = true;
  bool converged = false;
  bool at_boundary = false;
  double log_likelihood = 0.0;
  double deviance = 0.0;  // G^2 against the saturated model
  int degrees_of_freedom = 0;
  double n_bar_hat = 0.0;
  int evaluations = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  double standard_error(FitParameter p) const;
};

/// Multinomial log-likelihood sum c log p of the histogram, dropping constant
/// terms. With single-photon cells excluded, the remaining cells use the
/// conditional probabilities p / (1 - p10 - p01).
double histogram_log_likelihood(const CountHistogram& hist, const InterferometerConfig& config,
                                const DetectorPair& detectors, bool include_single_photon);

/// Multinomial maximum likelihood over the free parameters, with the rest
/// taken from `fixed`. Nelder-Mead from several starts in a logit-transformed
/// space. Throws std::invalid_argument for all-zero histograms.
FitResult fit_model(const CountHistogram& hist, const InterferometerConfig& fixed, const DetectorPair& detectors,
                    const FitOptions& options = {});

/// Draws `trials` outcomes per phase from the model.
CountHistogram simulate_counts(const InterferometerConfig& config, const DetectorPair& detectors,
                               std::span<const double> phases, std::int64_t trials, std::uint64_t seed);

/// Multinomial resample of every phase from its empirical frequencies.
CountHistogram resample(const CountHistogram& hist, std::uint64_t seed, std::uint64_t replicate);

struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct ConfidenceBand {
  RVector point;
  RVector lower;
  RVector upper;

  double mean_width() const;
};

using Statistic = std::function<RVector(const CountHistogram&)>;

/// Percentile bootstrap. Replicate b draws from an independent stream derived
/// from (seed, b), so the band does not depend on the thread count.
ConfidenceBand bootstrap_ci(const CountHistogram& hist, const Statistic& statistic,
                            const BootstrapOptions& options = {});

/// fit -> CFI sweep statistic: refits the model to each resample (starting
/// from `reference`) and evaluates the classical FI on `phase_grid`.
Statistic fisher_statistic(const InterferometerConfig& fixed, const DetectorPair& detectors, FitOptions fit_options,
                           std::vector<double> phase_grid, const DetectorPair& evaluation_detectors);

struct SnlInterval {
  double snl = 0.0;
  double sigma = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Delta-method interval for nbar(z) at the given two-sided level.
SnlInterval snl_with_uncertainty(const FitResult& fit, double level = 0.95);

/// Two-sided standard-normal quantile for `level`, e.g. 1.95996 for 0.95.
double normal_two_sided_quantile(double level);

}  // namespace qmetro
