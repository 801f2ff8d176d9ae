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

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>

#include <omp.h>

#include "qmetro/inference.hpp"
#include "qmetro/interferometer.hpp"
#include "qmetro/metrology.hpp"

namespace qmetro {

namespace {

/// Type-7 sample quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double ConfidenceBand::mean_width() const {
  if (lower.size() == 0) return 0.0;
  return (upper - lower).mean();
}

ConfidenceBand bootstrap_ci(const CountHistogram& hist, const Statistic& statistic, const BootstrapOptions& options) {
  if (options.resamples < 100) throw std::invalid_argument("bootstrap_ci: at least 100 resamples are required");
  if (!(options.level > 0.0 && options.level < 1.0)) throw std::invalid_argument("bootstrap_ci: level must be in (0, 1)");
  hist.validate(false);

  ConfidenceBand band;
  band.point = statistic(hist);
  const auto m = band.point.size();
  const auto b_count = static_cast<std::size_t>(options.resamples);
  std::vector<RVector> replicates(b_count);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int b = 0; b < options.resamples; ++b) {
    try {
      RVector v = statistic(resample(hist, options.seed, static_cast<std::uint64_t>(b)));
      if (v.size() != m) throw std::runtime_error("bootstrap_ci: statistic changed length between resamples");
      replicates[static_cast<std::size_t>(b)] = std::move(v);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  band.lower.resize(m);
  band.upper.resize(m);
  const double alpha = 1.0 - options.level;
  std::vector<double> column(b_count);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t b = 0; b < b_count; ++b) column[b] = replicates[b](i);
    std::sort(column.begin(), column.end());
    band.lower(i) = quantile_sorted(column, 0.5 * alpha);
    band.upper(i) = quantile_sorted(column, 1.0 - 0.5 * alpha);
  }
  return band;
}

Statistic fisher_statistic(const InterferometerConfig& fixed, const DetectorPair& detectors, FitOptions fit_options,
                           std::vector<double> phase_grid, const DetectorPair& evaluation_detectors) {
  fit_options.threads = 1;
  return [fixed, detectors, fit_options, grid = std::move(phase_grid),
          eval = evaluation_detectors](const CountHistogram& hist) {
    const FitResult fit = fit_model(hist, fixed, detectors, fit_options);
    const Interferometer kernel(fit.config);
    RVector out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) out(static_cast<Eigen::Index>(i)) = cfi_at(kernel, grid[i], eval);
    return out;
  };
}

}  // namespace qmetro
