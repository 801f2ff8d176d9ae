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

#include "qmetro/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <stdexcept>

#include <omp.h>

#include "qmetro/interferometer.hpp"
#include "sampling.hpp"
#include "simplex.hpp"

namespace qmetro {

namespace {

constexpr double kBoundaryLogit = 12.0;

int thread_count(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

double upper_bound(FitParameter p, const FitOptions& options) {
  return p == FitParameter::z ? options.z_upper : 1.0;
}

bool is_single_photon_cell(Eigen::Index j, Eigen::Index k) { return (j == 1 && k == 0) || (j == 0 && k == 1); }

std::vector<RMatrix> model_tables(const InterferometerConfig& config, const DetectorPair& detectors,
                                  std::span<const double> phases) {
  const Interferometer kernel(config);
  std::vector<RMatrix> out;
  out.reserve(phases.size());
  for (double phase : phases) out.push_back(outcome_table(kernel.probabilities(phase), detectors));
  return out;
}

void check_shapes(const CountHistogram& hist, const DetectorPair& detectors) {
  for (const auto& c : hist.counts) {
    if (c.rows() > detectors.signal.outcomes() || c.cols() > detectors.idler.outcomes())
      throw std::invalid_argument("count table has more outcomes than the detector POVMs");
  }
}

/// Per-phase empirical frequencies c / T. Dividing before summing makes the
/// objective exactly invariant under a common rescaling of the counts.
std::vector<RMatrix> frequencies(const CountHistogram& hist) {
  std::vector<RMatrix> f;
  f.reserve(hist.counts.size());
  const double t = static_cast<double>(hist.trials_per_phase);
  for (const auto& c : hist.counts) {
    RMatrix m(c.rows(), c.cols());
    for (Eigen::Index j = 0; j < c.rows(); ++j)
      for (Eigen::Index k = 0; k < c.cols(); ++k) m(j, k) = static_cast<double>(c(j, k)) / t;
    f.push_back(std::move(m));
  }
  return f;
}

/// sum_phases sum_cells f log p, per trial.
double mean_log_likelihood(const std::vector<RMatrix>& freqs, const std::vector<RMatrix>& model, bool singles) {
  double total = 0.0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const RMatrix& f = freqs[i];
    const RMatrix& p = model[i];
    double log_norm = 0.0;
    if (!singles) {
      double ps = 0.0;
      if (p.rows() > 1) ps += p(1, 0);
      if (p.cols() > 1) ps += p(0, 1);
      const double rest = 1.0 - ps;
      if (!(rest > 0.0)) return -HUGE_VAL;
      log_norm = std::log(rest);
    }
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) {
        if (f(j, k) == 0.0) continue;
        if (!singles && is_single_photon_cell(j, k)) continue;
        const double pj = p(j, k);
        if (!(pj > 0.0)) return -HUGE_VAL;
        total += f(j, k) * (std::log(pj) - log_norm);
      }
    }
  }
  return total;
}

/// Saturated-model counterpart of mean_log_likelihood.
double saturated_mean_log_likelihood(const std::vector<RMatrix>& freqs, bool singles) {
  double total = 0.0;
  for (const RMatrix& f : freqs) {
    double fs = 0.0, sum = f.sum();
    if (!singles) {
      if (f.rows() > 1) fs += f(1, 0);
      if (f.cols() > 1) fs += f(0, 1);
    }
    const double norm = sum - fs;
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) {
        if (f(j, k) == 0.0) continue;
        if (!singles && is_single_photon_cell(j, k)) continue;
        total += f(j, k) * std::log(f(j, k) / norm);
      }
    }
  }
  return total;
}

InterferometerConfig apply_natural(const InterferometerConfig& fixed, std::span<const FitParameter> free,
                                   const RVector& x) {
  InterferometerConfig c = fixed;
  for (std::size_t i = 0; i < free.size(); ++i) set_parameter(c, free[i], x(static_cast<Eigen::Index>(i)));
  return c;
}

RVector to_natural(std::span<const FitParameter> free, const RVector& u, const FitOptions& options) {
  RVector x(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) x(i) = upper_bound(free[i], options) * logistic(u(i));
  return x;
}

RVector to_transformed(std::span<const FitParameter> free, const RVector& x, const FitOptions& options) {
  RVector u(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = upper_bound(free[i], options);
    const double p = std::clamp(x(i) / hi, 1e-9, 1.0 - 1e-9);
    u(i) = logit(p);
  }
  return u;
}

/// Start point from the fixed configuration, with z matched to the observed
/// probability of any detection.
RVector default_start(const CountHistogram& hist, const InterferometerConfig& fixed,
                      std::span<const FitParameter> free, const FitOptions& options) {
  RVector x(static_cast<Eigen::Index>(free.size()));
  double vacuum = 0.0;
  for (const auto& c : hist.counts)
    vacuum += c.size() > 0 ? static_cast<double>(c(0, 0)) / static_cast<double>(hist.trials_per_phase) : 0.0;
  vacuum /= static_cast<double>(hist.counts.size());
  const auto& l = fixed.loss;
  const double es = std::clamp(l.eta_p_s * l.eta_d_s, 0.05, 1.0);
  const double ei = std::clamp(l.eta_p_i * l.eta_d_i, 0.05, 1.0);
  const double seen = 1.0 - (1.0 - es) * (1.0 - ei);
  const double z2 = std::clamp((1.0 - vacuum) / seen, 1e-6, 0.5);
  for (std::size_t i = 0; i < free.size(); ++i) {
    const auto p = free[i];
    double v = p == FitParameter::z ? std::sqrt(z2) : get_parameter(fixed, p);
    const double hi = upper_bound(p, options);
    v = std::clamp(v, 0.02 * hi, 0.98 * hi);
    x(static_cast<Eigen::Index>(i)) = v;
  }
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// CountHistogram

void CountHistogram::validate(bool strict) const {
  if (trials_per_phase <= 0) throw std::invalid_argument("trials_per_phase must be positive");
  if (phases.size() != counts.size()) throw std::invalid_argument("one count table per phase setting is required");
  if (phases.empty()) throw std::invalid_argument("histogram has no phase settings");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& c = counts[i];
    if (!std::isfinite(phases[i])) throw std::invalid_argument("non-finite phase setting");
    if (c.size() == 0) throw std::invalid_argument("empty count table");
    if ((c.array() < 0).any()) throw std::invalid_argument("negative count");
    const std::int64_t sum = c.sum();
    if (sum > trials_per_phase)
      throw std::invalid_argument("counts at phase " + std::to_string(phases[i]) + " exceed trials_per_phase");
    if (strict && sum != trials_per_phase)
      throw std::invalid_argument("counts at phase " + std::to_string(phases[i]) +
                                  " do not account for all trials (strict mode)");
  }
}

std::int64_t CountHistogram::total_counts() const {
  std::int64_t total = 0;
  for (const auto& c : counts) total += c.sum();
  return total;
}

std::size_t CountHistogram::distinct_phases() const {
  std::set<double> s(phases.begin(), phases.end());
  return s.size();
}

// ---------------------------------------------------------------------------
// Parameters

std::string to_string(FitParameter p) {
  switch (p) {
    case FitParameter::z:
      return "z";
    case FitParameter::eta_p_s:
      return "eta_p_s";
    case FitParameter::eta_p_i:
      return "eta_p_i";
    case FitParameter::eta_d_s:
      return "eta_d_s";
    case FitParameter::eta_d_i:
      return "eta_d_i";
  }
  return "?";
}

FitParameter fit_parameter_from_string(const std::string& name) {
  for (auto p : {FitParameter::z, FitParameter::eta_p_s, FitParameter::eta_p_i, FitParameter::eta_d_s,
                 FitParameter::eta_d_i})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown fit parameter '" + name + "'");
}

double get_parameter(const InterferometerConfig& config, FitParameter p) {
  switch (p) {
    case FitParameter::z:
      return config.squeezing.z();
    case FitParameter::eta_p_s:
      return config.loss.eta_p_s;
    case FitParameter::eta_p_i:
      return config.loss.eta_p_i;
    case FitParameter::eta_d_s:
      return config.loss.eta_d_s;
    case FitParameter::eta_d_i:
      return config.loss.eta_d_i;
  }
  return 0.0;
}

void set_parameter(InterferometerConfig& config, FitParameter p, double value) {
  switch (p) {
    case FitParameter::z:
      config.squeezing = SqueezingParams(value);
      break;
    case FitParameter::eta_p_s:
      config.loss.eta_p_s = value;
      break;
    case FitParameter::eta_p_i:
      config.loss.eta_p_i = value;
      break;
    case FitParameter::eta_d_s:
      config.loss.eta_d_s = value;
      break;
    case FitParameter::eta_d_i:
      config.loss.eta_d_i = value;
      break;
  }
}

double FitResult::standard_error(FitParameter p) const {
  for (std::size_t i = 0; i < free.size(); ++i) {
    if (free[i] != p) continue;
    const auto k = static_cast<Eigen::Index>(i);
    if (!covariance_valid || covariance(k, k) < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(covariance(k, k));
  }
  throw std::invalid_argument("parameter '" + to_string(p) + "' was not fitted");
}

// ---------------------------------------------------------------------------
// Likelihood and fit

double histogram_log_likelihood(const CountHistogram& hist, const InterferometerConfig& config,
                                const DetectorPair& detectors, bool include_single_photon) {
  hist.validate(false);
  check_shapes(hist, detectors);
  const auto model = model_tables(config, detectors, hist.phases);
  return static_cast<double>(hist.trials_per_phase) *
         mean_log_likelihood(frequencies(hist), model, include_single_photon);
}

FitResult fit_model(const CountHistogram& hist, const InterferometerConfig& fixed, const DetectorPair& detectors,
                    const FitOptions& options) {
  hist.validate(options.strict);
  check_shapes(hist, detectors);
  if (hist.total_counts() == 0) throw std::invalid_argument("fit_model: all counts are zero");
  if (options.free.empty()) throw std::invalid_argument("fit_model: no free parameters");
  if (std::set<FitParameter>(options.free.begin(), options.free.end()).size() != options.free.size())
    throw std::invalid_argument("fit_model: repeated free parameter");
  if (!(options.initial_step > 0.0)) throw std::invalid_argument("fit_model: initial_step must be positive");
  if (options.starts < 1) throw std::invalid_argument("fit_model: at least one start is required");
  if (!(options.z_upper > 0.0 && options.z_upper < 1.0)) throw std::invalid_argument("fit_model: z_upper must be in (0, 1)");
  if (options.initial && options.initial->size() != options.free.size())
    throw std::invalid_argument("fit_model: initial point has the wrong size");

  const std::vector<FitParameter>& free = options.free;
  const auto n = static_cast<Eigen::Index>(free.size());
  const auto freqs = frequencies(hist);
  const bool singles = options.include_single_photon;
  const double trials = static_cast<double>(hist.trials_per_phase);

  FitResult result;
  result.free = free;
  result.seed = options.seed;

  if (hist.distinct_phases() < 2 && free.size() > 1) {
    result.identifiable = false;
    result.warnings.push_back("a single phase setting cannot separate more than one free parameter");
  }
  if (!singles) {
    const bool has_z = std::find(free.begin(), free.end(), FitParameter::z) != free.end();
    const bool has_eta = free.size() > (has_z ? 1u : 0u);
    if (has_z && has_eta) {
      result.warnings.push_back(
          "with single-photon cells excluded, squeezing and losses enter the conditional likelihood only "
          "through combinations; estimates may be weakly determined");
    }
  }

  auto natural_objective = [&](const RVector& x) {
    const auto model = model_tables(apply_natural(fixed, free, x), detectors, hist.phases);
    return mean_log_likelihood(freqs, model, singles);
  };
  auto objective = [&](const RVector& u) { return -natural_objective(to_natural(free, u, options)); };

  RVector x0 = options.initial ? Eigen::Map<const RVector>(options.initial->data(), n).eval()
                               : default_start(hist, fixed, free, options);
  const RVector u0 = to_transformed(free, x0, options);

  std::vector<detail::SimplexResult> runs(static_cast<std::size_t>(options.starts));
  detail::SimplexOptions so;
  so.max_evaluations = options.max_evaluations;
  so.f_tolerance = 1e-14;
  so.x_tolerance = options.x_tolerance;

  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(options.threads))
  for (int s = 0; s < options.starts; ++s) {
    try {
      RVector start = u0;
      if (s > 0) {
        auto rng = detail::substream(options.seed, static_cast<std::uint64_t>(s));
        std::normal_distribution<double> jitter(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) start(i) += jitter(rng);
      }
      runs[static_cast<std::size_t>(s)] = detail::nelder_mead(objective, start, options.initial_step, so);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t best = 0;
  int evaluations = 0;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    evaluations += runs[s].evaluations;
    if (runs[s].f < runs[best].f) best = s;
  }
  const auto polished = detail::nelder_mead(objective, runs[best].x, 0.1 * options.initial_step, so);
  evaluations += polished.evaluations;
  const detail::SimplexResult& final_run = polished.f <= runs[best].f ? polished : runs[best];

  result.evaluations = evaluations;
  result.converged = polished.converged && std::isfinite(final_run.f);
  if (!result.converged) result.warnings.push_back("simplex search did not meet its tolerance");

  const RVector u_hat = final_run.x;
  const RVector x_hat = to_natural(free, u_hat, options);
  result.estimates = x_hat;
  result.config = apply_natural(fixed, free, x_hat);
  result.n_bar_hat = result.config.squeezing.mean_photons();
  result.at_boundary = (u_hat.array().abs() > kBoundaryLogit).any();
  if (result.at_boundary) result.warnings.push_back("estimate at a parameter boundary");

  const double j_hat = -final_run.f;
  result.log_likelihood = trials * j_hat;
  result.deviance = std::max(0.0, 2.0 * trials * (saturated_mean_log_likelihood(freqs, singles) - j_hat));
  int cells = 0;
  for (const auto& f : freqs) {
    int per_phase = static_cast<int>(f.size()) - 1;
    if (!singles) per_phase -= static_cast<int>((f.rows() > 1) + (f.cols() > 1));
    cells += std::max(per_phase, 0);
  }
  result.degrees_of_freedom = cells - static_cast<int>(n);

  // Observed information by central differences in natural units.
  RVector h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = upper_bound(free[i], options);
    double step = 1e-4 * std::max(x_hat(i), 1e-3 * hi);
    step = std::min({step, 0.5 * x_hat(i), 0.5 * (hi - x_hat(i))});
    h(i) = step;
  }
  RMatrix hessian = RMatrix::Zero(n, n);
  bool finite = (h.array() > 0.0).all();
  if (finite) {
    auto shifted = [&](Eigen::Index a, double sa, Eigen::Index b, double sb) {
      RVector x = x_hat;
      x(a) += sa * h(a);
      if (b >= 0) x(b) += sb * h(b);
      return natural_objective(x);
    };
    for (Eigen::Index a = 0; a < n; ++a) {
      hessian(a, a) = (shifted(a, 1, -1, 0) - 2.0 * j_hat + shifted(a, -1, -1, 0)) / (h(a) * h(a));
      for (Eigen::Index b = 0; b < a; ++b) {
        const double v =
            (shifted(a, 1, b, 1) - shifted(a, 1, b, -1) - shifted(a, -1, b, 1) + shifted(a, -1, b, -1)) /
            (4.0 * h(a) * h(b));
        hessian(a, b) = hessian(b, a) = v;
      }
    }
    finite = hessian.allFinite();
  }
  result.covariance = RMatrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  if (finite) {
    const RMatrix information = -trials * hessian;
    Eigen::SelfAdjointEigenSolver<RMatrix> es(information);
    const RVector& ev = es.eigenvalues();
    if (ev.minCoeff() > 1e-12 * std::max(ev.maxCoeff(), 1e-300)) {
      result.covariance = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
      result.covariance_valid = true;
    }
  }
  if (!result.covariance_valid) {
    result.identifiable = false;
    result.warnings.push_back("observed information is singular; covariance not available");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic data

CountHistogram simulate_counts(const InterferometerConfig& config, const DetectorPair& detectors,
                               std::span<const double> phases, std::int64_t trials, std::uint64_t seed) {
  if (trials <= 0) throw std::invalid_argument("simulate_counts: trials must be positive");
  if (phases.empty()) throw std::invalid_argument("simulate_counts: no phase settings");
  const auto model = model_tables(config, detectors, phases);
  CountHistogram hist;
  hist.phases.assign(phases.begin(), phases.end());
  hist.trials_per_phase = trials;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    RMatrix p = model[i].cwiseMax(0.0);
    const double total = p.sum();
    if (!(total > 0.0)) throw std::runtime_error("simulate_counts: model probabilities vanish");
    p /= total;
    // Row-major flattening, cell (j, k) -> j * cols + k.
    std::vector<double> flat(static_cast<std::size_t>(p.size()));
    for (Eigen::Index j = 0; j < p.rows(); ++j)
      for (Eigen::Index k = 0; k < p.cols(); ++k) flat[static_cast<std::size_t>(j * p.cols() + k)] = p(j, k);
    auto rng = detail::substream(seed, i);
    const auto drawn = detail::sample_multinomial(trials, flat, rng);
    CountTable c(p.rows(), p.cols());
    for (Eigen::Index j = 0; j < p.rows(); ++j)
      for (Eigen::Index k = 0; k < p.cols(); ++k) c(j, k) = drawn[static_cast<std::size_t>(j * p.cols() + k)];
    hist.counts.push_back(std::move(c));
  }
  return hist;
}

CountHistogram resample(const CountHistogram& hist, std::uint64_t seed, std::uint64_t replicate) {
  CountHistogram out = hist;
  auto rng = detail::substream(seed, replicate);
  for (auto& c : out.counts) {
    const std::int64_t total = c.sum();
    std::vector<double> flat(static_cast<std::size_t>(c.size()));
    for (Eigen::Index j = 0; j < c.rows(); ++j)
      for (Eigen::Index k = 0; k < c.cols(); ++k)
        flat[static_cast<std::size_t>(j * c.cols() + k)] = static_cast<double>(c(j, k));
    if (total == 0) continue;
    const auto drawn = detail::sample_multinomial(total, flat, rng);
    for (Eigen::Index j = 0; j < c.rows(); ++j)
      for (Eigen::Index k = 0; k < c.cols(); ++k) c(j, k) = drawn[static_cast<std::size_t>(j * c.cols() + k)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shot-noise limit

double normal_two_sided_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(mid / std::sqrt(2.0)) < level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

SnlInterval snl_with_uncertainty(const FitResult& fit, double level) {
  const auto it = std::find(fit.free.begin(), fit.free.end(), FitParameter::z);
  if (it == fit.free.end()) throw std::invalid_argument("snl_with_uncertainty: z was not fitted");
  if (!fit.covariance_valid) throw std::invalid_argument("snl_with_uncertainty: fit has no valid covariance");
  const auto k = static_cast<Eigen::Index>(it - fit.free.begin());
  const double z = fit.estimates(k);
  const double var = fit.covariance(k, k);
  if (!(var >= 0.0)) throw std::invalid_argument("snl_with_uncertainty: negative variance for z");
  const double slope = 4.0 * z / ((1.0 - z * z) * (1.0 - z * z));
  SnlInterval r;
  r.snl = mean_photons_from_squeezing(z);
  r.sigma = std::abs(slope) * std::sqrt(var);
  const double q = normal_two_sided_quantile(level);
  r.lower = std::max(0.0, r.snl - q * r.sigma);
  r.upper = r.snl + q * r.sigma;
  return r;
}

}  // namespace qmetro
