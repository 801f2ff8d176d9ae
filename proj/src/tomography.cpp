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

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "qmetro/detectors.hpp"
#include "sampling.hpp"

namespace qmetro {

namespace {

RMatrix normalise_rows(const RMatrix& c) {
  RMatrix out = c;
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    const double s = c.row(m).sum();
    if (s > 0.0) out.row(m) /= s;
  }
  return out;
}

// Per-shot weighted log-likelihood; C row normalisation only shifts it by a
// constant, so the maximiser is the same.
double mean_log_likelihood(const RMatrix& weighted, const RMatrix& model) {
  double ll = 0.0;
  for (Eigen::Index m = 0; m < weighted.rows(); ++m) {
    for (Eigen::Index n = 0; n < weighted.cols(); ++n) {
      const double w = weighted(m, n);
      if (w == 0.0) continue;
      ll += model(m, n) > 0.0 ? w * std::log(model(m, n)) : -std::numeric_limits<double>::infinity();
    }
  }
  return ll;
}

/// Active-set Newton iterations on the equality-constrained problem (one
/// completeness constraint per photon number k). Entries pinned at zero are
/// released when their KKT multiplier changes sign. Steps are accepted only if
/// the objective does not decrease.
/// Objective change when the model moves from `from` by `delta`, accurate even
/// when it is far below the rounding level of the objective itself.
double log_likelihood_gain(const RMatrix& weighted, const RMatrix& from, const RMatrix& delta) {
  double gain = 0.0;
  for (Eigen::Index m = 0; m < weighted.rows(); ++m) {
    for (Eigen::Index n = 0; n < weighted.cols(); ++n) {
      const double w = weighted(m, n);
      if (w == 0.0) continue;
      if (!(from(m, n) > 0.0)) return std::numeric_limits<double>::infinity();
      const double rel = delta(m, n) / from(m, n);
      if (!(rel > -1.0)) return -std::numeric_limits<double>::infinity();
      gain += w * std::log1p(rel);
    }
  }
  return gain;
}

constexpr double kPinThreshold = 1e-10;

struct Polish {
  const RMatrix& c;
  const RMatrix& weighted;

  RMatrix gradient(const RMatrix& model) const {
    RMatrix ratio(model.rows(), model.cols());
    for (Eigen::Index m = 0; m < model.rows(); ++m)
      for (Eigen::Index n = 0; n < model.cols(); ++n)
        ratio(m, n) = model(m, n) > 0.0 ? weighted(m, n) / model(m, n) : 0.0;
    return c.transpose() * ratio;
  }

  bool newton_direction(const RMatrix& theta, const RMatrix& model, const RMatrix& g,
                        const std::vector<char>& pinned, RMatrix& d) const {
    const Eigen::Index photons = theta.rows(), outcomes = theta.cols();
    std::vector<Eigen::Index> index(pinned.size(), -1);
    Eigen::Index free = 0;
    for (std::size_t i = 0; i < pinned.size(); ++i)
      if (!pinned[i]) index[i] = free++;
    if (free == 0) return false;
    // [H A^T; A 0] [d; mu] = [-grad; 0] for the negated objective.
    const Eigen::Index size = free + photons;
    RMatrix kkt = RMatrix::Zero(size, size);
    RVector rhs = RVector::Zero(size);
    for (Eigen::Index n = 0; n < outcomes; ++n) {
      RVector w(model.rows());
      for (Eigen::Index m = 0; m < model.rows(); ++m)
        w(m) = model(m, n) > 0.0 ? weighted(m, n) / (model(m, n) * model(m, n)) : 0.0;
      const RMatrix h = c.transpose() * w.asDiagonal() * c;
      for (Eigen::Index a = 0; a < photons; ++a) {
        const auto ia = index[static_cast<std::size_t>(a * outcomes + n)];
        if (ia < 0) continue;
        rhs(ia) = g(a, n);
        for (Eigen::Index b = 0; b < photons; ++b) {
          const auto ib = index[static_cast<std::size_t>(b * outcomes + n)];
          if (ib >= 0) kkt(ia, ib) = h(a, b);
        }
        kkt(ia, free + a) = kkt(free + a, ia) = 1.0;
      }
    }
    const double scale = kkt.topLeftCorner(free, free).diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < free; ++i) kkt(i, i) += 1e-14 * std::max(scale, 1e-300);
    for (Eigen::Index k = 0; k < photons; ++k) {
      bool any = false;
      for (Eigen::Index n = 0; n < outcomes; ++n) any = any || index[static_cast<std::size_t>(k * outcomes + n)] >= 0;
      if (!any) kkt(free + k, free + k) = 1.0;
    }
    const RVector sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    d = RMatrix::Zero(photons, outcomes);
    for (Eigen::Index k = 0; k < photons; ++k)
      for (Eigen::Index n = 0; n < outcomes; ++n) {
        const auto i = index[static_cast<std::size_t>(k * outcomes + n)];
        if (i >= 0) d(k, n) = sol(i);
      }
    return true;
  }

  /// One Newton step; returns false when no improving step exists.
  bool step(RMatrix& theta, double& ll) const {
    const RMatrix current = c * theta;
    const Eigen::Index photons = theta.rows(), outcomes = theta.cols();
    const RMatrix model = c * theta;
    const RMatrix g = gradient(model);
    std::vector<char> pinned(static_cast<std::size_t>(photons * outcomes), 0);
    for (Eigen::Index k = 0; k < photons; ++k) {
      const double lambda = theta.row(k).dot(g.row(k));
      for (Eigen::Index n = 0; n < outcomes; ++n)
        pinned[static_cast<std::size_t>(k * outcomes + n)] = theta(k, n) <= kPinThreshold && g(k, n) - lambda <= 0.0;
    }
    RMatrix d;
    RMatrix base;
    // Entries at the bound that the Newton direction would push negative are
    // pinned as well, and the step is recomputed.
    for (int round = 0; round <= photons * outcomes; ++round) {
      if (!newton_direction(theta, model, g, pinned, d)) return false;
      base = theta;
      bool repinned = false;
      for (Eigen::Index k = 0; k < photons; ++k)
        for (Eigen::Index n = 0; n < outcomes; ++n) {
          const auto i = static_cast<std::size_t>(k * outcomes + n);
          if (pinned[i]) {
            base(k, n) = 0.0;
          } else if (theta(k, n) <= kPinThreshold && d(k, n) < 0.0) {
            pinned[i] = 1;
            repinned = true;
          }
        }
      if (!repinned) break;
    }
    // Largest feasible step, then backtracking on the objective.
    double t = 1.0;
    for (Eigen::Index k = 0; k < photons; ++k)
      for (Eigen::Index n = 0; n < outcomes; ++n)
        if (d(k, n) < 0.0) t = std::min(t, -base(k, n) / d(k, n));
    for (int tries = 0; tries < 40 && t > 0.0; ++tries, t *= 0.5) {
      RMatrix next = base + t * d;
      for (Eigen::Index k = 0; k < photons; ++k)
        for (Eigen::Index n = 0; n < outcomes; ++n)
          if (next(k, n) < 1e-15 * (1.0 + std::abs(d(k, n))) && d(k, n) < 0.0) next(k, n) = 0.0;
      next = next.cwiseMax(0.0);
      for (Eigen::Index k = 0; k < photons; ++k) next.row(k) /= next.row(k).sum();
      const double gain = log_likelihood_gain(weighted, current, c * (next - theta));
      if (gain >= 0.0) {
        const bool moved = (next - theta).cwiseAbs().maxCoeff() > 0.0;
        theta = std::move(next);
        ll += gain;
        return moved && gain > 0.0;
      }
    }
    return false;
  }
};

}  // namespace

double tomography_log_likelihood(const ResponseMatrix& response, const RMatrix& probe_matrix,
                                 const RMatrix& theta) {
  const RMatrix model = probe_matrix * theta;
  RMatrix weighted = response.frequencies;
  for (Eigen::Index m = 0; m < weighted.rows(); ++m) weighted.row(m) *= response.shots[m];
  return mean_log_likelihood(weighted, model);
}

TomographyResult tomography_mle(const ResponseMatrix& response, const RMatrix& probe_matrix,
                                const TomographyOptions& options) {
  response.validate();
  const Eigen::Index probes = probe_matrix.rows();
  const Eigen::Index photons = probe_matrix.cols();
  const Eigen::Index outcomes = response.frequencies.cols();
  if (response.frequencies.rows() != probes) {
    throw std::invalid_argument("tomography_mle: response and probe matrix disagree on probe count");
  }

  Eigen::JacobiSVD<RMatrix> svd(probe_matrix);
  const auto& sv = svd.singularValues();
  const double tol = sv(0) * std::numeric_limits<double>::epsilon() * std::max(probes, photons);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
  const double condition = rank == photons ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (rank < photons && !options.allow_rank_deficient) {
    throw IdentifiabilityError("tomography_mle: probe matrix has rank " + std::to_string(rank) + " < " +
                               std::to_string(photons) + " photon-number columns; add probes");
  }

  const RMatrix c = normalise_rows(probe_matrix);
  RVector shots(probes);
  for (Eigen::Index m = 0; m < probes; ++m) shots(m) = response.shots[m];
  const double total_shots = shots.sum();
  // Shot-weighted frequencies, normalised so the objective is per shot.
  RMatrix weighted = response.frequencies;
  for (Eigen::Index m = 0; m < probes; ++m) weighted.row(m) *= shots(m) / total_shots;

  RMatrix theta = RMatrix::Constant(photons, outcomes, 1.0 / outcomes);
  RMatrix model = c * theta;
  double ll = mean_log_likelihood(weighted, model);

  TomographyResult result{DetectorPovm(theta), 0, false, 0.0, 0.0, 0.0, 0, {}};
  if (options.record_trace) result.log_likelihood_trace.push_back(ll);

  RMatrix ratio(probes, outcomes);
  // E step: expected count of (k photons, outcome n); M step: renormalise per k.
  auto em_step = [&](const RMatrix& th) {
    const RMatrix m = c * th;
    for (Eigen::Index p = 0; p < probes; ++p) {
      for (Eigen::Index n = 0; n < outcomes; ++n) ratio(p, n) = m(p, n) > 0.0 ? weighted(p, n) / m(p, n) : 0.0;
    }
    RMatrix next = th.cwiseProduct(c.transpose() * ratio);
    for (Eigen::Index k = 0; k < photons; ++k) {
      const double s = next.row(k).sum();
      if (s > 0.0) {
        next.row(k) /= s;
      } else {
        next.row(k) = th.row(k);
      }
    }
    return next;
  };

  // Squared extrapolation of two EM steps, falling back to the plain double
  // step whenever it would lower the likelihood.
  int it = 0;
  bool converged = false;
  for (; it < options.max_iterations; ++it) {
    const RMatrix t1 = em_step(theta);
    const RMatrix t2 = em_step(t1);
    const RMatrix current = c * theta;
    RMatrix best = t2;
    double best_gain = log_likelihood_gain(weighted, current, c * (t2 - theta));
    const RMatrix r = t1 - theta;
    const RMatrix v = t2 - 2.0 * t1 + theta;
    const double vn = v.norm();
    if (vn > 0.0) {
      const double alpha = std::min(-r.norm() / vn, -1.0);
      if (alpha < -1.0) {
        RMatrix x = theta - 2.0 * alpha * r + alpha * alpha * v;
        x = x.cwiseMax(1e-2 * theta);
        for (Eigen::Index k = 0; k < photons; ++k) x.row(k) /= x.row(k).sum();
        const RMatrix y = em_step(x);
        const double y_gain = log_likelihood_gain(weighted, current, c * (y - theta));
        if (y_gain >= best_gain) {
          best = y;
          best_gain = y_gain;
        }
      }
    }
    if (!(best_gain >= 0.0)) {
      converged = true;
      break;
    }
    theta = std::move(best);
    ll += best_gain;
    if (options.record_trace) result.log_likelihood_trace.push_back(ll);
    if (best_gain < options.tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  const Polish polish{c, weighted};
  for (int p = 0; p < 100 && it < options.max_iterations; ++p, ++it) {
    const bool moved = polish.step(theta, ll);
    if (options.record_trace && moved) result.log_likelihood_trace.push_back(ll);
    if (!moved) break;
  }
  model = c * theta;

  // Gradient of the per-shot objective projected onto the per-row simplex
  // (zero at a KKT point).
  for (Eigen::Index m = 0; m < probes; ++m) {
    for (Eigen::Index n = 0; n < outcomes; ++n) {
      ratio(m, n) = model(m, n) > 0.0 ? weighted(m, n) / model(m, n) : 0.0;
    }
  }
  const RMatrix grad = c.transpose() * ratio;
  double gnorm = 0.0;
  for (Eigen::Index k = 0; k < photons; ++k) {
    const double lambda = theta.row(k).dot(grad.row(k));
    for (Eigen::Index n = 0; n < outcomes; ++n) gnorm += std::pow(theta(k, n) * (grad(k, n) - lambda), 2);
  }

  // Clean rounding so the completeness check holds exactly.
  for (Eigen::Index k = 0; k < photons; ++k) theta.row(k) /= theta.row(k).sum();
  result.povm = DetectorPovm(theta);
  result.iterations = it;
  result.converged = converged;
  result.log_likelihood = tomography_log_likelihood(response, probe_matrix, theta);
  result.gradient_norm = std::sqrt(gnorm);
  result.condition_number = condition;
  result.rank = rank;
  return result;
}

ResponseMatrix expected_response(const ProbeSet& probes, const DetectorPovm& povm) {
  probes.validate();
  const RMatrix c = normalise_rows(coherent_probe_matrix(probes, povm.k_max()));
  return {c * povm.theta(), probes.shots};
}

ResponseMatrix sample_response(const ProbeSet& probes, const DetectorPovm& povm, std::uint64_t seed) {
  const auto expected = expected_response(probes, povm);
  ResponseMatrix out{RMatrix::Zero(expected.frequencies.rows(), expected.frequencies.cols()), probes.shots};
  for (Eigen::Index m = 0; m < expected.frequencies.rows(); ++m) {
    auto rng = detail::substream(seed, static_cast<std::uint64_t>(m));
    const RVector row = expected.frequencies.row(m).transpose();
    const auto shots = static_cast<std::int64_t>(std::llround(probes.shots[m]));
    const auto counts = detail::sample_multinomial(shots, {row.data(), static_cast<std::size_t>(row.size())}, rng);
    for (Eigen::Index n = 0; n < row.size(); ++n) {
      out.frequencies(m, n) = static_cast<double>(counts[n]) / static_cast<double>(shots);
    }
  }
  return out;
}

}  // namespace qmetro
