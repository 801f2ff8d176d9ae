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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qmetro/cli.hpp"
#include "qmetro/detectors.hpp"
#include "qmetro/inference.hpp"
#include "qmetro/io.hpp"
#include "qmetro/metrology.hpp"
#include "qmetro/optics.hpp"

namespace {

using namespace qmetro;
using std::numbers::pi;

constexpr double kTargetMeanPhotons = 3.631e-3;
constexpr double kEtaSignal = 0.805;
constexpr double kEtaIdler = 0.815;

struct Verdict {
  bool pass;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

InterferometerConfig experiment() {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams::from_mean_photons(kTargetMeanPhotons);
  cfg.loss = LossModel::detection(kEtaSignal, kEtaIdler);
  cfg.cutoff = FockCutoff(10);
  return cfg;
}

Verdict sub_snl_fraction_check() {
  Stopwatch clock;
  const auto report = sweep_fisher(experiment(), midpoint_phase_grid(2048), DetectorPair::ideal_pnr(10, 10),
                                   {.compute_qfi = false});
  const double fraction = sub_snl_fraction(report, FisherKind::classical);
  const double t = clock.seconds();
  const bool ok = std::abs(fraction - 0.62) <= 0.05 && t < 60.0;
  return {ok, "fraction " + fmt("%.4f", fraction) + " (target 0.62 +- 0.05), " + fmt("%.2f", t) + " s"};
}

Verdict loss_robustness_check() {
  Stopwatch clock;
  const auto pnr = DetectorPair::ideal_pnr(10, 10);
  InterferometerConfig lossless = experiment();
  lossless.loss = LossModel{};
  const double total = critical_added_loss(lossless, pi / 4, pnr);
  const double added = critical_added_loss(experiment(), pi / 4, pnr);
  const double t = clock.seconds();
  const bool ok = std::abs(total - 0.28) <= 0.03 && std::abs(added - 0.11) <= 0.03 && t < 120.0;
  return {ok, "symmetric threshold " + fmt("%.4f", total) + " (target 0.28 +- 0.03), added loss at measured "
              "efficiencies " + fmt("%.4f", added) + " (target 0.11 +- 0.03), " + fmt("%.2f", t) + " s"};
}

Verdict lossless_optimality_check() {
  bool ok = true;
  std::string detail;
  for (double nbar : {0.01, 0.1, 1.0}) {
    InterferometerConfig cfg;
    cfg.squeezing = SqueezingParams::from_mean_photons(nbar);
    cfg.cutoff = FockCutoff(10);
    const Interferometer kernel(cfg);
    const auto pnr = DetectorPair::ideal_pnr(10, 10);
    const auto report = sweep_fisher(cfg, midpoint_phase_grid(256), pnr);
    const double qfi = *std::max_element(report.qfi.begin(), report.qfi.end());
    const double cfi = maximize_cfi(kernel, pnr).value;
    ok = ok && cfi >= 0.99 * qfi;
    detail += "nbar " + fmt("%g", nbar) + ": max CFI / max QFI = " + fmt("%.6f", cfi / qfi) + "; ";
  }
  return {ok, detail + "required >= 0.99"};
}

Verdict ordering_check() {
  bool ordered = true;
  double worst = -1.0;
  const auto grid = midpoint_phase_grid(512);
  std::vector<InterferometerConfig> configs{experiment()};
  for (double nbar : {0.01, 0.1, 0.5, 2.0}) {
    InterferometerConfig cfg;
    cfg.squeezing = SqueezingParams::from_mean_photons(nbar);
    cfg.loss = LossModel::symmetric(0.8);
    cfg.cutoff = FockCutoff(10);
    configs.push_back(cfg);
  }
  for (const auto& cfg : configs) {
    const int k = cfg.cutoff.max_photons();
    const auto pnr = sweep_fisher(cfg, grid, DetectorPair::ideal_pnr(k, k));
    const auto click = sweep_fisher(cfg, grid, DetectorPair::click(k), {.compute_qfi = false});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double tol = 1e-8 * pnr.qfi[i] + 1e-15;
      ordered = ordered && click.cfi[i] <= pnr.cfi[i] + 1e-8 * pnr.cfi[i] + 1e-15 && pnr.cfi[i] <= pnr.qfi[i] + tol;
      if (pnr.qfi[i] > 0.0) worst = std::max(worst, pnr.cfi[i] / pnr.qfi[i]);
    }
  }

  InterferometerConfig scan;
  scan.loss = LossModel::symmetric(0.8);
  scan.cutoff = FockCutoff(16);
  std::vector<double> nbar;
  for (int i = 0; i < 12; ++i) nbar.push_back(0.01 * std::pow(200.0, i / 11.0));
  const auto curve = pnr_click_ratio(scan, nbar, 16);
  bool at_least_one = true, monotone = true;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    at_least_one = at_least_one && curve[i].ratio >= 1.0;
    if (i > 0) monotone = monotone && curve[i].ratio >= curve[i - 1].ratio;
  }
  return {ordered && at_least_one && monotone,
          std::string("click <= PNR <= QFI ") + (ordered ? "holds" : "violated") + " (largest CFI/QFI " +
              fmt("%.6f", worst) + "); ratio from " + fmt("%.4f", curve.front().ratio) + " at nbar 0.01 to " +
              fmt("%.4f", curve.back().ratio) + " at nbar 2, " + (at_least_one ? ">= 1" : "below 1 somewhere") +
              ", " + (monotone ? "non-decreasing" : "not monotone")};
}

Verdict oracle_check() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  const FockCutoff c(4);
  const double etas[] = {0.0, 0.25, 0.5, 0.8, 1.0};
  double loss_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int rank = 1 + trial % c.joint_dim();
    CMatrix g(c.joint_dim(), rank);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < rank; ++j) g(i, j) = Complex(normal(rng), normal(rng));
    CMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    const auto state = TwoModeState::density(rho, c);
    const double eta = etas[trial % 5];
    const Mode mode = trial % 2 ? Mode::signal : Mode::idler;
    loss_gap = std::max(loss_gap, max_abs(loss_channel(state, mode, eta).density_matrix() -
                                          loss_channel_kraus(state, mode, eta).density_matrix()));
  }

  double derivative_gap = 0.0;
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    InterferometerConfig cfg;
    cfg.squeezing = SqueezingParams(0.05 + 0.45 * uniform(rng));
    cfg.loss = {0.5 + 0.5 * uniform(rng), 0.5 + 0.5 * uniform(rng), 0.5 + 0.5 * uniform(rng),
                0.5 + 0.5 * uniform(rng)};
    cfg.phase = 2 * pi * uniform(rng);
    cfg.cutoff = FockCutoff(6);
    const CMatrix analytic = analytic_phase_derivative(cfg);
    const CMatrix fd = (evolve_pipeline(cfg.with_phase(cfg.phase + h)).density_matrix() -
                        evolve_pipeline(cfg.with_phase(cfg.phase - h)).density_matrix()) /
                       (2 * h);
    derivative_gap = std::max(derivative_gap, max_abs(analytic - fd) / max_abs(analytic));
  }

  double qfi_gap = 0.0;
  for (double nbar : {0.01, 0.1, 1.0}) {
    for (double theta : {0.3, pi / 4, 2.0}) {
      InterferometerConfig cfg;
      cfg.squeezing = SqueezingParams::from_mean_photons(nbar);
      cfg.phase = theta;
      cfg.cutoff = FockCutoff(8);
      const auto pure = evolve_pure(cfg);
      const CMatrix rho = evolve_pipeline(cfg).density_matrix();
      const CMatrix drho = analytic_phase_derivative(cfg);
      qfi_gap = std::max(qfi_gap, std::abs(quantum_fisher(rho, drho) - quantum_fisher_pure(pure.psi, pure.dpsi)));
    }
  }
  const bool ok = loss_gap <= 1e-12 && derivative_gap <= 1e-6 && qfi_gap <= 1e-8;
  return {ok, "dilation vs Kraus " + fmt("%.2e", loss_gap) + " (<= 1e-12), derivative vs difference " +
              fmt("%.2e", derivative_gap) + " relative (<= 1e-6), pure vs mixed QFI " + fmt("%.2e", qfi_gap) +
              " (<= 1e-8)"};
}

Verdict tomography_check() {
  const auto probes = ProbeSet::geometric(0.1, 12.8, 15, 1e6);
  const auto truth = efficiency_povm(0.9, 9, 9);
  const RMatrix c = coherent_probe_matrix(probes, 9);
  auto monotone = [](const std::vector<double>& trace) {
    for (std::size_t t = 1; t < trace.size(); ++t)
      if (trace[t] < trace[t - 1]) return false;
    return !trace.empty();
  };
  const auto clean = tomography_mle(expected_response(probes, truth), c);
  const double clean_error = (clean.povm.theta() - truth.theta()).cwiseAbs().maxCoeff();
  const auto noisy = tomography_mle(sample_response(probes, truth, 6), c);
  const double noisy_error = (noisy.povm.theta() - truth.theta()).cwiseAbs().maxCoeff();
  const bool mono = monotone(clean.log_likelihood_trace) && monotone(noisy.log_likelihood_trace);
  const bool ok = clean_error <= 1e-6 && noisy_error <= 1e-2 && mono;
  return {ok, "noiseless max-abs error " + fmt("%.2e", clean_error) + " (<= 1e-6), 10^6 shots/probe " +
              fmt("%.2e", noisy_error) + " (<= 1e-2), log-likelihood " + (mono ? "monotone" : "not monotone") +
              ", probe matrix condition " + fmt("%.2e", clean.condition_number)};
}

Verdict fit_check() {
  InterferometerConfig truth;
  truth.squeezing = SqueezingParams(0.05);
  truth.loss = {0.85, 0.85, 0.85, 0.85};
  truth.cutoff = FockCutoff(10);
  const auto detectors = DetectorPair::ideal_pnr(10, 10);
  const auto hist = simulate_counts(truth, detectors, midpoint_phase_grid(20), 10000000, 7);
  InterferometerConfig fixed = truth;
  fixed.squeezing = SqueezingParams(0.1);
  fixed.loss.eta_p_s = fixed.loss.eta_p_i = 0.5;
  FitOptions options;
  options.include_single_photon = true;
  const auto fit = fit_model(hist, fixed, detectors, options);
  bool ok = fit.converged && fit.covariance_valid;
  std::string detail;
  for (auto p : fit.free) {
    const double dev = std::abs(get_parameter(fit.config, p) - get_parameter(truth, p));
    const double se = fit.standard_error(p);
    ok = ok && dev <= 3 * se;
    detail += to_string(p) + " off by " + fmt("%.2f", dev / se) + " SE; ";
  }
  const double rel = std::abs(fit.n_bar_hat / truth.squeezing.mean_photons() - 1.0);
  ok = ok && rel <= 0.01;
  return {ok, detail + "nbar relative error " + fmt("%.2e", rel) + " (<= 1e-2)"};
}

Verdict bootstrap_check() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("qmetro_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::vector<std::string> model{"--z", "0.05", "--eta-p", "0.85", "--eta-d", "0.85", "--cutoff", "6"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), model.begin(), model.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };

  int status = cli(with({"simulate-counts"}, {"--phase-points", "20", "--trials", "1000000", "--seed", "11", "--out",
                                              (dir / "one").string()}));
  status |= cli(with({"simulate-counts"}, {"--phase-points", "20", "--trials", "4000000", "--seed", "12", "--out",
                                           (dir / "four").string()}));
  const std::vector<std::string> boot{"--resamples", "200", "--seed", "7", "--band-points", "32"};
  auto run_boot = [&](const std::string& data, const std::string& out) {
    std::vector<std::string> args{"bootstrap", "--counts", (dir / data / "counts.csv").string(), "--eta-d", "0.85",
                                  "--cutoff", "6", "--out", (dir / out).string()};
    args.insert(args.end(), boot.begin(), boot.end());
    return cli(args);
  };
  status |= run_boot("one", "band_a");
  status |= run_boot("one", "band_b");
  status |= run_boot("four", "band_c");

  std::string detail;
  bool ok = status == 0;
  if (ok) {
    const bool identical = slurp(dir / "band_a" / "band.csv") == slurp(dir / "band_b" / "band.csv");
    auto mean_width = [&](const std::string& out) {
      std::istringstream in(slurp(dir / out / "band.csv"));
      std::string line;
      double total = 0.0;
      int rows = 0;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'p') continue;
        std::stringstream ss(line);
        std::string phase, point, lower, upper;
        std::getline(ss, phase, ',');
        std::getline(ss, point, ',');
        std::getline(ss, lower, ',');
        std::getline(ss, upper, ',');
        total += std::stod(upper) - std::stod(lower);
        ++rows;
      }
      return total / rows;
    };
    const double ratio = mean_width("band_c") / mean_width("band_a");
    ok = identical && ratio >= 0.4 && ratio <= 0.6;
    detail = std::string("repeated run ") + (identical ? "byte-identical" : "differs") +
             ", width ratio 4x/1x trials " + fmt("%.3f", ratio) + " (in [0.4, 0.6])";
  } else {
    detail = "command failed with status " + std::to_string(status);
  }
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {"1 sub-SNL fraction", sub_snl_fraction_check},
      {"2 loss robustness", loss_robustness_check},
      {"3 lossless optimality", lossless_optimality_check},
      {"4 ordering", ordering_check},
      {"5 oracle equivalences", oracle_check},
      {"6 tomography round trip", tomography_check},
      {"7 fit round trip", fit_check},
      {"8 bootstrap", bootstrap_check},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v{false, ""};
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.name << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
