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

#include "qmetro/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "qmetro/inference.hpp"
#include "qmetro/metrology.hpp"

namespace qmetro::cli {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Typed field access

double number_field(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("field '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError("field '" + key + "' must be finite");
  return x;
}

std::int64_t integer_field(const Json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e18) return static_cast<std::int64_t>(x);
  }
  throw ConfigError("field '" + key + "' must be an integer");
}

int int_field(const Json& v, const std::string& key) {
  const auto x = integer_field(v, key);
  if (x < -2147483647 || x > 2147483647) throw ConfigError("field '" + key + "' is out of range");
  return static_cast<int>(x);
}

bool bool_field(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("field '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string string_field(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> number_list(const Json& v, const std::string& key) {
  if (v.is_number()) return {number_field(v, key)};
  if (!v.is_array()) throw ConfigError("field '" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number_field(x, key));
  return out;
}

std::vector<std::string> string_list(const Json& v, const std::string& key) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ConfigError("field '" + key + "' must be a list of names");
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(string_field(x, key));
  return out;
}

// ---------------------------------------------------------------------------
// Command-line options

enum class Kind { number, integer, text, numbers, texts, flag };

struct OptionSpec {
  const char* flag;
  const char* key;
  Kind kind;
  const char* help;
};

const std::vector<OptionSpec> kModelOptions = {
    {"--z", "z", Kind::number, "squeezing parameter z in [0, 1)"},
    {"--nbar", "nbar", Kind::number, "mean photon number 2 z^2 / (1 - z^2)"},
    {"--eta-p", "eta_p", Kind::numbers, "preparation transmissivity: one value or signal,idler"},
    {"--eta-d", "eta_d", Kind::numbers, "detection transmissivity: one value or signal,idler"},
    {"--cutoff", "cutoff", Kind::integer, "maximum photon number kept per mode"},
};
const std::vector<OptionSpec> kDetectorOptions = {
    {"--detector", "detector", Kind::text, "ideal-pnr | click | povm-file:<path>[,<idler path>]"},
    {"--n-max", "n_max", Kind::integer, "highest resolved photon number of ideal PNR detectors"},
};
const std::vector<OptionSpec> kPhaseOptions = {
    {"--phases", "phases", Kind::numbers, "explicit phase settings"},
    {"--phase-points", "phase_points", Kind::integer, "size of the midpoint phase grid on [0, 2 pi)"},
    {"--degrees", "degrees", Kind::flag, "explicit phases are given in degrees"},
};
const std::vector<OptionSpec> kRunOptions = {
    {"--threads", "threads", Kind::integer, "worker threads (default: all logical cores)"},
};
const std::vector<OptionSpec> kSeedOptions = {
    {"--seed", "seed", Kind::integer, "random seed"},
};
const std::vector<OptionSpec> kLossScanOptions = {
    {"--losses", "losses", Kind::numbers, "added symmetric loss values"},
    {"--nbar-grid", "nbar_grid", Kind::numbers, "mean photon numbers for the ratio and fraction tables"},
    {"--loss-model", "loss_model", Kind::numbers, "base eta_p_s,eta_p_i,eta_d_s,eta_d_i"},
};
const std::vector<OptionSpec> kTomographyOptions = {
    {"--probes", "probes", Kind::text, "probe CSV (alpha_sq,outcome,count)"},
    {"--kmax,--k-max", "k_max", Kind::integer, "photon-number truncation of the reconstruction"},
    {"--outcomes", "outcomes", Kind::integer, "minimum number of outcome columns"},
    {"--tolerance", "tolerance", Kind::number, "stop when the per-shot log-likelihood gain is below this"},
    {"--max-iterations", "max_iterations", Kind::integer, "iteration cap"},
    {"--allow-rank-deficient", "allow_rank_deficient", Kind::flag, "proceed when the probe matrix lacks full rank"},
};
const std::vector<OptionSpec> kProbeOptions = {
    {"--eta", "eta", Kind::number, "efficiency of the simulated detector"},
    {"--kmax,--k-max", "k_max", Kind::integer, "photon-number truncation of the simulated POVM"},
    {"--n-max", "n_max", Kind::integer, "highest resolved photon number"},
    {"--probe-ladder", "probe_ladder", Kind::numbers, "first,last,count of the geometric |alpha|^2 ladder"},
    {"--probe-shots", "probe_shots", Kind::number, "shots per probe"},
    {"--noiseless", "noiseless", Kind::flag, "write expected counts instead of sampled ones"},
};
const std::vector<OptionSpec> kFitOptions = {
    {"--counts", "counts", Kind::text, "count CSV (phase_rad,j,k,count)"},
    {"--free", "free", Kind::texts, "free parameters among z,eta_p_s,eta_p_i,eta_d_s,eta_d_i"},
    {"--include-singles", "include_singles", Kind::flag, "keep the (1,0) and (0,1) cells in the likelihood"},
    {"--lenient", "lenient", Kind::flag, "accept tables that do not account for every trial"},
    {"--starts", "starts", Kind::integer, "simplex starts"},
    {"--level", "level", Kind::number, "confidence level"},
};
const std::vector<OptionSpec> kBootstrapOptions = {
    {"--resamples", "resamples", Kind::integer, "bootstrap resamples (at least 100)"},
    {"--band-points", "band_points", Kind::integer, "phase points of the band when --phases is not given"},
};
const std::vector<OptionSpec> kSimulateOptions = {
    {"--trials", "trials", Kind::integer, "trials per phase"},
};

Json convert(const std::string& raw, const OptionSpec& spec) {
  const std::string key = spec.key;
  auto parse_number = [&](const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      throw ConfigError("field '" + key + "': '" + text + "' is not a number");
    }
    if (used != text.size()) throw ConfigError("field '" + key + "': '" + text + "' is not a number");
    return v;
  };
  auto items = [&] {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      if (item.empty()) throw ConfigError("field '" + key + "': empty list entry");
      out.push_back(item);
    }
    return out;
  };
  switch (spec.kind) {
    case Kind::number:
      return parse_number(raw);
    case Kind::integer: {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(raw, &used);
      } catch (const std::exception&) {
        throw ConfigError("field '" + key + "': '" + raw + "' is not an integer");
      }
      if (used != raw.size()) throw ConfigError("field '" + key + "': '" + raw + "' is not an integer");
      return static_cast<std::int64_t>(v);
    }
    case Kind::text:
      return raw;
    case Kind::numbers: {
      Json a = Json::array();
      for (const auto& item : items()) a.push_back(parse_number(item));
      return a;
    }
    case Kind::texts:
      return items();
    case Kind::flag:
      return true;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Helpers for the commands

LossModel loss_from(const std::vector<double>& eta_p, const std::vector<double>& eta_d) {
  auto pick = [](const std::vector<double>& v, const char* key) {
    if (v.size() == 1) return std::pair{v[0], v[0]};
    if (v.size() == 2) return std::pair{v[0], v[1]};
    throw ConfigError(std::string("field '") + key + "' takes one value or signal,idler");
  };
  const auto [ps, pi] = pick(eta_p, "eta_p");
  const auto [ds, di] = pick(eta_d, "eta_d");
  return {ps, pi, ds, di};
}

void check_loss(const LossModel& loss, const char* key) {
  try {
    loss.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

std::uint64_t require_seed(const RunConfig& rc) {
  if (!rc.seed) throw ConfigError("field 'seed' is required for '" + rc.command + "'");
  return *rc.seed;
}

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("field '") + key + "' is required");
  return value;
}

FitOptions fit_options(const RunConfig& rc) {
  FitOptions o;
  o.free.clear();
  for (const auto& name : rc.free) {
    try {
      o.free.push_back(fit_parameter_from_string(name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("field 'free': ") + e.what());
    }
  }
  if (o.free.empty()) throw ConfigError("field 'free' must name at least one parameter");
  if (rc.starts < 1) throw ConfigError("field 'starts' must be at least 1");
  o.starts = rc.starts;
  o.include_single_photon = rc.include_singles;
  o.strict = !rc.lenient;
  o.seed = rc.seed.value_or(0);
  o.threads = rc.threads;
  return o;
}

CountHistogram load_counts(const RunConfig& rc) {
  CountHistogram hist = read_counts_csv(require_path(rc.counts, "counts"));
  try {
    hist.validate(!rc.lenient);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field 'counts': ") + e.what());
  }
  return hist;
}

struct Context {
  const RunConfig& rc;
  fs::path out_dir;
  Json prov;
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------
// Commands

int cmd_sweep(Context& ctx) {
  const auto& rc = ctx.rc;
  const auto config = rc.model(true);
  const auto detectors = rc.detectors(rc.cutoff);
  const auto grid = rc.phase_grid(2048);
  SweepOptions options;
  options.threads = rc.threads;
  const auto report = sweep_fisher(config, grid, detectors, options);
  write_fisher_csv(ctx.out_dir / "fisher.csv", report, ctx.prov);
  write_json(ctx.out_dir / "fisher.json", fisher_to_json(report, ctx.prov));
  ctx.out << "fisher.csv: " << grid.size() << " phases, snl " << format_double(report.snl);
  if (report.snl > 0.0) ctx.out << ", CFI above SNL on " << sub_snl_fraction(report, FisherKind::classical) * 100.0 << "%";
  ctx.out << "\n";
  return kOk;
}

int cmd_loss_scan(Context& ctx) {
  const auto& rc = ctx.rc;
  if (rc.losses.empty()) throw ConfigError("field 'losses' must not be empty");
  if (rc.nbar_grid.empty()) throw ConfigError("field 'nbar_grid' must not be empty");
  for (double x : rc.losses)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("field 'losses': values must lie in [0, 1]");
  for (double n : rc.nbar_grid)
    if (!(n > 0.0)) throw ConfigError("field 'nbar_grid': values must be positive");
  InterferometerConfig base = rc.model(true);
  if (rc.loss_model) {
    const auto& m = *rc.loss_model;
    if (m.size() != 4) throw ConfigError("field 'loss_model' takes eta_p_s,eta_p_i,eta_d_s,eta_d_i");
    base.loss = {m[0], m[1], m[2], m[3]};
    check_loss(base.loss, "loss_model");
  }
  const int k = rc.cutoff;
  const auto pnr = DetectorPair::ideal_pnr(std::min(rc.n_max, k), k);
  const auto click = DetectorPair::click(k);
  const auto grid = rc.phase_grid(2048);
  const auto qfi_grid = midpoint_phase_grid(256);
  auto with_loss = [](InterferometerConfig c, double x) {
    c.loss.eta_d_s *= 1.0 - x;
    c.loss.eta_d_i *= 1.0 - x;
    return c;
  };

  std::ostringstream fi;
  fi << csv_header(ctx.prov)
     << "loss,max_cfi_pnr,max_cfi_click,max_qfi,snl,cfi_per_photon_pnr,cfi_per_photon_click,qfi_per_photon,"
        "sub_snl_fraction_pnr,sub_snl_fraction_click\n";
  std::ostringstream ratio;
  ratio << csv_header(ctx.prov) << "loss,nbar,max_cfi_pnr,max_cfi_click,ratio\n";
  std::ostringstream frac;
  frac << csv_header(ctx.prov) << "loss,nbar,sub_snl_fraction_pnr,sub_snl_fraction_click\n";

  SweepOptions no_qfi{false, rc.threads};
  SweepOptions with_qfi{true, rc.threads};
  for (double x : rc.losses) {
    const auto c = with_loss(base, x);
    const Interferometer kernel(c);
    const double snl = shot_noise_limit(c.squeezing);
    const double cp = maximize_cfi(kernel, pnr).value;
    const double cc = maximize_cfi(kernel, click).value;
    const auto q = sweep_fisher(c, qfi_grid, pnr, with_qfi);
    const double qmax = *std::max_element(q.qfi.begin(), q.qfi.end());
    const auto sp = sweep_fisher(c, grid, pnr, no_qfi);
    const auto sc = sweep_fisher(c, grid, click, no_qfi);
    const bool has_snl = snl > 0.0;
    auto per = [&](double v) { return has_snl ? format_double(v / snl) : std::string("nan"); };
    fi << format_double(x) << ',' << format_double(cp) << ',' << format_double(cc) << ',' << format_double(qmax)
       << ',' << format_double(snl) << ',' << per(cp) << ',' << per(cc) << ',' << per(qmax) << ','
       << (has_snl ? format_double(sub_snl_fraction(sp, FisherKind::classical)) : "nan") << ','
       << (has_snl ? format_double(sub_snl_fraction(sc, FisherKind::classical)) : "nan") << '\n';

    for (const auto& p : pnr_click_ratio(c, rc.nbar_grid, rc.n_max, rc.threads)) {
      ratio << format_double(x) << ',' << format_double(p.mean_photons) << ',' << format_double(p.max_cfi_pnr) << ','
            << format_double(p.max_cfi_click) << ',' << format_double(p.ratio) << '\n';
    }
    for (double n : rc.nbar_grid) {
      InterferometerConfig cn = c;
      cn.squeezing = SqueezingParams::from_mean_photons(n);
      const auto fp = sweep_fisher(cn, grid, pnr, no_qfi);
      const auto fc = sweep_fisher(cn, grid, click, no_qfi);
      frac << format_double(x) << ',' << format_double(n) << ','
           << format_double(sub_snl_fraction(fp, FisherKind::classical)) << ','
           << format_double(sub_snl_fraction(fc, FisherKind::classical)) << '\n';
    }
  }
  write_text(ctx.out_dir / "fi_vs_loss.csv", fi.str());
  write_text(ctx.out_dir / "ratio_vs_nbar.csv", ratio.str());
  write_text(ctx.out_dir / "subsnl_vs_nbar.csv", frac.str());
  ctx.out << "fi_vs_loss.csv, ratio_vs_nbar.csv, subsnl_vs_nbar.csv: " << rc.losses.size() << " loss values\n";
  return kOk;
}

int cmd_tomography(Context& ctx) {
  const auto& rc = ctx.rc;
  const auto data = read_probe_csv(require_path(rc.probes, "probes"), rc.outcomes);
  if (rc.k_max < 1) throw ConfigError("field 'k_max' must be at least 1");
  TomographyOptions options;
  options.max_iterations = rc.max_iterations;
  options.tolerance = rc.tolerance;
  options.allow_rank_deficient = rc.allow_rank_deficient;
  options.record_trace = false;
  const auto result = tomography_mle(data.response, coherent_probe_matrix(data.probes, rc.k_max), options);
  write_json(ctx.out_dir / "povm.json", tomography_to_json(result, ctx.prov));
  ctx.out << "povm.json: k_max " << result.povm.k_max() << ", " << result.povm.outcomes() << " outcomes, "
          << result.iterations << " iterations\n";
  if (!result.converged) {
    ctx.err << "tomography did not converge within " << rc.max_iterations << " iterations\n";
    return kNonConvergence;
  }
  return kOk;
}

int cmd_simulate_probes(Context& ctx) {
  const auto& rc = ctx.rc;
  const auto seed = rc.noiseless ? rc.seed.value_or(0) : require_seed(rc);
  if (rc.probe_ladder.size() != 3) throw ConfigError("field 'probe_ladder' takes first,last,count");
  if (!(rc.eta >= 0.0 && rc.eta <= 1.0)) throw ConfigError("field 'eta' must lie in [0, 1]");
  if (rc.k_max < 1) throw ConfigError("field 'k_max' must be at least 1");
  if (rc.n_max < 1) throw ConfigError("field 'n_max' must be at least 1");
  ProbeSet probes;
  try {
    probes = ProbeSet::geometric(rc.probe_ladder[0], rc.probe_ladder[1], static_cast<int>(rc.probe_ladder[2]),
                                 rc.probe_shots);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field 'probe_ladder': ") + e.what());
  }
  const auto povm = efficiency_povm(rc.eta, std::min(rc.n_max, rc.k_max), rc.k_max);
  ProbeData data{probes, rc.noiseless ? expected_response(probes, povm) : sample_response(probes, povm, seed)};
  write_probe_csv(ctx.out_dir / "probes.csv", data, ctx.prov);
  ctx.out << "probes.csv: " << probes.mean_photons.size() << " probes\n";
  return kOk;
}

int cmd_simulate_counts(Context& ctx) {
  const auto& rc = ctx.rc;
  const auto seed = require_seed(rc);
  if (rc.trials <= 0) throw ConfigError("field 'trials' must be a positive integer");
  const auto config = rc.model(true);
  const auto detectors = rc.detectors(rc.cutoff);
  const auto phases = rc.phase_grid(20);
  const auto hist = simulate_counts(config, detectors, phases, rc.trials, seed);
  write_counts_csv(ctx.out_dir / "counts.csv", hist, ctx.prov);
  ctx.out << "counts.csv: " << phases.size() << " phases x " << rc.trials << " trials\n";
  return kOk;
}

Json snl_json(const FitResult& fit, double level) {
  Json j;
  try {
    const auto s = snl_with_uncertainty(fit, level);
    j["snl"] = s.snl;
    j["sigma"] = s.sigma;
    j["lower"] = s.lower;
    j["upper"] = s.upper;
    j["level"] = level;
  } catch (const std::invalid_argument&) {
    j = nullptr;
  }
  return j;
}

int fit_status(const FitResult& fit, std::ostream& err) {
  for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
  if (!fit.identifiable) return kIdentifiabilityFailure;
  if (!fit.converged) return kNonConvergence;
  return kOk;
}

int cmd_fit(Context& ctx) {
  const auto& rc = ctx.rc;
  require_seed(rc);
  const auto hist = load_counts(rc);
  const auto fixed = rc.model(false);
  const auto detectors = rc.detectors(rc.cutoff);
  const auto options = fit_options(rc);
  const auto fit = fit_model(hist, fixed, detectors, options);
  Json j = fit_to_json(fit, ctx.prov);
  j["snl_interval"] = snl_json(fit, rc.level);
  write_json(ctx.out_dir / "fit.json", j);
  ctx.out << "fit.json:";
  for (std::size_t i = 0; i < fit.free.size(); ++i)
    ctx.out << ' ' << to_string(fit.free[i]) << '=' << format_double(fit.estimates(static_cast<Eigen::Index>(i)));
  ctx.out << ", nbar=" << format_double(fit.n_bar_hat) << "\n";
  return fit_status(fit, ctx.err);
}

int cmd_bootstrap(Context& ctx) {
  const auto& rc = ctx.rc;
  const auto seed = require_seed(rc);
  if (rc.resamples < 100) throw ConfigError("field 'resamples' must be at least 100");
  if (!(rc.level > 0.0 && rc.level < 1.0)) throw ConfigError("field 'level' must lie in (0, 1)");
  const auto hist = load_counts(rc);
  const auto fixed = rc.model(false);
  const auto detectors = rc.detectors(rc.cutoff);
  auto options = fit_options(rc);
  const auto reference = fit_model(hist, fixed, detectors, options);
  const int status = fit_status(reference, ctx.err);
  if (status != kOk) return status;

  FitOptions refit = options;
  refit.starts = 1;
  refit.initial = std::vector<double>(reference.estimates.data(),
                                      reference.estimates.data() + reference.estimates.size());
  refit.initial_step = 0.1;
  refit.x_tolerance = 1e-5;
  const auto grid = rc.phase_grid(rc.band_points);
  BootstrapOptions bo;
  bo.resamples = rc.resamples;
  bo.level = rc.level;
  bo.seed = seed;
  bo.threads = rc.threads;
  const auto band = bootstrap_ci(hist, fisher_statistic(fixed, detectors, refit, grid, detectors), bo);
  write_band_csv(ctx.out_dir / "band.csv", grid, band, ctx.prov);
  ctx.out << "band.csv: " << grid.size() << " phases, mean width " << format_double(band.mean_width()) << "\n";
  return kOk;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<const std::vector<OptionSpec>*> groups;
  std::function<int(Context&)> body;
  int default_phase_points = 0;
};

std::vector<Command> commands() {
  return {
      {"sweep", "Fisher information over the phase grid (fisher.csv, fisher.json)",
       {&kModelOptions, &kDetectorOptions, &kPhaseOptions, &kRunOptions},
       cmd_sweep,
       2048},
      {"loss-scan", "Fisher information against loss and photon number (fi_vs_loss.csv, ratio_vs_nbar.csv, subsnl_vs_nbar.csv)",
       {&kModelOptions, &kPhaseOptions, &kRunOptions, &kLossScanOptions, &kDetectorOptions},
       cmd_loss_scan,
       2048},
      {"tomography", "Detector POVM from coherent-probe data (povm.json)", {&kTomographyOptions, &kRunOptions},
       cmd_tomography},
      {"simulate-probes", "Synthetic coherent-probe data (probes.csv)", {&kProbeOptions, &kSeedOptions},
       cmd_simulate_probes},
      {"fit", "Model fit to a count histogram (fit.json)",
       {&kModelOptions, &kDetectorOptions, &kFitOptions, &kSeedOptions, &kRunOptions},
       cmd_fit},
      {"bootstrap", "Bootstrap band for the fitted Fisher information (band.csv)",
       {&kModelOptions, &kDetectorOptions, &kFitOptions, &kBootstrapOptions, &kPhaseOptions, &kSeedOptions,
        &kRunOptions},
       cmd_bootstrap},
      {"simulate-counts", "Synthetic count histogram (counts.csv)",
       {&kModelOptions, &kDetectorOptions, &kPhaseOptions, &kSimulateOptions, &kSeedOptions},
       cmd_simulate_counts,
       20},
  };
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::merge(const Json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const Json& v = it.value();
    if (key == "command") continue;
    if (key == "z") {
      z = v.is_null() ? std::nullopt : std::optional<double>(number_field(v, key));
    } else if (key == "nbar") {
      nbar = v.is_null() ? std::nullopt : std::optional<double>(number_field(v, key));
    } else if (key == "eta_p") {
      eta_p = number_list(v, key);
    } else if (key == "eta_d") {
      eta_d = number_list(v, key);
    } else if (key == "cutoff") {
      cutoff = int_field(v, key);
    } else if (key == "detector") {
      detector = string_field(v, key);
    } else if (key == "n_max") {
      n_max = int_field(v, key);
    } else if (key == "phases") {
      phases = number_list(v, key);
    } else if (key == "phase_points") {
      phase_points = v.is_null() ? std::nullopt : std::optional<int>(int_field(v, key));
    } else if (key == "degrees") {
      degrees = bool_field(v, key);
    } else if (key == "seed") {
      if (v.is_null()) {
        seed.reset();
      } else {
        const auto s = integer_field(v, key);
        if (s < 0) throw ConfigError("field 'seed' must be non-negative");
        seed = static_cast<std::uint64_t>(s);
      }
    } else if (key == "threads") {
      threads = int_field(v, key);
    } else if (key == "losses") {
      losses = number_list(v, key);
    } else if (key == "nbar_grid") {
      nbar_grid = number_list(v, key);
    } else if (key == "loss_model") {
      loss_model = v.is_null() ? std::nullopt : std::optional<std::vector<double>>(number_list(v, key));
    } else if (key == "probes") {
      probes = string_field(v, key);
    } else if (key == "k_max") {
      k_max = int_field(v, key);
    } else if (key == "outcomes") {
      outcomes = int_field(v, key);
    } else if (key == "tolerance") {
      tolerance = number_field(v, key);
    } else if (key == "max_iterations") {
      max_iterations = int_field(v, key);
    } else if (key == "allow_rank_deficient") {
      allow_rank_deficient = bool_field(v, key);
    } else if (key == "eta") {
      eta = number_field(v, key);
    } else if (key == "probe_ladder") {
      probe_ladder = number_list(v, key);
    } else if (key == "probe_shots") {
      probe_shots = number_field(v, key);
    } else if (key == "noiseless") {
      noiseless = bool_field(v, key);
    } else if (key == "counts") {
      counts = string_field(v, key);
    } else if (key == "free") {
      free = string_list(v, key);
    } else if (key == "include_singles") {
      include_singles = bool_field(v, key);
    } else if (key == "lenient") {
      lenient = bool_field(v, key);
    } else if (key == "starts") {
      starts = int_field(v, key);
    } else if (key == "resamples") {
      resamples = int_field(v, key);
    } else if (key == "level") {
      level = number_field(v, key);
    } else if (key == "band_points") {
      band_points = int_field(v, key);
    } else if (key == "trials") {
      trials = integer_field(v, key);
    } else {
      throw ConfigError("unknown field '" + key + "'");
    }
  }
}

Json RunConfig::to_json() const {
  Json j;
  j["command"] = command;
  j["z"] = z ? Json(*z) : Json(nullptr);
  j["nbar"] = nbar ? Json(*nbar) : Json(nullptr);
  j["eta_p"] = eta_p;
  j["eta_d"] = eta_d;
  j["cutoff"] = cutoff;
  j["detector"] = detector;
  j["n_max"] = n_max;
  j["phases"] = phases;
  j["phase_points"] = phase_points ? Json(*phase_points) : Json(nullptr);
  j["degrees"] = degrees;
  j["seed"] = seed ? Json(*seed) : Json(nullptr);
  j["threads"] = threads;
  if (command == "loss-scan") {
    j["losses"] = losses;
    j["nbar_grid"] = nbar_grid;
    j["loss_model"] = loss_model ? Json(*loss_model) : Json(nullptr);
  }
  if (command == "tomography" || command == "simulate-probes") {
    j["probes"] = probes;
    j["k_max"] = k_max;
    j["outcomes"] = outcomes;
    j["tolerance"] = tolerance;
    j["max_iterations"] = max_iterations;
    j["allow_rank_deficient"] = allow_rank_deficient;
    j["eta"] = eta;
    j["probe_ladder"] = probe_ladder;
    j["probe_shots"] = probe_shots;
    j["noiseless"] = noiseless;
  }
  if (command == "fit" || command == "bootstrap" || command == "simulate-counts") {
    j["counts"] = counts;
    j["free"] = free;
    j["include_singles"] = include_singles;
    j["lenient"] = lenient;
    j["starts"] = starts;
    j["resamples"] = resamples;
    j["level"] = level;
    j["band_points"] = band_points;
    j["trials"] = trials;
  }
  return j;
}

InterferometerConfig RunConfig::model(bool require_squeezing) const {
  if (z && nbar) throw ConfigError("fields 'z' and 'nbar' are mutually exclusive");
  if (require_squeezing && !z && !nbar) throw ConfigError("one of the fields 'z' or 'nbar' is required");
  if (cutoff < 1 || cutoff > 60) throw ConfigError("field 'cutoff' must lie in [1, 60]");
  InterferometerConfig c;
  c.cutoff = FockCutoff{cutoff};
  try {
    if (z) c.squeezing = SqueezingParams(*z);
    if (nbar) c.squeezing = SqueezingParams::from_mean_photons(*nbar);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field '") + (z ? "z" : "nbar") + "': " + e.what());
  }
  c.loss = loss_from(eta_p, eta_d);
  check_loss(c.loss, "eta_p/eta_d");
  return c;
}

DetectorPair RunConfig::detectors(int k) const {
  if (detector == "ideal-pnr") {
    if (n_max < 1) throw ConfigError("field 'n_max' must be at least 1");
    return DetectorPair::ideal_pnr(std::min(n_max, k), k);
  }
  if (detector == "click") return DetectorPair::click(k);
  const std::string prefix = "povm-file:";
  if (detector.rfind(prefix, 0) == 0) {
    const std::string paths = detector.substr(prefix.size());
    const auto comma = paths.find(',');
    const std::string first = paths.substr(0, comma);
    const std::string second = comma == std::string::npos ? first : paths.substr(comma + 1);
    if (first.empty() || second.empty()) throw ConfigError("field 'detector': missing POVM file path");
    DetectorPair pair{read_povm_file(first), read_povm_file(second)};
    if (pair.signal.k_max() < k || pair.idler.k_max() < k)
      throw ConfigError("field 'detector': POVM k_max is below the cutoff " + std::to_string(k));
    return pair;
  }
  throw ConfigError("field 'detector' must be ideal-pnr, click or povm-file:<path>");
}

std::vector<double> RunConfig::phase_grid(int default_points) const {
  if (!phases.empty()) {
    std::vector<double> out = phases;
    if (degrees)
      for (double& p : out) p *= std::numbers::pi / 180.0;
    return out;
  }
  const int points = phase_points.value_or(default_points);
  if (points < 1) throw ConfigError("field 'phase_points' must be positive");
  return midpoint_phase_grid(static_cast<std::size_t>(points));
}

// ---------------------------------------------------------------------------
// Entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"qmetro: phase estimation with photon-number-resolving detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("qmetro ") + QMETRO_VERSION);

  const auto table = commands();
  std::map<std::string, std::string> raw;
  std::map<std::string, bool> flags;
  std::string config_path;
  std::string out_dir = ".";
  struct Sub {
    CLI::App* app;
    const Command* command;
    std::vector<std::pair<const OptionSpec*, CLI::Option*>> options;
  };
  std::vector<Sub> subs;
  for (const auto& cmd : table) {
    CLI::App* sc = app.add_subcommand(cmd.name, cmd.help);
    sc->add_option("--config", config_path, "JSON settings file; flags take precedence");
    sc->add_option("--out", out_dir, "output directory");
    Sub sub{sc, &cmd, {}};
    for (const auto* group : cmd.groups) {
      for (const auto& spec : *group) {
        CLI::Option* opt = spec.kind == Kind::flag ? sc->add_flag(spec.flag, flags[spec.key], spec.help)
                                                   : sc->add_option(spec.flag, raw[spec.key], spec.help);
        sub.options.emplace_back(&spec, opt);
      }
    }
    subs.push_back(std::move(sub));
  }

  std::vector<std::string> argv_storage{"qmetro"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  for (const auto& [sc, cmd, options] : subs) {
    if (!sc->parsed()) continue;
    try {
      RunConfig rc;
      rc.command = cmd->name;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config file " + config_path);
        Json file;
        try {
          file = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("config file " + config_path + ": " + e.what());
        }
        rc.merge(file);
      }
      Json overrides = Json::object();
      for (const auto& [spec, opt] : options) {
        if (opt->count() == 0) continue;
        overrides[spec->key] = spec->kind == Kind::flag ? Json(true) : convert(raw[spec->key], *spec);
      }
      rc.merge(overrides);
      if (rc.threads < 0) throw ConfigError("field 'threads' must be non-negative");
      if (rc.eta_p.size() == 1) rc.eta_p.push_back(rc.eta_p[0]);
      if (rc.eta_d.size() == 1) rc.eta_d.push_back(rc.eta_d[0]);
      if (rc.phases.empty() && !rc.phase_points && cmd->default_phase_points > 0)
        rc.phase_points = cmd->default_phase_points;

      std::error_code ec;
      fs::create_directories(out_dir, ec);
      if (ec || !fs::is_directory(out_dir)) throw ConfigError("field 'out': cannot create directory " + out_dir);
      Context ctx{rc, fs::path(out_dir), provenance(rc.to_json()), out, err};
      return cmd->body(ctx);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    } catch (const ParseError& e) {
      err << "input error: " << e.what() << "\n";
      return kConfigError;
    } catch (const CutoffMismatch& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    } catch (const IdentifiabilityError& e) {
      err << "identifiability failure: " << e.what() << "\n";
      return kIdentifiabilityFailure;
    } catch (const ConvergenceError& e) {
      err << "no convergence: " << e.what() << "\n";
      return kNonConvergence;
    } catch (const std::invalid_argument& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kFailure;
    }
  }
  return kConfigError;
}

}  // namespace qmetro::cli
