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

#include "qmetro/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace qmetro {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw ParseError(where + ": '" + t + "' is not a number");
  return v;
}

std::int64_t parse_integer(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw ParseError(where + ": '" + t + "' is not an integer");
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

bool is_header_row(const std::vector<std::string>& fields) {
  if (fields.empty()) return false;
  const std::string t = trim(fields[0]);
  double v;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  return res.ec != std::errc() || res.ptr != t.data() + t.size();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vector_json(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

Json matrix_json(const RMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_or_null(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Json provenance(const Json& run_config) {
  Json p;
  p["tool"] = "qmetro";
  p["version"] = QMETRO_VERSION;
  p["config"] = run_config;
  return p;
}

std::string csv_header(const Json& provenance) {
  std::string out = "# qmetro " + provenance.value("version", std::string("?")) + "\n";
  out += "# config=" + provenance.value("config", Json::object()).dump() + "\n";
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Json config_to_json(const InterferometerConfig& config) {
  Json j;
  j["z"] = config.squeezing.z();
  j["mean_photons"] = config.squeezing.mean_photons();
  j["eta_p_s"] = config.loss.eta_p_s;
  j["eta_p_i"] = config.loss.eta_p_i;
  j["eta_d_s"] = config.loss.eta_d_s;
  j["eta_d_i"] = config.loss.eta_d_i;
  j["cutoff"] = config.cutoff.max_photons();
  return j;
}

// ---------------------------------------------------------------------------
// POVM

Json povm_to_json(const DetectorPovm& povm) {
  Json j;
  j["k_max"] = povm.k_max();
  j["outcomes"] = povm.labels();
  j["theta"] = matrix_json(povm.theta());
  return j;
}

DetectorPovm povm_from_json(const Json& j) {
  try {
    const int k_max = j.at("k_max").get<int>();
    const auto labels = j.at("outcomes").get<std::vector<std::string>>();
    const auto& rows = j.at("theta");
    if (!rows.is_array() || static_cast<int>(rows.size()) != k_max + 1)
      throw ParseError("POVM JSON: theta must have k_max + 1 rows");
    RMatrix theta(k_max + 1, static_cast<Eigen::Index>(labels.size()));
    for (int k = 0; k <= k_max; ++k) {
      const auto& row = rows[static_cast<std::size_t>(k)];
      if (!row.is_array() || row.size() != labels.size())
        throw ParseError("POVM JSON: theta row " + std::to_string(k) + " needs one entry per outcome");
      for (std::size_t n = 0; n < labels.size(); ++n) theta(k, static_cast<Eigen::Index>(n)) = row[n].get<double>();
    }
    return DetectorPovm(std::move(theta), labels);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("POVM JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("POVM JSON: ") + e.what());
  }
}

DetectorPovm read_povm_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return povm_from_json(j);
}

// ---------------------------------------------------------------------------
// Probe CSV

ProbeData read_probe_csv(const std::filesystem::path& path, int min_outcomes) {
  auto in = open_input(path);
  std::vector<double> order;
  std::map<double, std::map<std::int64_t, double>> counts;
  std::int64_t max_outcome = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split(t, ',');
    if (is_header_row(fields)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3) throw ParseError(where + ": expected alpha_sq,outcome,count");
    const double alpha = parse_double(fields[0], where);
    const std::int64_t outcome = parse_integer(fields[1], where);
    const double count = parse_double(fields[2], where);
    if (outcome < 0) throw ParseError(where + ": negative outcome index");
    if (!(count >= 0.0)) throw ParseError(where + ": negative count");
    if (!counts.count(alpha)) order.push_back(alpha);
    auto& row = counts[alpha];
    if (row.count(outcome)) throw ParseError(where + ": duplicate (alpha_sq, outcome)");
    row[outcome] = count;
    max_outcome = std::max(max_outcome, outcome);
  }
  if (order.empty()) throw ParseError(path.string() + ": no probe rows");
  const auto outcomes = std::max<Eigen::Index>(max_outcome + 1, min_outcomes);
  ProbeData data;
  data.response.frequencies = RMatrix::Zero(static_cast<Eigen::Index>(order.size()), outcomes);
  for (std::size_t m = 0; m < order.size(); ++m) {
    double shots = 0.0;
    for (const auto& [n, c] : counts[order[m]]) shots += c;
    if (!(shots > 0.0)) throw ParseError(path.string() + ": probe " + format_double(order[m]) + " has no counts");
    for (const auto& [n, c] : counts[order[m]]) data.response.frequencies(static_cast<Eigen::Index>(m), n) = c / shots;
    data.probes.mean_photons.push_back(order[m]);
    data.probes.shots.push_back(shots);
  }
  data.response.shots = data.probes.shots;
  return data;
}

void write_probe_csv(const std::filesystem::path& path, const ProbeData& data, const Json& provenance) {
  auto out = open_output(path);
  out << csv_header(provenance) << "alpha_sq,outcome,count\n";
  const RMatrix& f = data.response.frequencies;
  for (Eigen::Index m = 0; m < f.rows(); ++m) {
    for (Eigen::Index n = 0; n < f.cols(); ++n) {
      const double count = std::round(f(m, n) * data.response.shots[static_cast<std::size_t>(m)] * 1e6) / 1e6;
      out << format_double(data.probes.mean_photons[static_cast<std::size_t>(m)]) << ',' << n << ','
          << format_double(count) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Count CSV

CountHistogram read_counts_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::optional<std::int64_t> trials;
  std::vector<double> order;
  std::map<double, std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>> cells;
  std::int64_t max_j = -1, max_k = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (t[0] == '#') {
      const auto pos = t.find("trials_per_phase=");
      if (pos != std::string::npos) trials = parse_integer(t.substr(pos + 17), where);
      continue;
    }
    const auto fields = split(t, ',');
    if (is_header_row(fields)) continue;
    if (fields.size() != 4) throw ParseError(where + ": expected phase_rad,j,k,count");
    const double phase = parse_double(fields[0], where);
    const std::int64_t j = parse_integer(fields[1], where);
    const std::int64_t k = parse_integer(fields[2], where);
    const std::int64_t c = parse_integer(fields[3], where);
    if (j < 0 || k < 0) throw ParseError(where + ": negative outcome index");
    if (c < 0) throw ParseError(where + ": negative count");
    if (!cells.count(phase)) order.push_back(phase);
    auto& table = cells[phase];
    if (table.count({j, k})) throw ParseError(where + ": duplicate (phase, j, k)");
    table[{j, k}] = c;
    max_j = std::max(max_j, j);
    max_k = std::max(max_k, k);
  }
  if (!trials) throw ParseError(path.string() + ": missing '# trials_per_phase=N' header");
  if (order.empty()) throw ParseError(path.string() + ": no count rows");
  CountHistogram hist;
  hist.trials_per_phase = *trials;
  for (double phase : order) {
    CountTable table = CountTable::Zero(max_j + 1, max_k + 1);
    for (const auto& [jk, c] : cells[phase]) table(jk.first, jk.second) = c;
    hist.phases.push_back(phase);
    hist.counts.push_back(std::move(table));
  }
  return hist;
}

void write_counts_csv(const std::filesystem::path& path, const CountHistogram& hist, const Json& provenance) {
  auto out = open_output(path);
  out << csv_header(provenance) << "# trials_per_phase=" << hist.trials_per_phase << "\n";
  out << "phase_rad,j,k,count\n";
  for (std::size_t i = 0; i < hist.phases.size(); ++i) {
    const auto& c = hist.counts[i];
    for (Eigen::Index j = 0; j < c.rows(); ++j)
      for (Eigen::Index k = 0; k < c.cols(); ++k)
        out << format_double(hist.phases[i]) << ',' << j << ',' << k << ',' << c(j, k) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports

void write_fisher_csv(const std::filesystem::path& path, const FisherReport& report, const Json& provenance) {
  auto out = open_output(path);
  out << csv_header(provenance) << "phase,cfi,qfi,snl,cfi_per_photon\n";
  for (std::size_t i = 0; i < report.phase_grid.size(); ++i) {
    out << format_double(report.phase_grid[i]) << ',' << format_double(report.cfi[i]) << ','
        << format_double(report.qfi[i]) << ',' << format_double(report.snl) << ','
        << format_double(report.cfi_per_photon[i]) << '\n';
  }
}

Json fisher_to_json(const FisherReport& report, const Json& provenance) {
  Json j;
  j["provenance"] = provenance;
  j["model"] = config_to_json(report.config);
  j["config_hash"] = report.config_hash;
  j["snl"] = report.snl;
  j["qfi_lossless"] = report.qfi_lossless;
  j["near_singular_outcomes"] = report.near_singular_outcomes;
  j["sub_snl_fraction_cfi"] = report.snl > 0.0 ? Json(sub_snl_fraction(report, FisherKind::classical)) : Json(nullptr);
  j["phase"] = vector_json(report.phase_grid);
  j["cfi"] = vector_json(report.cfi);
  j["qfi"] = vector_json(report.qfi);
  j["cfi_per_photon"] = vector_json(report.cfi_per_photon);
  j["qfi_per_photon"] = vector_json(report.qfi_per_photon);
  return j;
}

Json fit_to_json(const FitResult& fit, const Json& provenance) {
  Json j;
  j["provenance"] = provenance;
  Json names = Json::array();
  for (auto p : fit.free) names.push_back(to_string(p));
  j["parameters"] = names;
  j["estimates"] = vector_json(std::span<const double>(fit.estimates.data(), fit.estimates.size()));
  Json se = Json::array();
  for (auto p : fit.free) se.push_back(number_or_null(fit.standard_error(p)));
  j["standard_errors"] = se;
  j["covariance"] = matrix_json(fit.covariance);
  j["covariance_valid"] = fit.covariance_valid;
  j["model"] = config_to_json(fit.config);
  j["n_bar_hat"] = fit.n_bar_hat;
  j["log_likelihood"] = number_or_null(fit.log_likelihood);
  j["deviance"] = number_or_null(fit.deviance);
  j["degrees_of_freedom"] = fit.degrees_of_freedom;
  j["converged"] = fit.converged;
  j["identifiable"] = fit.identifiable;
  j["at_boundary"] = fit.at_boundary;
  j["evaluations"] = fit.evaluations;
  j["seed"] = fit.seed;
  j["warnings"] = fit.warnings;
  return j;
}

Json tomography_to_json(const TomographyResult& result, const Json& provenance) {
  Json j = povm_to_json(result.povm);
  Json diag;
  diag["iterations"] = result.iterations;
  diag["converged"] = result.converged;
  diag["log_likelihood"] = number_or_null(result.log_likelihood);
  diag["gradient_norm"] = number_or_null(result.gradient_norm);
  diag["condition_number"] = number_or_null(result.condition_number);
  diag["rank"] = result.rank;
  j["diagnostics"] = diag;
  j["provenance"] = provenance;
  return j;
}

void write_band_csv(const std::filesystem::path& path, std::span<const double> phases, const ConfidenceBand& band,
                    const Json& provenance) {
  auto out = open_output(path);
  out << csv_header(provenance) << "phase,point,lower,upper\n";
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << format_double(phases[i]) << ',' << format_double(band.point(k)) << ',' << format_double(band.lower(k))
        << ',' << format_double(band.upper(k)) << '\n';
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
}

}  // namespace qmetro
