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

// File formats: POVM JSON, probe and count CSVs, Fisher reports, fit results
// and bootstrap bands. Every writer takes a provenance object that is embedded
// verbatim, as a "provenance" block in JSON and as '#' lines in CSV.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qmetro/detectors.hpp"
#include "qmetro/inference.hpp"
#include "qmetro/metrology.hpp"

namespace qmetro {

using Json = nlohmann::ordered_json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"tool": "qmetro", "version": ..., "config": run_config}
Json provenance(const Json& run_config);
std::string csv_header(const Json& provenance);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

Json config_to_json(const InterferometerConfig& config);

Json povm_to_json(const DetectorPovm& povm);
DetectorPovm povm_from_json(const Json& j);
DetectorPovm read_povm_file(const std::filesystem::path& path);

struct ProbeData {
  ProbeSet probes;
  ResponseMatrix response;
};

/// Long format `alpha_sq,outcome,count`; outcomes are column indices. Probes
/// keep the order of first appearance; shots per probe are the count totals.
ProbeData read_probe_csv(const std::filesystem::path& path, int min_outcomes = 0);
void write_probe_csv(const std::filesystem::path& path, const ProbeData& data, const Json& provenance);

/// Long format `phase_rad,j,k,count` after a `# trials_per_phase=N` line.
CountHistogram read_counts_csv(const std::filesystem::path& path);
void write_counts_csv(const std::filesystem::path& path, const CountHistogram& hist, const Json& provenance);

void write_fisher_csv(const std::filesystem::path& path, const FisherReport& report, const Json& provenance);
Json fisher_to_json(const FisherReport& report, const Json& provenance);

Json fit_to_json(const FitResult& fit, const Json& provenance);
Json tomography_to_json(const TomographyResult& result, const Json& provenance);

void write_band_csv(const std::filesystem::path& path, std::span<const double> phases, const ConfidenceBand& band,
                    const Json& provenance);

void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace qmetro
