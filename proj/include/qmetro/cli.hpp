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

// Command-line front end. Settings come from an optional JSON file
// (--config) with command-line flags taking precedence; the resolved settings
// are embedded in every output file.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmetro/detectors.hpp"
#include "qmetro/io.hpp"
#include "qmetro/optics.hpp"

namespace qmetro::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kIdentifiabilityFailure = 3,
  kNonConvergence = 4,
};

/// Invalid or inconsistent settings; the message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;

  // Model
  std::optional<double> z;
  std::optional<double> nbar;
  std::vector<double> eta_p{1.0, 1.0};  // signal, idler
  std::vector<double> eta_d{1.0, 1.0};
  int cutoff = 10;

  // Detectors: "ideal-pnr", "click" or "povm-file:<path>[,<idler path>]"
  std::string detector = "ideal-pnr";
  int n_max = 10;

  // Phase grid: explicit list, else a midpoint grid of phase_points
  std::vector<double> phases;
  std::optional<int> phase_points;
  bool degrees = false;

  std::optional<std::uint64_t> seed;
  int threads = 0;

  // loss-scan
  std::vector<double> losses{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> nbar_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  std::optional<std::vector<double>> loss_model;  // eta_p_s, eta_p_i, eta_d_s, eta_d_i

  // tomography / simulate-probes
  std::string probes;
  int k_max = 9;
  int outcomes = 0;
  double tolerance = 1e-10;
  int max_iterations = 100000;
  bool allow_rank_deficient = false;
  double eta = 1.0;
  std::vector<double> probe_ladder{0.1, 12.8, 15};
  double probe_shots = 1e6;
  bool noiseless = false;

  // fit / bootstrap / simulate-counts
  std::string counts;
  std::vector<std::string> free{"z", "eta_p_s", "eta_p_i"};
  bool include_singles = false;
  bool lenient = false;
  int starts = 8;
  int resamples = 1000;
  double level = 0.95;
  int band_points = 256;
  std::int64_t trials = 0;

  /// Fields not present in `j` keep their current values. Unknown fields are
  /// an error.
  void merge(const Json& j);
  Json to_json() const;

  InterferometerConfig model(bool require_squeezing) const;
  DetectorPair detectors(int cutoff) const;
  std::vector<double> phase_grid(int default_points) const;
};

/// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qmetro::cli
