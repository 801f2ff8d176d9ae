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

#include <functional>

#include <Eigen/Dense>

namespace qmetro::detail {

struct SimplexOptions {
  int max_evaluations = 5000;
  double f_tolerance = 1e-15;
  double x_tolerance = 1e-9;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead minimisation with the standard coefficients (1, 2, 1/2, 1/2),
/// initial simplex x0 + step * e_i.
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                          double step, const SimplexOptions& options = {});

}  // namespace qmetro::detail
