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

#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qmetro::detail {

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                          double step, const SimplexOptions& options) {
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> x(n + 1, x0);
  std::vector<double> fx(n + 1);
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& p) {
    ++evals;
    const double v = f(p);
    return std::isnan(v) ? HUGE_VAL : v;
  };
  for (Eigen::Index i = 0; i < n; ++i) x[i + 1](i) += step;
  for (Eigen::Index i = 0; i <= n; ++i) fx[i] = eval(x[i]);

  std::vector<std::size_t> order(n + 1);
  bool converged = false;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    {
      std::vector<Eigen::VectorXd> xs;
      std::vector<double> fs;
      for (auto i : order) {
        xs.push_back(x[i]);
        fs.push_back(fx[i]);
      }
      x = std::move(xs);
      fx = std::move(fs);
    }

    double fspread = 0.0, xspread = 0.0;
    for (Eigen::Index i = 1; i <= n; ++i) {
      fspread = std::max(fspread, std::abs(fx[i] - fx[0]));
      xspread = std::max(xspread, (x[i] - x[0]).cwiseAbs().maxCoeff());
    }
    if (fspread <= options.f_tolerance && xspread <= options.x_tolerance) {
      converged = true;
      break;
    }
    if (evals >= options.max_evaluations) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += x[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - x[n]);
    const double fr = eval(xr);
    if (fr < fx[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - x[n]);
      const double fe = eval(xe);
      if (fe < fr) {
        x[n] = xe;
        fx[n] = fe;
      } else {
        x[n] = xr;
        fx[n] = fr;
      }
      continue;
    }
    if (fr < fx[n - 1]) {
      x[n] = xr;
      fx[n] = fr;
      continue;
    }
    const bool outside = fr < fx[n];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (x[n] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : fx[n])) {
      x[n] = xc;
      fx[n] = fc;
      continue;
    }
    for (Eigen::Index i = 1; i <= n; ++i) {
      x[i] = x[0] + 0.5 * (x[i] - x[0]);
      fx[i] = eval(x[i]);
    }
  }
  return {x[0], fx[0], evals, converged};
}

}  // namespace qmetro::detail
