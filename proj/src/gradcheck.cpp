// Copyright 2026 The kgup Authors. All Rights Reserved.
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

#include "kgup/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace kgup::ad {

namespace {

// Derivative at x0 of the quadratic through (x0, f0), (x1, f1), (x2, f2).
double three_point(double x0, double f0, double x1, double f1, double x2, double f2) {
  return f0 * (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2)) + f1 * (x0 - x2) / ((x1 - x0) * (x1 - x2)) +
         f2 * (x0 - x1) / ((x2 - x0) * (x2 - x1));
}

double weighted_sum(const Tensor& out, const std::vector<float>& weights) {
  double acc = 0.0;
  auto v = out.data();
  for (std::size_t i = 0; i < v.size(); ++i) acc += static_cast<double>(v[i]) * weights[i];
  return acc;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& f, const NamedTensors& params,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<float> weights;
  {
    Tape probe = Tape::inference();
    Tensor out = f(probe);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    weights.resize(out.size());
    for (auto& w : weights) w = dist(rng);
  }

  for (const auto& [name, p] : params) {
    p.node()->grad.clear();
  }
  Tape tape;
  Tensor out = f(tape);
  Tensor r = Tensor::from({out.rows(), out.cols()}, weights);
  Tensor loss = sum(tape, mul(tape, out, r));
  tape.backward(loss);

  auto evaluate = [&]() {
    Tape t = Tape::inference();
    return weighted_sum(f(t), weights);
  };

  struct Checked {
    const std::string* name;
    double analytic;
    double extrapolated;
    // Fallbacks for a kink inside the probe interval: plain central
    // difference at eps and second-order one-sided differences.
    std::array<double, 3> fallback;
  };
  std::vector<Checked> checked;
  GradCheckReport report;
  for (const auto& [name, p] : params) {
    Tensor param = p;
    std::vector<float> analytic(param.size(), 0.0f);
    if (!param.grad().empty()) std::copy(param.grad().begin(), param.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(param.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords > 0 && coords.size() > options.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }

    const double f0 = evaluate();
    auto data = param.data();
    for (const std::size_t i : coords) {
      const float x = data[i];
      // Probe at x +- eps and x +- 2 eps; the actual float steps are used as
      // the denominators.
      auto probe = [&](double step) {
        const auto xp = static_cast<float>(x + step);
        const auto xm = static_cast<float>(x - step);
        data[i] = xp;
        const double fp = evaluate();
        data[i] = xm;
        const double fm = evaluate();
        data[i] = x;
        return std::array<double, 4>{fp, fm, static_cast<double>(xp), static_cast<double>(xm)};
      };
      const auto near = probe(options.eps);
      const auto far = probe(2.0 * options.eps);
      const double d1 = (near[0] - near[1]) / (near[2] - near[3]);
      const double d2 = (far[0] - far[1]) / (far[2] - far[3]);
      // Richardson extrapolation cancels the O(eps^2) truncation term.
      const double forward = three_point(x, f0, near[2], near[0], far[2], far[0]);
      const double backward = three_point(x, f0, near[3], near[1], far[3], far[1]);
      checked.push_back({&name, analytic[i], (4.0 * d1 - d2) / 3.0, {d1, forward, backward}});
    }
  }

  double scale = options.floor;
  for (const auto& c : checked) scale = std::max({scale, std::abs(c.analytic), std::abs(c.extrapolated)});
  for (const auto& c : checked) {
    double err = std::abs(c.analytic - c.extrapolated) / scale;
    if (err > options.kink_tolerance) {
      double best = err;
      for (double estimate : c.fallback) best = std::min(best, std::abs(c.analytic - estimate) / scale);
      if (best < err) {
        err = best;
        ++report.one_sided;
      }
    }
    if (err > report.max_error || report.worst.empty()) {
      report.max_error = std::max(report.max_error, err);
      report.worst = *c.name;
    }
  }
  report.coords = checked.size();
  return report;
}

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& point, double eps) {
  Tensor x = point;
  const bool had = x.requires_grad();
  x.set_requires_grad(true);
  GradCheckOptions options;
  options.eps = eps;
  auto report = grad_check([&](Tape& tape) { return f(tape, x); }, {{"x", x}}, options);
  x.set_requires_grad(had);
  return report.max_error;
}

}  // namespace kgup::ad
