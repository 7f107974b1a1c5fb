// Copyright 2026 The qsit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QSIT_POLYFIT_HPP
#define QSIT_POLYFIT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qsit/error.hpp"

namespace qsit {

inline constexpr int kCurveDegree = 4;

/// Least-squares quartic in the sweep axis. coefficients[k] multiplies t^k.
struct FittedCurve {
  std::array<double, kCurveDegree + 1> coefficients{};
  double lo = 0.0;
  double hi = 0.0;
  double residual_rms = 0.0;

  double operator()(double t) const {
    double v = 0.0;
    for (int k = kCurveDegree; k >= 0; --k) v = v * t + coefficients[static_cast<std::size_t>(k)];
    return v;
  }

  double derivative(double t) const {
    double v = 0.0;
    for (int k = kCurveDegree; k >= 1; --k) {
      v = v * t + k * coefficients[static_cast<std::size_t>(k)];
    }
    return v;
  }
};

inline FittedCurve fit_curve(std::span<const double> axis, std::span<const double> values) {
  if (axis.size() != values.size()) {
    throw DegenerateSampleError("axis/value length mismatch");
  }
  std::vector<double> distinct(axis.begin(), axis.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < static_cast<std::size_t>(kCurveDegree + 1)) {
    throw DegenerateSampleError("rank-deficient design: " + std::to_string(distinct.size()) +
                                " distinct axis values, need at least " +
                                std::to_string(kCurveDegree + 1));
  }

  const auto n = static_cast<Eigen::Index>(axis.size());
  Eigen::MatrixXd design(n, kCurveDegree + 1);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = axis[static_cast<std::size_t>(i)];
    double p = 1.0;
    for (int k = 0; k <= kCurveDegree; ++k) {
      design(i, k) = p;
      p *= t;
    }
    rhs(i) = values[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd c = design.colPivHouseholderQr().solve(rhs);

  FittedCurve curve;
  for (int k = 0; k <= kCurveDegree; ++k) curve.coefficients[static_cast<std::size_t>(k)] = c(k);
  curve.lo = distinct.front();
  curve.hi = distinct.back();
  double ss = 0.0;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const double r = curve(axis[i]) - values[i];
    ss += r * r;
  }
  curve.residual_rms = std::sqrt(ss / static_cast<double>(axis.size()));
  return curve;
}

/// Real roots of sum_k a[k] x^k via companion-matrix eigenvalues, polished
/// with Newton steps. Leading coefficients that are negligible against the
/// largest one are dropped first.
inline std::vector<double> real_roots(std::vector<double> a) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return {};
  while (!a.empty() && std::abs(a.back()) <= 1e-14 * scale) a.pop_back();
  const int deg = static_cast<int>(a.size()) - 1;
  if (deg < 1) return {};
  if (deg == 1) return {-a[0] / a[1]};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -a[static_cast<std::size_t>(i)] / a.back();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto& ev = solver.eigenvalues();

  auto eval = [&](double x, double& d) {
    double v = 0.0;
    d = 0.0;
    for (int k = deg; k >= 0; --k) {
      d = d * x + v;
      v = v * x + a[static_cast<std::size_t>(k)];
    }
    return v;
  };

  std::vector<double> roots;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i).imag()) > 1e-7 * (1.0 + std::abs(ev(i).real()))) continue;
    double x = ev(i).real();
    for (int it = 0; it < 8; ++it) {
      double d;
      const double v = eval(x, d);
      if (d == 0.0) break;
      const double step = v / d;
      x -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Values closer than this (absolute, scaled by max(1, |f|)) count as ties.
inline constexpr double kArgmaxTieTolerance = 1e-12;

/// Maximizer of the curve over [lo, hi]. Candidates are the interior
/// stationary points plus both endpoints; among tied maxima the smallest
/// axis value wins.
inline double argmax(const FittedCurve& curve) {
  std::vector<double> candidates{curve.lo, curve.hi};
  std::vector<double> deriv(kCurveDegree);
  for (int k = 1; k <= kCurveDegree; ++k) {
    deriv[static_cast<std::size_t>(k - 1)] = k * curve.coefficients[static_cast<std::size_t>(k)];
  }
  for (double r : real_roots(deriv)) {
    if (r > curve.lo && r < curve.hi) candidates.push_back(r);
  }
  std::sort(candidates.begin(), candidates.end());
  double best = -std::numeric_limits<double>::infinity();
  for (double c : candidates) best = std::max(best, curve(c));
  const double tol = kArgmaxTieTolerance * std::max(1.0, std::abs(best));
  for (double c : candidates) {
    if (curve(c) >= best - tol) return c;
  }
  return curve.lo;
}

/// True when the fitted curve varies by no more than the tie tolerance
/// across its domain, i.e. the sweep carried no information.
inline bool is_flat(const FittedCurve& curve, int samples = 1000) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i <= samples; ++i) {
    const double t = curve.lo + (curve.hi - curve.lo) * i / samples;
    lo = std::min(lo, curve(t));
    hi = std::max(hi, curve(t));
  }
  return hi - lo <= 1e-9 * std::max(1.0, std::abs(hi));
}

}  // namespace qsit

#endif  // QSIT_POLYFIT_HPP
