// Copyright (c) 2026 The infercal Authors. All Rights Reserved.
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

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testsupport {

// Central-difference derivative of `f` with respect to each coordinate that
// `indices` selects (all coordinates when empty). The function must not keep
// state between calls; `x` is restored after each probe.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    const std::vector<std::size_t>& indices, double h = 1e-5) {
  std::vector<std::size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) idx[i] = i;
  }
  std::vector<double> grad;
  grad.reserve(idx.size());
  for (std::size_t i : idx) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f(x);
    x[i] = saved - h;
    const double fm = f(x);
    x[i] = saved;
    grad.push_back((fp - fm) / (2.0 * h));
  }
  return grad;
}

// |a-b| / max(1, |a|, |b|): relative when the values are large, absolute
// near zero, so tiny gradients do not blow up the ratio.
inline double relative_error(double a, double b) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

}  // namespace testsupport
