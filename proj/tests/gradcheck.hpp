// Copyright 2026 The flowgraph Authors.
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

// Central finite-difference oracle shared by the gradient tests.

#ifndef FLOWGRAPH_TESTS_GRADCHECK_HPP_
#define FLOWGRAPH_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "flowgraph/rng.hpp"
#include "flowgraph/tensor.hpp"

namespace flowgraph::testing {

using T64 = Tensor<double>;
using Tape64 = Tape<double>;
// Builds a scalar loss on a fresh tape from the current parameter values.
using LossFn = std::function<T64(Tape64&)>;

inline T64 random_param(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  auto t = T64::parameter(r, c);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over
// every entry of every parameter. The floor keeps near-zero gradients from
// turning rounding noise into huge relative errors.
inline double max_relative_error(std::vector<T64> params, const LossFn& loss,
                                 double h = 1e-5, double floor = 1e-3) {
  for (auto& p : params) p.zero_grad();
  {
    Tape64 tape;
    tape.backward(loss(tape));
  }
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p.values()[k];
      p.values()[k] = saved + h;
      Tape64 t1(false);
      const double up = loss(t1).item();
      p.values()[k] = saved - h;
      Tape64 t2(false);
      const double down = loss(t2).item();
      p.values()[k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom =
          std::max({std::fabs(analytic[k]), std::fabs(numeric), floor});
      worst = std::max(worst, std::fabs(analytic[k] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace flowgraph::testing

#endif  // FLOWGRAPH_TESTS_GRADCHECK_HPP_
