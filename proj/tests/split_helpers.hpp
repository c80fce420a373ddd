// Copyright 2026 The H-FL Simulator Authors.
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

#include <vector>

#include "hfl/nn.hpp"
#include "hfl/rng.hpp"

namespace hfl::testing_helpers {

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.uniform_index(classes));
  return y;
}

// End-to-end loss of a split model on a fixed batch, as a function of the
// concatenated shallow+deep parameter list.
inline double split_loss(const SplitModel& model, const ParamList& all, const Matrix& x, const std::vector<int>& y) {
  const std::size_t ns = model.shallow.params().size();
  const Network shallow(model.shallow.layers(), ParamList(all.begin(), all.begin() + static_cast<long>(ns)));
  const Network deep(model.deep.layers(), ParamList(all.begin() + static_cast<long>(ns), all.end()));
  return forward_deep(deep, forward_shallow(shallow, x).features, y).loss;
}

inline ParamList concat(const ParamList& a, const ParamList& b) {
  ParamList out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline ParamList analytic_split_gradient(const SplitModel& model, const Matrix& x, const std::vector<int>& y) {
  const ShallowForward sf = forward_shallow(model.shallow, x);
  const DeepForward df = forward_deep(model.deep, sf.features, y);
  const DeepBackward db = backward_deep(model.deep, df.trace);
  return concat(backward_shallow(model.shallow, sf.trace, db.grad_features), db.grads);
}

// Xavier init leaves biases at zero, which can put a pre-activation exactly
// on a ReLU kink where finite differences see half the slope. Random biases
// move every unit off the kink almost surely.
inline SplitModel with_random_biases(SplitModel model, Rng& rng) {
  for (Network* net : {&model.shallow, &model.deep}) {
    ParamList p = net->params();
    for (Matrix& m : p)
      if (m.cols() == 1)
        for (double& v : m.data()) v = rng.uniform(-0.5, 0.5);
    net->set_params(std::move(p));
  }
  return model;
}

}  // namespace hfl::testing_helpers
