// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mdps/denoiser.hpp"

namespace mdps::nn {

/// Adam with decoupled weight decay.
struct AdamW {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-2;

  std::int64_t step_count = 0;
  std::vector<Tensor> m, v;

  void init(const std::vector<ParamRef>& params);
  void step(const std::vector<ParamRef>& params, const GradBuffer& grads);
};

}  // namespace mdps::nn
