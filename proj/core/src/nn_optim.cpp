// SPDX-License-Identifier: Apache-2.0
#include "mdps/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mdps::nn {

void AdamW::init(const std::vector<ParamRef>& params) {
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.push_back(Tensor::zeros_like(*p.value));
    v.push_back(Tensor::zeros_like(*p.value));
  }
  step_count = 0;
}

void AdamW::step(const std::vector<ParamRef>& params, const GradBuffer& grads) {
  if (m.size() != params.size()) init(params);
  if (grads.grads.size() != params.size()) {
    throw std::invalid_argument("AdamW::step: gradient layout mismatch");
  }
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value->v;
    const auto& g = grads.grads[i].v;
    auto& mi = m[i].v;
    auto& vi = v[i].v;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      mi[j] = static_cast<float>(beta1 * mi[j] + (1.0 - beta1) * gj);
      vi[j] = static_cast<float>(beta2 * vi[j] + (1.0 - beta2) * gj * gj);
      const double mhat = mi[j] / bc1;
      const double vhat = vi[j] / bc2;
      w[j] = static_cast<float>(w[j] - lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[j]));
    }
  }
}

}  // namespace mdps::nn
