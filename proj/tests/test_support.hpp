// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "mdps/denoiser.hpp"
#include "mdps/rng.hpp"
#include "mdps/tensor.hpp"

namespace mdps::test {

inline ImageTensor random_image(Rng& rng, int c, int h, int w, float scale = 1.0f,
                                ValueRange range = ValueRange::Free) {
  ImageTensor img(c, h, w, range);
  for (auto& v : img.data) v = scale * rng.normal_f();
  return img;
}

inline ImageTensor random_unit_image(Rng& rng, int c, int h, int w) {
  ImageTensor img(c, h, w, ValueRange::Unit);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

inline MaskImage random_mask(Rng& rng, int h, int w, double p_one = 0.5) {
  MaskImage m(h, w, 0);
  for (auto& v : m.data) v = rng.uniform() < p_one ? 1 : 0;
  return m;
}

inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  }
  return m;
}

/// eps(x_t, t) = 0: the prior estimate reduces to x_t / sqrt(a_t).
class ZeroDenoiser final : public Denoiser {
 public:
  ImageTensor evaluate(const ImageTensor& x_t, int) const override {
    return ImageTensor(x_t.channels, x_t.height, x_t.width, ValueRange::Free, 0.0f);
  }
  bool supports_input_gradient() const override { return true; }
  ImageTensor input_vjp(const ImageTensor& x_t, int, const ImageTensor&) const override {
    return ImageTensor(x_t.channels, x_t.height, x_t.width, ValueRange::Free, 0.0f);
  }
  std::string architecture() const override { return "zero-stub"; }
};

/// Replays a fixed noise tensor regardless of input (perfect-epsilon stub).
class FixedEpsDenoiser final : public Denoiser {
 public:
  explicit FixedEpsDenoiser(ImageTensor eps) : eps_(std::move(eps)) {}
  ImageTensor evaluate(const ImageTensor&, int) const override { return eps_; }
  bool supports_input_gradient() const override { return true; }
  ImageTensor input_vjp(const ImageTensor& x_t, int, const ImageTensor&) const override {
    return ImageTensor(x_t.channels, x_t.height, x_t.width, ValueRange::Free, 0.0f);
  }
  std::string architecture() const override { return "fixed-eps-stub"; }

 private:
  ImageTensor eps_;
};

/// No gradient support at all; exercises the configuration-error path.
class NoGradDenoiser final : public Denoiser {
 public:
  ImageTensor evaluate(const ImageTensor& x_t, int) const override {
    return ImageTensor(x_t.channels, x_t.height, x_t.width, ValueRange::Free, 0.0f);
  }
  bool supports_input_gradient() const override { return false; }
  ImageTensor input_vjp(const ImageTensor&, int, const ImageTensor&) const override {
    throw std::runtime_error("no gradient support");
  }
  std::string architecture() const override { return "no-grad-stub"; }
};

}  // namespace mdps::test
