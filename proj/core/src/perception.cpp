// SPDX-License-Identifier: Apache-2.0
#include "mdps/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "mdps/checkpoint.hpp"
#include "mdps/nn/layers.hpp"
#include "mdps/rng.hpp"

namespace mdps {

void DifferenceConfig::validate() const {
  if (!(eta >= 0.0f)) throw std::invalid_argument("DifferenceConfig: eta must be >= 0");
  if (stages.empty()) throw std::invalid_argument("DifferenceConfig: stage set J is empty");
  for (int s : stages) {
    if (s < 1) throw std::invalid_argument("DifferenceConfig: stage indices are 1-based");
  }
}

const char* difference_mode_name(DifferenceConfig::Mode mode) {
  switch (mode) {
    case DifferenceConfig::Mode::Combined: return "combined";
    case DifferenceConfig::Mode::PixelOnly: return "pixel_only";
    case DifferenceConfig::Mode::PerceptualOnly: return "perceptual_only";
  }
  return "?";
}

DifferenceConfig::Mode difference_mode_from_name(const std::string& name) {
  if (name == "combined") return DifferenceConfig::Mode::Combined;
  if (name == "pixel_only") return DifferenceConfig::Mode::PixelOnly;
  if (name == "perceptual_only") return DifferenceConfig::Mode::PerceptualOnly;
  throw std::invalid_argument("unknown difference mode '" + name +
                              "' (expected combined|pixel_only|perceptual_only)");
}

ScoreMap difference_map(const ImageTensor& x0, const ImageTensor& y,
                        const FeatureBackbone& backbone, const DifferenceConfig& cfg) {
  cfg.validate();
  if (!x0.same_shape(y)) throw std::invalid_argument("difference_map: shape mismatch");
  const int max_stage = *std::max_element(cfg.stages.begin(), cfg.stages.end());

  ScoreMap out(y.height, y.width, 0.0f);
  const std::size_t plane = y.pixels();

  if (cfg.mode != DifferenceConfig::Mode::PerceptualOnly && cfg.eta > 0.0f) {
    for (int c = 0; c < y.channels; ++c) {
      const float* py = &y.data[static_cast<std::size_t>(c) * plane];
      const float* px = &x0.data[static_cast<std::size_t>(c) * plane];
      for (std::size_t i = 0; i < plane; ++i) out.data[i] += cfg.eta * std::abs(py[i] - px[i]);
    }
  }

  if (cfg.mode != DifferenceConfig::Mode::PixelOnly) {
    if (backbone.stage_count() < max_stage) {
      throw std::invalid_argument("difference_map: backbone provides " +
                                  std::to_string(backbone.stage_count()) +
                                  " stages, J requires " + std::to_string(max_stage));
    }
    const auto fx = backbone.extract(x0);
    const auto fy = backbone.extract(y);
    for (int stage : cfg.stages) {
      const ImageTensor& a = fx[static_cast<std::size_t>(stage - 1)];
      const ImageTensor& b = fy[static_cast<std::size_t>(stage - 1)];
      if (!a.same_shape(b)) throw std::runtime_error("difference_map: stage shape mismatch");
      ScoreMap dist(a.height, a.width, 0.0f);
      const std::size_t splane = a.pixels();
      for (std::size_t i = 0; i < splane; ++i) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int c = 0; c < a.channels; ++c) {
          const double va = a.data[static_cast<std::size_t>(c) * splane + i];
          const double vb = b.data[static_cast<std::size_t>(c) * splane + i];
          dot += va * vb;
          na += va * va;
          nb += vb * vb;
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        // degenerate vectors contribute no perceptual distance
        dist.data[i] = (na < 1e-12 || nb < 1e-12)
                           ? 0.0f
                           : static_cast<float>(1.0 - dot / (na * nb));
      }
      ScoreMap up = resize_bilinear(dist, y.height, y.width);
      for (std::size_t i = 0; i < plane; ++i) out.data[i] += up.data[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Toy and identity backbones
// ---------------------------------------------------------------------------

namespace {

class ToyBackbone final : public FeatureBackbone {
 public:
  explicit ToyBackbone(int in_channels) : in_channels_(in_channels) {
    Rng rng(0xF00DCAFEULL);  // fixed weights: deterministic by construction
    const int widths[3] = {8, 16, 32};
    int prev = in_channels;
    for (int i = 0; i < 3; ++i) {
      convs_.emplace_back(prev, widths[i], 3, 2);
      convs_.back().init_he(rng);
      prev = widths[i];
    }
  }

  std::vector<ImageTensor> extract(const ImageTensor& img) const override {
    if (img.channels != in_channels_) {
      throw std::invalid_argument("toy backbone expects " + std::to_string(in_channels_) +
                                  " channels");
    }
    std::vector<ImageTensor> stages;
    ImageTensor h = img;
    for (const auto& conv : convs_) {
      h = conv.forward(h);
      for (auto& v : h.data) v = std::tanh(v);
      stages.push_back(h);
    }
    return stages;
  }

  int stage_count() const override { return 3; }
  std::string name() const override { return "toy"; }

 private:
  int in_channels_;
  std::vector<nn::Conv2d> convs_;
};

class IdentityBackbone final : public FeatureBackbone {
 public:
  std::vector<ImageTensor> extract(const ImageTensor& img) const override { return {img}; }
  int stage_count() const override { return 1; }
  std::string name() const override { return "identity"; }
};

}  // namespace

std::unique_ptr<FeatureBackbone> make_toy_backbone(int in_channels) {
  return std::make_unique<ToyBackbone>(in_channels);
}

std::unique_ptr<FeatureBackbone> make_identity_backbone() {
  return std::make_unique<IdentityBackbone>();
}

// ---------------------------------------------------------------------------
// ResNet-family backbone from a converted weights bundle
// ---------------------------------------------------------------------------

namespace {

// 3x3/2 max pooling with padding 1 (the resnet stem pool)
ImageTensor maxpool3x3s2(const ImageTensor& x) {
  const int oh = (x.height + 2 - 3) / 2 + 1;
  const int ow = (x.width + 2 - 3) / 2 + 1;
  ImageTensor y(x.channels, oh, ow, ValueRange::Free);
  for (int c = 0; c < x.channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy * 2 - 1 + ky;
            const int ix = ox * 2 - 1 + kx;
            if (iy >= 0 && iy < x.height && ix >= 0 && ix < x.width) {
              best = std::max(best, x.at(c, iy, ix));
            }
          }
        }
        y.at(c, oy, ox) = best;
      }
    }
  }
  return y;
}

// A bottleneck residual block with batchnorm folded into the convolutions.
struct Bottleneck {
  nn::Conv2d c1, c2, c3;
  nn::Conv2d down;
  bool has_down = false;

  ImageTensor forward(const ImageTensor& x) const {
    ImageTensor h = c1.forward(x);
    for (auto& v : h.data) v = std::max(v, 0.0f);
    h = c2.forward(h);
    for (auto& v : h.data) v = std::max(v, 0.0f);
    h = c3.forward(h);
    ImageTensor idn = has_down ? down.forward(x) : x;
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] = std::max(h.data[i] + idn.data[i], 0.0f);
    return h;
  }
};

class ResNetBackbone final : public FeatureBackbone {
 public:
  ResNetBackbone(const std::string& name, const WeightsBundle& bundle) : name_(name) {
    // layout through layer3 (the stages used by the difference metric)
    int base_width = 64;
    if (name == "wide-resnet-101") {
      base_width = 128;
    } else if (name != "resnet-101") {
      throw std::invalid_argument("unsupported resnet identifier: " + name);
    }
    const int depths[3] = {3, 4, 23};
    const int planes[3] = {64, 128, 256};

    std::map<std::string, const nn::Tensor*> by_name;
    for (const auto& nt : bundle.tensors) by_name[nt.name] = &nt.tensor;

    auto want = [&](const std::string& key) -> const nn::Tensor& {
      auto it = by_name.find(key);
      if (it == by_name.end()) {
        throw std::runtime_error("weights bundle missing tensor '" + key + "'");
      }
      return *it->second;
    };

    // conv + folded batchnorm: w' = w * g/sqrt(v+eps), b' = b_bn - g m/sqrt(v+eps)
    auto fold = [&](const std::string& conv_key, const std::string& bn_key, int in_ch, int out_ch,
                    int k, int stride) {
      nn::Conv2d conv(in_ch, out_ch, k, stride);
      const nn::Tensor& w = want(conv_key + ".weight");
      if (w.v.size() != conv.w.v.size()) {
        throw std::runtime_error("weight shape mismatch for " + conv_key);
      }
      const nn::Tensor& g = want(bn_key + ".weight");
      const nn::Tensor& b = want(bn_key + ".bias");
      const nn::Tensor& rm = want(bn_key + ".running_mean");
      const nn::Tensor& rv = want(bn_key + ".running_var");
      const std::size_t per_out = w.v.size() / static_cast<std::size_t>(out_ch);
      for (int oc = 0; oc < out_ch; ++oc) {
        const double scale = g.v[static_cast<std::size_t>(oc)] /
                             std::sqrt(static_cast<double>(rv.v[static_cast<std::size_t>(oc)]) + 1e-5);
        for (std::size_t i = 0; i < per_out; ++i) {
          conv.w.v[static_cast<std::size_t>(oc) * per_out + i] =
              static_cast<float>(w.v[static_cast<std::size_t>(oc) * per_out + i] * scale);
        }
        conv.b.v[static_cast<std::size_t>(oc)] = static_cast<float>(
            b.v[static_cast<std::size_t>(oc)] - rm.v[static_cast<std::size_t>(oc)] * scale);
      }
      return conv;
    };

    stem_ = fold("conv1", "bn1", 3, 64, 7, 2);

    int in_ch = 64;
    for (int li = 0; li < 3; ++li) {
      std::vector<Bottleneck> layer;
      const int width = planes[li] * base_width / 64;
      const int out_ch = planes[li] * 4;
      for (int bi = 0; bi < depths[li]; ++bi) {
        const std::string p = "layer" + std::to_string(li + 1) + "." + std::to_string(bi) + ".";
        Bottleneck blk;
        const int stride = (bi == 0 && li > 0) ? 2 : 1;
        blk.c1 = fold(p + "conv1", p + "bn1", in_ch, width, 1, 1);
        blk.c2 = fold(p + "conv2", p + "bn2", width, width, 3, stride);
        blk.c3 = fold(p + "conv3", p + "bn3", width, out_ch, 1, 1);
        if (bi == 0) {
          blk.down = fold(p + "downsample.0", p + "downsample.1", in_ch, out_ch, 1, stride);
          blk.has_down = true;
        }
        layer.push_back(std::move(blk));
        in_ch = out_ch;
      }
      layers_.push_back(std::move(layer));
    }
  }

  std::vector<ImageTensor> extract(const ImageTensor& img) const override {
    if (img.channels != 3) throw std::invalid_argument("resnet backbone expects 3 channels");
    // ImageNet normalization on unit-range input
    static const float mean[3] = {0.485f, 0.456f, 0.406f};
    static const float stdv[3] = {0.229f, 0.224f, 0.225f};
    ImageTensor x = img.range == ValueRange::Model ? to_unit_range(img) : img;
    const std::size_t plane = x.pixels();
    for (int c = 0; c < 3; ++c) {
      float* p = &x.data[static_cast<std::size_t>(c) * plane];
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mean[c]) / stdv[c];
    }

    ImageTensor h = stem_.forward(x);
    for (auto& v : h.data) v = std::max(v, 0.0f);
    h = maxpool3x3s2(h);

    std::vector<ImageTensor> stages;
    for (const auto& layer : layers_) {
      for (const auto& blk : layer) h = blk.forward(h);
      stages.push_back(h);
    }
    return stages;
  }

  int stage_count() const override { return 3; }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  nn::Conv2d stem_;
  std::vector<std::vector<Bottleneck>> layers_;
};

}  // namespace

std::unique_ptr<FeatureBackbone> load_resnet_backbone(const std::string& name,
                                                      const std::string& weights_path) {
  WeightsBundle bundle = load_weights_bundle(weights_path);
  return std::make_unique<ResNetBackbone>(name, bundle);
}

}  // namespace mdps
