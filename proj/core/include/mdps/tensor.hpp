// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mdps {

/// Interval tag for image data. `Unit` is raw [0,1] pixel space, `Model` is
/// the [-1,1] space the denoiser operates in, `Free` marks noisy/latent
/// tensors that carry no range guarantee (forward-noised states, gradients).
enum class ValueRange { Unit, Model, Free };

const char* value_range_name(ValueRange r);

/// Channel-first float32 image, contiguous CHW layout.
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  ValueRange range = ValueRange::Free;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(int c, int h, int w, ValueRange r = ValueRange::Free, float fill = 0.0f);

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const ImageTensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  /// Enforces the type invariants: dims >= 1, all entries finite, and
  /// entries within the declared range (1e-6 slack) for Unit/Model tags.
  /// Throws std::invalid_argument on violation.
  void validate() const;

  bool all_finite() const;
};

/// [0,1] -> [-1,1]. Identity if already model-space.
ImageTensor to_model_range(const ImageTensor& img);
/// [-1,1] -> [0,1]. Identity if already unit-range.
ImageTensor to_unit_range(const ImageTensor& img);
/// Clamp entries into the given range and retag.
ImageTensor clamp_to_range(const ImageTensor& img, ValueRange range);

/// Binary H x W mask. 1 = suspected anomaly, 0 = trusted normal.
struct MaskImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  MaskImage() = default;
  MaskImage(int h, int w, std::uint8_t fill = 0);

  static MaskImage zeros(int h, int w) { return MaskImage(h, w, 0); }
  static MaskImage ones(int h, int w) { return MaskImage(h, w, 1); }

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t count_ones() const;
  bool matches(const ImageTensor& img) const {
    return height == img.height && width == img.width;
  }

  /// Entries must be exactly 0 or 1, dims >= 1.
  void validate() const;
};

/// Nonnegative H x W float map of pixel-wise anomaly scores.
struct ScoreMap {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ScoreMap() = default;
  ScoreMap(int h, int w, float fill = 0.0f);

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

/// Bilinear upsampling/downsampling of a score map (pixel-center aligned,
/// same convention as standard image resize).
ScoreMap resize_bilinear(const ScoreMap& src, int out_h, int out_w);

}  // namespace mdps
