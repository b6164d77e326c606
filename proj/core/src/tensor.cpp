// SPDX-License-Identifier: Apache-2.0
#include "mdps/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mdps {

const char* value_range_name(ValueRange r) {
  switch (r) {
    case ValueRange::Unit: return "unit[0,1]";
    case ValueRange::Model: return "model[-1,1]";
    case ValueRange::Free: return "free";
  }
  return "?";
}

ImageTensor::ImageTensor(int c, int h, int w, ValueRange r, float fill)
    : channels(c), height(h), width(w), range(r) {
  if (c < 1 || h < 1 || w < 1) {
    throw std::invalid_argument("ImageTensor: dimensions must be >= 1, got (" +
                                std::to_string(c) + "," + std::to_string(h) + "," +
                                std::to_string(w) + ")");
  }
  data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

bool ImageTensor::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ImageTensor::validate() const {
  if (channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("ImageTensor: dimensions must be >= 1");
  }
  if (data.size() != static_cast<std::size_t>(channels) * height * width) {
    throw std::invalid_argument("ImageTensor: data size does not match shape");
  }
  if (!all_finite()) {
    throw std::invalid_argument("ImageTensor: non-finite entries");
  }
  constexpr float slack = 1e-6f;
  if (range == ValueRange::Unit || range == ValueRange::Model) {
    const float lo = (range == ValueRange::Unit) ? 0.0f : -1.0f;
    const float hi = 1.0f;
    for (float v : data) {
      if (v < lo - slack || v > hi + slack) {
        throw std::invalid_argument(std::string("ImageTensor: entry ") + std::to_string(v) +
                                    " outside declared range " + value_range_name(range));
      }
    }
  }
}

ImageTensor to_model_range(const ImageTensor& img) {
  if (img.range == ValueRange::Model) return img;
  if (img.range != ValueRange::Unit) {
    throw std::invalid_argument("to_model_range: source must be unit- or model-range");
  }
  ImageTensor out = img;
  out.range = ValueRange::Model;
  for (float& v : out.data) v = 2.0f * v - 1.0f;
  return out;
}

ImageTensor to_unit_range(const ImageTensor& img) {
  if (img.range == ValueRange::Unit) return img;
  if (img.range != ValueRange::Model) {
    throw std::invalid_argument("to_unit_range: source must be unit- or model-range");
  }
  ImageTensor out = img;
  out.range = ValueRange::Unit;
  for (float& v : out.data) v = 0.5f * (v + 1.0f);
  return out;
}

ImageTensor clamp_to_range(const ImageTensor& img, ValueRange range) {
  if (range == ValueRange::Free) return img;
  const float lo = (range == ValueRange::Unit) ? 0.0f : -1.0f;
  ImageTensor out = img;
  out.range = range;
  for (float& v : out.data) v = std::clamp(v, lo, 1.0f);
  return out;
}

MaskImage::MaskImage(int h, int w, std::uint8_t fill) : height(h), width(w) {
  if (h < 1 || w < 1) {
    throw std::invalid_argument("MaskImage: dimensions must be >= 1");
  }
  if (fill > 1) {
    throw std::invalid_argument("MaskImage: fill must be 0 or 1");
  }
  data.assign(static_cast<std::size_t>(h) * w, fill);
}

std::size_t MaskImage::count_ones() const {
  std::size_t n = 0;
  for (auto v : data) n += v;
  return n;
}

void MaskImage::validate() const {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("MaskImage: dimensions must be >= 1");
  }
  if (data.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("MaskImage: data size does not match shape");
  }
  for (auto v : data) {
    if (v != 0 && v != 1) {
      throw std::invalid_argument("MaskImage: entries must be exactly 0 or 1");
    }
  }
}

ScoreMap::ScoreMap(int h, int w, float fill) : height(h), width(w) {
  if (h < 1 || w < 1) {
    throw std::invalid_argument("ScoreMap: dimensions must be >= 1");
  }
  data.assign(static_cast<std::size_t>(h) * w, fill);
}

ScoreMap resize_bilinear(const ScoreMap& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
  }
  if (out_h == src.height && out_w == src.width) return src;
  ScoreMap dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, src.height - 1);
    y0 = std::max(y0, 0);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, src.width - 1);
      x0 = std::max(x0, 0);
      double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
      double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
      dst.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return dst;
}

}  // namespace mdps
