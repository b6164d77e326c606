// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mdps/tensor.hpp"

namespace mdps {

/// Decodes a PNG/JPEG file into a unit-range RGB tensor (grayscale files are
/// expanded to 3 channels).
ImageTensor read_image(const std::string& path);

/// Reads a ground-truth mask image; nonzero (>127) pixels become 1.
MaskImage read_mask(const std::string& path);

/// 8-bit RGB PNG from a unit-range tensor.
void write_image_png(const std::string& path, const ImageTensor& img);

/// 16-bit grayscale PNG heatmap; values mapped linearly from [0, max(map)]
/// (all-zero maps write zeros).
void write_heatmap_png16(const std::string& path, const ScoreMap& map);

/// 1-bit grayscale PNG mask.
void write_mask_png1(const std::string& path, const MaskImage& mask);

}  // namespace mdps
