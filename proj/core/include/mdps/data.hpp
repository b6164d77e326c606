// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdps/rng.hpp"
#include "mdps/tensor.hpp"

namespace mdps {

enum class Split { Train, Test };

struct DatasetSpec {
  std::string root;
  std::string category;
  Split split = Split::Train;
  int resize = 256;
  std::optional<int> center_crop = 224;  // absent = resize only (BTAD-style)

  void validate() const;
};

enum class Label { Normal, Anomalous };

struct LabeledSample {
  ImageTensor image;  // unit range after preprocessing
  Label label = Label::Normal;
  MaskImage gt_mask;  // all-zeros for normal samples
  std::string image_id;
};

/// Loads the de-facto MVTec layout:
///   <root>/<category>/train/good/*
///   <root>/<category>/test/<defect>/*
///   <root>/<category>/ground_truth/<defect>/<stem>_mask.*
/// Ordering is lexicographic on the path relative to the category directory.
/// Images resize bilinearly then center-crop; masks resize nearest-neighbor,
/// crop, and re-binarize (>127 -> 1).
std::vector<LabeledSample> load_dataset(const DatasetSpec& spec);

/// Resize + optional center-crop used by the loader (bilinear for images).
ImageTensor preprocess_image(const ImageTensor& img, int resize, std::optional<int> center_crop);
MaskImage preprocess_mask(const MaskImage& mask, int resize, std::optional<int> center_crop);

struct SyntheticDataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

/// Seeded procedural benchmark: normal images are smoothed noise plus a
/// jittered periodic pattern; anomalous images add one of three defect types
/// (rectangles, scribbles, local color shifts) with exact ground-truth
/// masks covering >= 1 pixel and <= 25% of the image.
SyntheticDataset generate_synthetic(std::uint64_t seed, int n_train, int n_test_normal,
                                    int n_test_anomalous, int size);

/// Writes a synthetic dataset as the same MVTec layout (8-bit PNGs) so
/// downstream paths are exercised identically. Category name: "synthetic".
void write_synthetic_layout(const SyntheticDataset& data, const std::string& root);

}  // namespace mdps
