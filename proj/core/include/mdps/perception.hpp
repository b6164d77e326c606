// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mdps/tensor.hpp"

namespace mdps {

/// Multi-stage feature extractor. Stage maps come back ordered by stage with
/// strictly non-increasing resolution; extraction is deterministic.
class FeatureBackbone {
 public:
  virtual ~FeatureBackbone() = default;

  virtual std::vector<ImageTensor> extract(const ImageTensor& img) const = 0;
  virtual int stage_count() const = 0;
  virtual std::string name() const = 0;
};

struct DifferenceConfig {
  float eta = 1.0f;             // pixel-term weight
  std::vector<int> stages = {1, 2, 3};  // J, 1-based stage indices

  enum class Mode { Combined, PixelOnly, PerceptualOnly };
  Mode mode = Mode::Combined;

  void validate() const;
};

const char* difference_mode_name(DifferenceConfig::Mode mode);
DifferenceConfig::Mode difference_mode_from_name(const std::string& name);

/// Pixel + perceptual difference of two same-shape images. Per position k:
///   eta * ||y_k - x0_k||_1  (summed over channels)
///   + sum_{i in J} (1 - cos(F_i(x0)_k, F_i(y)_k))
/// Stage cosine-distance maps are computed at native resolution and
/// bilinearly upsampled to input size. Positions where either feature vector
/// has norm < 1e-12 contribute 0 (never NaN).
ScoreMap difference_map(const ImageTensor& x0, const ImageTensor& y,
                        const FeatureBackbone& backbone, const DifferenceConfig& cfg);

/// Deterministic fixed-weight 3-stage strided-conv backbone. No download, no
/// normalization; used by desk-scale tests and the synthetic benchmark.
std::unique_ptr<FeatureBackbone> make_toy_backbone(int in_channels = 3);

/// Single-stage backbone returning the raw pixels (test scaffolding).
std::unique_ptr<FeatureBackbone> make_identity_backbone();

/// ResNet-family backbone (stages 1-3) built from a converted weights bundle.
/// `name` selects the block layout: "resnet-101" or "wide-resnet-101".
/// Applies ImageNet normalization inside extract; expects unit-range input.
std::unique_ptr<FeatureBackbone> load_resnet_backbone(const std::string& name,
                                                      const std::string& weights_path);

// ---------------------------------------------------------------------------
// Pretrained-weight fetching (cache + digest verification)
// ---------------------------------------------------------------------------

/// Resolves the cache directory: explicit argument, else MDPS_CACHE_DIR, else
/// ~/.cache/mdps.
std::string resolve_cache_dir(const std::string& cache_dir);

/// Known backbone identifiers.
std::vector<std::string> known_backbones();

/// Constructs the named backbone, downloading and caching weights on first
/// use. Cache layout: <cache_dir>/<name>/<digest>.weights. Offline mode uses
/// the cache only. "toy" needs no weights. For the ResNet identifiers a
/// download URL must be provided via MDPS_WEIGHTS_URL_<NAME> (converted
/// bundle; see tools/convert_backbone.py) unless the cache is already warm.
std::unique_ptr<FeatureBackbone> fetch_pretrained(const std::string& backbone_name,
                                                  const std::string& cache_dir,
                                                  bool offline = false);

}  // namespace mdps
