// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "mdps/perception.hpp"
#include "mdps/sampler.hpp"

namespace mdps {

struct AnomalyResult {
  ScoreMap score_map;   // averaged pass-2 map
  double image_score = 0.0;
  MaskImage mask;       // the pass-1 generated mask
  std::optional<std::vector<ScoreMap>> per_sample_maps;  // pass-2 per-sample maps
};

/// Element-wise mean of same-shape maps. Double accumulation, so averaging k
/// copies of one map returns that map exactly.
ScoreMap average_score_map(const std::vector<ScoreMap>& maps);

/// Mean of the min(S, #pixels) largest entries; ties broken by (value desc,
/// index asc), deterministic.
double image_score(const ScoreMap& map, int top_s);

/// Pixel-count-aware default for S: 500 at 224x224 scale (>= 50176 pixels),
/// otherwise 1% of the pixels (at least 1).
int default_top_s(int height, int width);

/// Threshold mask: T_th = min + lambda (max - min), mask = (map > T_th),
/// strict inequality. A constant map yields an empty mask.
MaskImage generate_mask(const ScoreMap& map, double lambda);

struct DetectConfig {
  SamplerConfig sampler;
  DifferenceConfig difference;
  double lambda = 0.3;
  int top_s = 0;  // 0 = default_top_s rule
  bool keep_per_sample_maps = false;

  // ablation switches
  bool force_mask_all_ones = false;  // skip the learned mask, pass 2 uses m = 1
  void validate() const;
};

/// Two-pass MDPS detection for one test image:
///   pass 1: m = 1, N_s posterior samples, averaged difference map D1,
///           mask m = generate_mask(D1, lambda);
///   pass 2: rerun with the derived mask, averaged map D2, image score from
///           the top-S entries of D2.
/// Difference maps are computed in unit range. Pure given the rng seed; the
/// two passes use the child streams rng.split(1) and rng.split(2).
AnomalyResult detect(const ImageTensor& y, const Denoiser& model, const NoiseSchedule& schedule,
                     const FeatureBackbone& backbone, const DetectConfig& cfg, const Rng& rng);

}  // namespace mdps
