// SPDX-License-Identifier: Apache-2.0
#include "mdps/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mdps {

ScoreMap average_score_map(const std::vector<ScoreMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("average_score_map: empty list");
  const int h = maps.front().height, w = maps.front().width;
  std::vector<double> acc(static_cast<std::size_t>(h) * w, 0.0);
  for (const auto& m : maps) {
    if (m.height != h || m.width != w) {
      throw std::invalid_argument("average_score_map: shape mismatch");
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m.data[i];
  }
  ScoreMap out(h, w);
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i] * inv);
  return out;
}

double image_score(const ScoreMap& map, int top_s) {
  if (top_s < 1) throw std::invalid_argument("image_score: S must be >= 1");
  const std::size_t n = map.size();
  const std::size_t s = std::min(static_cast<std::size_t>(top_s), n);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s), idx.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (map.data[a] != map.data[b]) return map.data[a] > map.data[b];
                      return a < b;
                    });
  double sum = 0.0;
  for (std::size_t i = 0; i < s; ++i) sum += map.data[idx[i]];
  return sum / static_cast<double>(s);
}

int default_top_s(int height, int width) {
  const long pixels = static_cast<long>(height) * width;
  if (pixels >= 50176) return 500;
  return std::max(1L, std::lround(0.01 * static_cast<double>(pixels)));
}

MaskImage generate_mask(const ScoreMap& map, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("generate_mask: lambda must lie in [0,1]");
  }
  float lo = map.data[0], hi = map.data[0];
  for (float v : map.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double threshold = lo + lambda * (static_cast<double>(hi) - lo);
  MaskImage mask(map.height, map.width, 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    mask.data[i] = map.data[i] > threshold ? 1 : 0;
  }
  return mask;
}

void DetectConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("DetectConfig: lambda must lie in [0,1]");
  }
  if (top_s < 0) throw std::invalid_argument("DetectConfig: S must be >= 0 (0 = auto)");
  difference.validate();
}

namespace {

std::vector<ScoreMap> difference_maps(const std::vector<ImageTensor>& samples,
                                      const ImageTensor& y_unit, const FeatureBackbone& backbone,
                                      const DifferenceConfig& cfg) {
  std::vector<ScoreMap> maps(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    maps[i] = difference_map(to_unit_range(samples[i]), y_unit, backbone, cfg);
  }
  return maps;
}

}  // namespace

AnomalyResult detect(const ImageTensor& y, const Denoiser& model, const NoiseSchedule& schedule,
                     const FeatureBackbone& backbone, const DetectConfig& cfg, const Rng& rng) {
  cfg.validate();
  const ImageTensor y_model = y.range == ValueRange::Unit ? to_model_range(y) : y;
  const ImageTensor y_unit = to_unit_range(y_model);

  ObservationModel obs;
  obs.y = y_model;
  obs.m = MaskImage::ones(y.height, y.width);

  // Pass 1: every pixel treated as suspect.
  Rng pass1 = rng.split(1);
  std::vector<ImageTensor> samples1 = mdps_sample_many(obs, model, schedule, cfg.sampler, pass1);
  ScoreMap d1 = average_score_map(difference_maps(samples1, y_unit, backbone, cfg.difference));

  MaskImage mask = cfg.force_mask_all_ones ? MaskImage::ones(y.height, y.width)
                                           : generate_mask(d1, cfg.lambda);

  // Pass 2: trusted pixels pinned to y.
  obs.m = mask;
  Rng pass2 = rng.split(2);
  std::vector<ImageTensor> samples2 = mdps_sample_many(obs, model, schedule, cfg.sampler, pass2);
  std::vector<ScoreMap> maps2 = difference_maps(samples2, y_unit, backbone, cfg.difference);

  AnomalyResult result;
  result.score_map = average_score_map(maps2);
  const int s = cfg.top_s > 0 ? cfg.top_s : default_top_s(y.height, y.width);
  result.image_score = image_score(result.score_map, s);
  result.mask = std::move(mask);
  if (cfg.keep_per_sample_maps) result.per_sample_maps = std::move(maps2);
  return result;
}

}  // namespace mdps
