// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mdps/denoiser.hpp"
#include "mdps/train.hpp"

namespace mdps {

/// Self-describing binary container: magic + versioned JSON header + raw
/// float32 tensor payload. Two kinds share the format: denoiser checkpoints
/// and feature-backbone weight bundles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  nn::Tensor tensor;
};

struct CheckpointInfo {
  std::uint32_t version = kCheckpointVersion;
  ArchDescriptor arch;
  int schedule_t_max = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  TrainConfig train;
  std::string category;
};

void save_denoiser_checkpoint(const std::string& path, TrainableDenoiser& model,
                              const CheckpointInfo& info);

/// Rebuilds the denoiser from the stored descriptor and weights. Refuses
/// unknown magic or header versions.
std::unique_ptr<TrainableDenoiser> load_denoiser_checkpoint(const std::string& path,
                                                            CheckpointInfo* info = nullptr);

struct WeightsBundle {
  std::string name;  // backbone identifier the bundle was converted for
  std::vector<NamedTensor> tensors;
};

void save_weights_bundle(const std::string& path, const WeightsBundle& bundle);
WeightsBundle load_weights_bundle(const std::string& path);

/// Lowercase hex SHA-256 digests.
std::string sha256_bytes(const void* data, std::size_t n);
std::string sha256_file(const std::string& path);

}  // namespace mdps
