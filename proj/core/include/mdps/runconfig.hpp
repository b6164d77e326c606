// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "mdps/data.hpp"
#include "mdps/denoiser.hpp"
#include "mdps/perception.hpp"
#include "mdps/schedule.hpp"
#include "mdps/scoring.hpp"
#include "mdps/train.hpp"

namespace mdps {

/// Complete run configuration. Round-trips losslessly through its JSON file
/// form; unknown keys are rejected at load.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";

  DatasetSpec dataset;

  int schedule_t_max = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  TrainConfig train;  // t_max mirrors schedule_t_max
  ArchDescriptor arch;

  SamplerConfig sampler;
  DifferenceConfig difference;

  double lambda = 0.3;
  int top_s = 0;  // 0 = resolution-dependent default

  std::string backbone_name = "toy";
  std::string cache_dir;
  bool offline = false;
  bool trace = false;

  void validate() const;
  NoiseSchedule build_noise_schedule() const;
  DetectConfig detect_config() const;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

/// Canonical JSON form (used for config digests and round-trip checks).
std::string run_config_json(const RunConfig& cfg);
RunConfig parse_run_config_json(const std::string& text);

/// Paper-recipe defaults at full scale: linear beta 1e-4..0.02 over 1000
/// steps, T=200, N=10, rho=100, N_s=16, S=500 at 224x224, AdamW 1e-4/5e-2,
/// 2000 epochs, batch 8.
RunConfig default_run_config();

/// Desk-scale defaults for the synthetic benchmark (64x64, compact backend).
RunConfig synthetic_run_config();

}  // namespace mdps
