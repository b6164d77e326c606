// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdps/denoiser.hpp"
#include "mdps/schedule.hpp"

namespace mdps {

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double weight_decay = 5e-2;
  int t_max = 1000;

  void validate() const;
};

/// Thrown when the loss is non-finite for 3 consecutive steps; carries the
/// per-epoch history collected so far.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, std::vector<double> history)
      : std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step)),
        step_index(step),
        epoch_loss(std::move(history)) {}

  std::size_t step_index;
  std::vector<double> epoch_loss;
};

/// Denoising score-matching objective: t ~ U{1..t_max}, eps ~ N(0,I) per
/// image, mean squared error between eps and the prediction at
/// sqrt(a_t) x0 + sqrt(1-a_t) eps, averaged over every entry of the batch.
double training_loss(TrainableDenoiser& model, const std::vector<ImageTensor>& x0_batch,
                     const NoiseSchedule& schedule, Rng& rng);

struct TrainResult {
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// AdamW training over a normal-image collection. Deterministic given the
/// seed; batch items evaluate in parallel but noise draws are made serially
/// so results are schedule-independent.
TrainResult train(TrainableDenoiser& model, const std::vector<ImageTensor>& dataset,
                  const TrainConfig& config, const NoiseSchedule& schedule, Rng& rng,
                  const EpochCallback& on_epoch = nullptr);

}  // namespace mdps
