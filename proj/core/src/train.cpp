// SPDX-License-Identifier: Apache-2.0
#include "mdps/train.hpp"

#include <cmath>
#include <numeric>

#include "mdps/nn/optim.hpp"
#include "mdps/parallel.hpp"

namespace mdps {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: bad learning_rate");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: bad weight_decay");
  if (t_max < 1) throw std::invalid_argument("TrainConfig: t_max must be >= 1");
}

double training_loss(TrainableDenoiser& model, const std::vector<ImageTensor>& x0_batch,
                     const NoiseSchedule& schedule, Rng& rng) {
  if (x0_batch.empty()) throw std::invalid_argument("training_loss: empty batch");
  double total = 0.0;
  std::size_t entries = 0;
  for (const auto& x0 : x0_batch) {
    const int t = static_cast<int>(rng.uniform_int(1, schedule.t_max));
    ImageTensor eps(x0.channels, x0.height, x0.width, ValueRange::Free);
    rng.fill_normal(eps.data.data(), eps.size());
    ImageTensor xt = combine_forward(x0, eps, schedule.alpha_bar(t));
    ImageTensor pred = model.evaluate(xt, t);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double d = static_cast<double>(pred.data[i]) - eps.data[i];
      total += d * d;
    }
    entries += eps.size();
  }
  return total / static_cast<double>(entries);
}

TrainResult train(TrainableDenoiser& model, const std::vector<ImageTensor>& dataset,
                  const TrainConfig& config, const NoiseSchedule& schedule, Rng& rng,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

  TrainResult result;
  if (config.epochs == 0) return result;

  auto params = model.parameters();
  nn::AdamW opt;
  opt.lr = config.learning_rate;
  opt.weight_decay = config.weight_decay;
  opt.init(params);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0;
  int consecutive_bad = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the run rng
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_sq = 0.0;
    std::size_t epoch_entries = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t n = std::min(order.size() - begin, static_cast<std::size_t>(config.batch_size));
      ++step;

      // Noise draws happen serially so results do not depend on scheduling.
      std::vector<int> ts(n);
      std::vector<ImageTensor> xts(n), epses(n);
      std::size_t batch_entries = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& x0 = dataset[order[begin + i]];
        ts[i] = static_cast<int>(rng.uniform_int(1, schedule.t_max));
        ImageTensor eps(x0.channels, x0.height, x0.width, ValueRange::Free);
        rng.fill_normal(eps.data.data(), eps.size());
        xts[i] = combine_forward(x0, eps, schedule.alpha_bar(ts[i]));
        epses[i] = std::move(eps);
        batch_entries += xts[i].size();
      }

      std::vector<GradBuffer> item_grads(n);
      std::vector<double> item_sq(n, 0.0);
      const float dscale = 2.0f / static_cast<float>(batch_entries);

      parallel_for(n, [&](std::size_t i) {
        auto ctx = model.forward_ctx(xts[i], ts[i]);
        ImageTensor d_eps(xts[i].channels, xts[i].height, xts[i].width, ValueRange::Free);
        double sq = 0.0;
        for (std::size_t j = 0; j < d_eps.size(); ++j) {
          const float diff = ctx->eps.data[j] - epses[i].data[j];
          d_eps.data[j] = dscale * diff;
          sq += static_cast<double>(diff) * diff;
        }
        item_sq[i] = sq;
        item_grads[i].init(params);
        model.backward_ctx(*ctx, d_eps, &item_grads[i], false);
      });

      double batch_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) batch_sq += item_sq[i];
      const double batch_loss = batch_sq / static_cast<double>(batch_entries);

      if (!std::isfinite(batch_loss)) {
        if (++consecutive_bad >= 3) throw TrainingDiverged(step, result.epoch_loss);
        continue;  // do not apply a poisoned step
      }
      consecutive_bad = 0;

      GradBuffer total = std::move(item_grads[0]);
      for (std::size_t i = 1; i < n; ++i) total.add(item_grads[i]);
      opt.step(params, total);

      epoch_sq += batch_sq;
      epoch_entries += batch_entries;
    }

    const double mean_loss =
        epoch_entries ? epoch_sq / static_cast<double>(epoch_entries)
                      : std::numeric_limits<double>::quiet_NaN();
    result.epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return result;
}

}  // namespace mdps
