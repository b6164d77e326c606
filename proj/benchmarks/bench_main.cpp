// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "mdps/ddim.hpp"
#include "mdps/eval.hpp"
#include "mdps/perception.hpp"
#include "mdps/sampler.hpp"
#include "mdps/scoring.hpp"
#include "mdps/train.hpp"

using namespace mdps;

namespace {

ImageTensor random_image(Rng& rng, int c, int s) {
  ImageTensor img(c, s, s, ValueRange::Free);
  for (auto& v : img.data) v = 0.5f * rng.normal_f();
  return img;
}

std::unique_ptr<TrainableDenoiser> bench_model(const std::string& backend, int side) {
  ArchDescriptor arch;
  arch.backend = backend;
  arch.base_channels = 32;
  (void)side;
  Rng rng(1);
  return make_denoiser(arch, rng);
}

void BM_DenoiserForward(benchmark::State& state, const std::string& backend) {
  const int side = static_cast<int>(state.range(0));
  auto model = bench_model(backend, side);
  Rng rng(2);
  ImageTensor x = random_image(rng, 3, side);
  for (auto _ : state) {
    ImageTensor eps = model->evaluate(x, 200);
    benchmark::DoNotOptimize(eps.data.data());
  }
}
BENCHMARK_CAPTURE(BM_DenoiserForward, compact, std::string("compact"))->Arg(64);
BENCHMARK_CAPTURE(BM_DenoiserForward, unet, std::string("unet"))->Arg(64);

void BM_GuidanceVjp(benchmark::State& state) {
  auto model = bench_model("compact", 64);
  Rng rng(3);
  ImageTensor x = random_image(rng, 3, 64);
  ImageTensor u = random_image(rng, 3, 64);
  for (auto _ : state) {
    ImageTensor g = model->input_vjp(x, 200, u);
    benchmark::DoNotOptimize(g.data.data());
  }
}
BENCHMARK(BM_GuidanceVjp);

void BM_MdpsSample(benchmark::State& state) {
  auto model = bench_model("compact", 64);
  NoiseSchedule schedule = build_schedule(1000, 1e-4, 0.02);
  Rng rng(4);
  ObservationModel obs;
  obs.y = random_image(rng, 3, 64);
  obs.m = MaskImage::ones(64, 64);
  SamplerConfig cfg;
  cfg.noise_level = 200;
  cfg.steps = 10;
  cfg.rho = 2.0;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng child(seed++);
    ImageTensor x0 = mdps_sample(obs, *model, schedule, cfg, child);
    benchmark::DoNotOptimize(x0.data.data());
  }
}
BENCHMARK(BM_MdpsSample)->Unit(benchmark::kMillisecond);

void BM_DifferenceMap(benchmark::State& state) {
  auto backbone = make_toy_backbone();
  Rng rng(5);
  ImageTensor a(3, 64, 64, ValueRange::Unit);
  ImageTensor b(3, 64, 64, ValueRange::Unit);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform());
  for (auto& v : b.data) v = static_cast<float>(rng.uniform());
  DifferenceConfig cfg;
  for (auto _ : state) {
    ScoreMap d = difference_map(a, b, *backbone, cfg);
    benchmark::DoNotOptimize(d.data.data());
  }
}
BENCHMARK(BM_DifferenceMap);

void BM_Auroc(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    scores[i] = rng.normal() + labels[i];
  }
  for (auto _ : state) {
    auto r = auroc(scores, labels);
    benchmark::DoNotOptimize(r.auroc);
  }
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n));
}
BENCHMARK(BM_Auroc)->Range(1 << 10, 1 << 18)->Complexity();

void BM_ImageScore(benchmark::State& state) {
  Rng rng(7);
  ScoreMap map(224, 224);
  for (auto& v : map.data) v = static_cast<float>(rng.uniform());
  for (auto _ : state) {
    benchmark::DoNotOptimize(image_score(map, 500));
  }
}
BENCHMARK(BM_ImageScore);

}  // namespace

BENCHMARK_MAIN();
