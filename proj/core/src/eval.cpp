// SPDX-License-Identifier: Apache-2.0
#include "mdps/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mdps/parallel.hpp"

namespace mdps {

RocResult auroc(const std::vector<double>& scores, const std::vector<int>& labels,
                bool with_curve) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
  RocResult r;
  for (int l : labels) {
    if (l == 1) {
      ++r.n_pos;
    } else if (l == 0) {
      ++r.n_neg;
    } else {
      throw std::invalid_argument("auroc: labels must be 0 or 1");
    }
  }
  if (r.n_pos == 0 || r.n_neg == 0) {
    throw std::invalid_argument("auroc: undefined for single-class input (n_pos=" +
                                std::to_string(r.n_pos) + ", n_neg=" + std::to_string(r.n_neg) +
                                ")");
  }

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // doubled rank sums stay integral under midrank ties
  std::int64_t pos_rank2 = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const std::int64_t rank2 = static_cast<std::int64_t>(i + 1) + static_cast<std::int64_t>(j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) pos_rank2 += rank2;
    }
    i = j;
  }
  const std::int64_t np = static_cast<std::int64_t>(r.n_pos);
  const std::int64_t nn = static_cast<std::int64_t>(r.n_neg);
  const std::int64_t numerator2 = pos_rank2 - np * (np + 1);
  r.auroc = static_cast<double>(numerator2) / static_cast<double>(2 * np * nn);

  if (with_curve) {
    r.curve.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = idx.size(); k > 0;) {
      const double v = scores[idx[k - 1]];
      while (k > 0 && scores[idx[k - 1]] == v) {
        if (labels[idx[k - 1]] == 1) {
          ++tp;
        } else {
          ++fp;
        }
        --k;
      }
      r.curve.emplace_back(static_cast<double>(fp) / static_cast<double>(nn),
                           static_cast<double>(tp) / static_cast<double>(np));
    }
  }
  return r;
}

double auroc_bucketed(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels,
                      int buckets) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc_bucketed: size mismatch");
  if (buckets < 2) throw std::invalid_argument("auroc_bucketed: need >= 2 buckets");
  float lo = scores[0], hi = scores[0];
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    lo = std::min(lo, scores[k]);
    hi = std::max(hi, scores[k]);
    if (labels[k]) {
      ++n_pos;
    } else {
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auroc_bucketed: undefined for single-class input");
  }
  std::vector<std::uint64_t> pos(static_cast<std::size_t>(buckets), 0);
  std::vector<std::uint64_t> neg(static_cast<std::size_t>(buckets), 0);
  const double span = static_cast<double>(hi) - lo;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    int b = span > 0.0
                ? static_cast<int>((static_cast<double>(scores[k]) - lo) / span * (buckets - 1))
                : 0;
    b = std::clamp(b, 0, buckets - 1);
    if (labels[k]) {
      ++pos[static_cast<std::size_t>(b)];
    } else {
      ++neg[static_cast<std::size_t>(b)];
    }
  }
  // pair counting by buckets, ascending; within-bucket ties at half credit
  double num = 0.0;
  std::uint64_t neg_below = 0;
  for (int b = 0; b < buckets; ++b) {
    num += static_cast<double>(pos[static_cast<std::size_t>(b)]) *
           (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg[static_cast<std::size_t>(b)]));
    neg_below += neg[static_cast<std::size_t>(b)];
  }
  return num / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsRecord evaluate_run(const std::vector<AnomalyResult>& results,
                           const std::vector<LabeledSample>& samples, PixelAurocMode pixel_mode) {
  if (results.size() != samples.size() || results.empty()) {
    throw std::invalid_argument("evaluate_run: results/samples mismatch");
  }
  std::vector<double> image_scores;
  std::vector<int> image_labels;
  std::vector<float> pixel_scores;
  std::vector<std::uint8_t> pixel_labels;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& res = results[i];
    const auto& s = samples[i];
    if (res.score_map.height != s.gt_mask.height || res.score_map.width != s.gt_mask.width) {
      throw std::invalid_argument("evaluate_run: score map / mask shape mismatch for " +
                                  s.image_id);
    }
    image_scores.push_back(res.image_score);
    image_labels.push_back(s.label == Label::Anomalous ? 1 : 0);
    pixel_scores.insert(pixel_scores.end(), res.score_map.data.begin(), res.score_map.data.end());
    pixel_labels.insert(pixel_labels.end(), s.gt_mask.data.begin(), s.gt_mask.data.end());
  }

  MetricsRecord rec;
  rec.image_auroc = auroc(image_scores, image_labels).auroc;
  if (pixel_mode == PixelAurocMode::Bucketed) {
    rec.pixel_auroc = auroc_bucketed(pixel_scores, pixel_labels);
  } else {
    std::vector<double> ps(pixel_scores.begin(), pixel_scores.end());
    std::vector<int> pl(pixel_labels.begin(), pixel_labels.end());
    rec.pixel_auroc = auroc(ps, pl).auroc;
  }
  return rec;
}

std::string metrics_csv_header() {
  return "category,variant,image_auroc,pixel_auroc,N_s,rho,lambda,T,N,seed,wall_time_s";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << r.category << ',' << r.variant << ',' << r.image_auroc << ',' << r.pixel_auroc << ','
     << r.n_samples << ',' << r.rho << ',' << r.lambda << ',' << r.noise_level << ',' << r.steps
     << ',' << r.seed << ',' << r.wall_time_s;
  return os.str();
}

// ---------------------------------------------------------------------------
// Ablation runner
// ---------------------------------------------------------------------------

void AblationPlan::validate() const {
  static const char* known[] = {"full", "vanilla_ddim", "no_mask", "no_posterior"};
  for (const auto& v : variants) {
    bool ok = false;
    for (const char* k : known) ok = ok || v == k;
    if (!ok) throw std::invalid_argument("AblationPlan: unknown variant '" + v + "'");
  }
}

std::vector<AnomalyResult> detect_all(const std::vector<LabeledSample>& samples,
                                      const Denoiser& model, const NoiseSchedule& schedule,
                                      const FeatureBackbone& backbone, const DetectConfig& cfg,
                                      const Rng& rng) {
  std::vector<AnomalyResult> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = detect(samples[i].image, model, schedule, backbone, cfg, rng.split(i));
  });
  return out;
}

namespace {

MetricsRecord run_variant(const std::string& variant, const std::vector<LabeledSample>& test_set,
                          const Denoiser& model, const NoiseSchedule& schedule,
                          const FeatureBackbone& backbone, const DetectConfig& cfg,
                          std::uint64_t seed, const std::string& category) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<AnomalyResult> results =
      detect_all(test_set, model, schedule, backbone, cfg, Rng(seed));
  MetricsRecord rec = evaluate_run(results, test_set);
  rec.category = category;
  rec.variant = variant;
  rec.n_samples = cfg.sampler.n_samples;
  rec.rho = cfg.sampler.rho;
  rec.lambda = cfg.lambda;
  rec.noise_level = cfg.sampler.noise_level;
  rec.steps = cfg.sampler.steps;
  rec.seed = seed;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

std::vector<MetricsRecord> run_ablation(const AblationPlan& plan,
                                        const std::vector<LabeledSample>& test_set,
                                        const Denoiser& model, const NoiseSchedule& schedule,
                                        const FeatureBackbone& backbone,
                                        const DetectConfig& base_cfg, std::uint64_t seed,
                                        const std::string& category) {
  plan.validate();
  std::vector<std::string> variants = plan.variants;
  if (std::find(variants.begin(), variants.end(), "full") == variants.end()) {
    variants.insert(variants.begin(), "full");  // baseline reference always present
  }

  std::vector<MetricsRecord> records;
  auto run = [&](const std::string& name, const DetectConfig& cfg) {
    records.push_back(run_variant(name, test_set, model, schedule, backbone, cfg, seed, category));
  };

  for (const auto& v : variants) {
    DetectConfig cfg = base_cfg;
    if (v == "vanilla_ddim") {
      cfg.force_mask_all_ones = true;
      cfg.sampler.rho = 0.0;
    } else if (v == "no_mask") {
      cfg.force_mask_all_ones = true;
    } else if (v == "no_posterior") {
      cfg.sampler.rho = 0.0;
    }
    run(v, cfg);
  }
  for (double rho : plan.rho_sweep) {
    DetectConfig cfg = base_cfg;
    cfg.sampler.rho = rho;
    run("rho=" + std::to_string(rho), cfg);
  }
  for (int ns : plan.ns_sweep) {
    DetectConfig cfg = base_cfg;
    cfg.sampler.n_samples = ns;
    run("ns=" + std::to_string(ns), cfg);
  }
  for (double lambda : plan.lambda_sweep) {
    DetectConfig cfg = base_cfg;
    cfg.lambda = lambda;
    run("lambda=" + std::to_string(lambda), cfg);
  }
  for (auto mode : plan.metric_modes) {
    DetectConfig cfg = base_cfg;
    cfg.difference.mode = mode;
    run(std::string("metric=") + difference_mode_name(mode), cfg);
  }
  return records;
}

}  // namespace mdps
