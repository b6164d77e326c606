// SPDX-License-Identifier: Apache-2.0
#include "mdps/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mdps/checkpoint.hpp"
#include "mdps/io.hpp"

namespace mdps {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

/// Creates a fresh run directory; timestamped unless a name is forced.
std::string make_run_dir(const std::string& output_dir, const std::string& command,
                         const std::string& tag, const std::string& run_name) {
  fs::path dir;
  if (!run_name.empty()) {
    dir = fs::path(output_dir) / run_name;
  } else {
    const std::string base = command + "-" + timestamp_now() + (tag.empty() ? "" : "-" + tag);
    dir = fs::path(output_dir) / base;
    for (int i = 2; fs::exists(dir); ++i) {
      dir = fs::path(output_dir) / (base + "-" + std::to_string(i));
    }
  }
  fs::create_directories(dir);
  return dir.string();
}

void write_manifest(const std::string& run_dir, const std::string& command, const RunConfig* cfg,
                    const std::string& checkpoint_path) {
  json m;
  m["command"] = command;
  m["created_utc"] = timestamp_now();
  if (cfg) {
    m["seed"] = cfg->seed;
    const std::string cfg_json = run_config_json(*cfg);
    m["config_sha256"] = sha256_bytes(cfg_json.data(), cfg_json.size());
    std::ofstream(fs::path(run_dir) / "config.json") << cfg_json;
  }
  if (!checkpoint_path.empty()) {
    m["checkpoint"] = checkpoint_path;
    m["checkpoint_sha256"] = sha256_file(checkpoint_path);
  }
  std::ofstream(fs::path(run_dir) / "manifest.json") << m.dump(2) << "\n";
}

std::string sanitize_id(std::string id) {
  for (auto& c : id) {
    if (c == '/' || c == '\\') c = '_';
  }
  return id;
}

std::unique_ptr<TrainableDenoiser> load_checkpoint_for(const RunConfig& cfg,
                                                       const std::string& checkpoint_path,
                                                       bool force) {
  CheckpointInfo info;
  auto model = load_denoiser_checkpoint(checkpoint_path, &info);
  if (info.schedule_t_max != cfg.schedule_t_max ||
      std::abs(info.beta_start - cfg.beta_start) > 1e-12 ||
      std::abs(info.beta_end - cfg.beta_end) > 1e-12) {
    throw std::runtime_error("checkpoint schedule (t_max=" + std::to_string(info.schedule_t_max) +
                             ") does not match the config schedule; refusing to detect");
  }
  if (info.category != cfg.dataset.category && !force) {
    throw std::runtime_error("checkpoint was trained for category '" + info.category +
                             "', config asks for '" + cfg.dataset.category +
                             "' (pass --force to override)");
  }
  return model;
}

double duration_s(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TrainOutput cmd_train(const RunConfig& cfg, const std::string& run_name) {
  cfg.validate();
  DatasetSpec spec = cfg.dataset;
  spec.split = Split::Train;
  std::vector<LabeledSample> samples = load_dataset(spec);
  std::vector<ImageTensor> images;
  images.reserve(samples.size());
  for (auto& s : samples) images.push_back(to_model_range(s.image));

  NoiseSchedule schedule = cfg.build_noise_schedule();
  Rng init_rng(mix_seed(cfg.seed, 0x1417));
  auto model = make_denoiser(cfg.arch, init_rng);

  TrainOutput out;
  out.run_dir = make_run_dir(cfg.output_dir, "train", cfg.dataset.category, run_name);
  const fs::path dir(out.run_dir);

  std::ofstream history(dir / "loss_history.csv");
  history << "epoch,mean_loss\n";
  Rng train_rng = Rng(cfg.seed).split(1);
  TrainResult result;
  try {
    result = train(*model, images, cfg.train, schedule, train_rng,
                   [&](int epoch, double loss) { history << epoch << ',' << loss << '\n'; });
  } catch (const TrainingDiverged& e) {
    for (std::size_t i = 0; i < e.epoch_loss.size(); ++i) {
      history << i << ',' << e.epoch_loss[i] << '\n';
    }
    throw;
  }

  out.checkpoint_path = (dir / "checkpoint.mdps").string();
  CheckpointInfo info;
  info.arch = cfg.arch;
  info.schedule_t_max = cfg.schedule_t_max;
  info.beta_start = cfg.beta_start;
  info.beta_end = cfg.beta_end;
  info.train = cfg.train;
  info.category = cfg.dataset.category;
  save_denoiser_checkpoint(out.checkpoint_path, *model, info);
  out.epoch_loss = std::move(result.epoch_loss);
  write_manifest(out.run_dir, "train", &cfg, out.checkpoint_path);
  return out;
}

DetectOutput cmd_detect(const RunConfig& cfg, const std::string& checkpoint_path, bool force,
                        const std::string& run_name) {
  cfg.validate();
  auto model = load_checkpoint_for(cfg, checkpoint_path, force);
  NoiseSchedule schedule = cfg.build_noise_schedule();
  auto backbone = fetch_pretrained(cfg.backbone_name, cfg.cache_dir, cfg.offline);

  DatasetSpec spec = cfg.dataset;
  spec.split = Split::Test;
  std::vector<LabeledSample> samples = load_dataset(spec);

  const auto start = std::chrono::steady_clock::now();
  DetectConfig dcfg = cfg.detect_config();
  std::vector<AnomalyResult> results =
      detect_all(samples, *model, schedule, *backbone, dcfg, Rng(cfg.seed));

  DetectOutput out;
  out.run_dir = make_run_dir(cfg.output_dir, "detect", cfg.dataset.category, run_name);
  const fs::path dir(out.run_dir);
  fs::create_directories(dir / "heatmaps");
  fs::create_directories(dir / "masks");

  const int resolved_s = cfg.top_s > 0 ? cfg.top_s
                                       : default_top_s(samples.front().image.height,
                                                       samples.front().image.width);
  std::ofstream scores(dir / "scores.jsonl");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string id = sanitize_id(samples[i].image_id);
    write_heatmap_png16((dir / "heatmaps" / (id + ".png")).string(), results[i].score_map);
    write_mask_png1((dir / "masks" / (id + ".png")).string(), results[i].mask);
    json rec;
    rec["image_id"] = samples[i].image_id;
    rec["image_score"] = results[i].image_score;
    rec["lambda"] = cfg.lambda;
    rec["S"] = resolved_s;
    rec["N_s"] = cfg.sampler.n_samples;
    rec["T"] = cfg.sampler.noise_level;
    rec["N"] = cfg.sampler.steps;
    rec["rho"] = cfg.sampler.rho;
    rec["seed"] = cfg.seed;
    scores << rec.dump() << "\n";
  }

  out.metrics = evaluate_run(results, samples);
  out.metrics.category = cfg.dataset.category;
  out.metrics.n_samples = cfg.sampler.n_samples;
  out.metrics.rho = cfg.sampler.rho;
  out.metrics.lambda = cfg.lambda;
  out.metrics.noise_level = cfg.sampler.noise_level;
  out.metrics.steps = cfg.sampler.steps;
  out.metrics.seed = cfg.seed;
  out.metrics.wall_time_s = duration_s(start);

  std::ofstream csv(dir / "metrics.csv");
  csv << metrics_csv_header() << "\n" << metrics_csv_row(out.metrics) << "\n";

  write_manifest(out.run_dir, "detect", &cfg, checkpoint_path);
  for (auto& s : samples) out.image_ids.push_back(s.image_id);
  out.results = std::move(results);
  return out;
}

EvaluateOutput cmd_evaluate(const std::string& results_dir, const std::string& output_dir,
                            const std::string& run_name) {
  if (!fs::exists(results_dir)) {
    throw std::runtime_error("results directory not found: " + results_dir);
  }
  std::vector<fs::path> csvs;
  for (const auto& de : fs::recursive_directory_iterator(results_dir)) {
    if (de.is_regular_file() && de.path().filename() == "metrics.csv") csvs.push_back(de.path());
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) {
    throw std::runtime_error("no metrics.csv found under " + results_dir);
  }

  std::vector<MetricsRecord> rows;
  for (const auto& p : csvs) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      MetricsRecord r;
      std::string field;
      std::getline(ss, r.category, ',');
      std::getline(ss, r.variant, ',');
      std::getline(ss, field, ',');
      r.image_auroc = std::stod(field);
      std::getline(ss, field, ',');
      r.pixel_auroc = std::stod(field);
      std::getline(ss, field, ',');
      r.n_samples = std::stoi(field);
      std::getline(ss, field, ',');
      r.rho = std::stod(field);
      std::getline(ss, field, ',');
      r.lambda = std::stod(field);
      std::getline(ss, field, ',');
      r.noise_level = std::stoi(field);
      std::getline(ss, field, ',');
      r.steps = std::stoi(field);
      std::getline(ss, field, ',');
      r.seed = std::stoull(field);
      std::getline(ss, field, ',');
      r.wall_time_s = std::stod(field);
      rows.push_back(std::move(r));
    }
  }

  // per-category average over "full" rows, plus the overall average row
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, int> counts;
  for (const auto& r : rows) {
    sums[r.category].first += r.image_auroc;
    sums[r.category].second += r.pixel_auroc;
    counts[r.category] += 1;
  }
  std::vector<MetricsRecord> table = rows;
  MetricsRecord avg;
  avg.category = "average";
  avg.variant = "average";
  for (const auto& [cat, s] : sums) {
    avg.image_auroc += s.first / counts[cat];
    avg.pixel_auroc += s.second / counts[cat];
  }
  avg.image_auroc /= static_cast<double>(sums.size());
  avg.pixel_auroc /= static_cast<double>(sums.size());
  table.push_back(avg);

  EvaluateOutput out;
  out.run_dir = make_run_dir(output_dir, "evaluate", "", run_name);
  std::ofstream csv(fs::path(out.run_dir) / "evaluation.csv");
  csv << metrics_csv_header() << "\n";
  for (const auto& r : table) csv << metrics_csv_row(r) << "\n";
  write_manifest(out.run_dir, "evaluate", nullptr, "");
  out.rows = std::move(table);
  return out;
}

AblateOutput cmd_ablate(const RunConfig& cfg, const AblationPlan& plan,
                        const std::string& checkpoint_path, bool force,
                        const std::string& run_name) {
  cfg.validate();
  plan.validate();
  auto model = load_checkpoint_for(cfg, checkpoint_path, force);
  NoiseSchedule schedule = cfg.build_noise_schedule();
  auto backbone = fetch_pretrained(cfg.backbone_name, cfg.cache_dir, cfg.offline);

  DatasetSpec spec = cfg.dataset;
  spec.split = Split::Test;
  std::vector<LabeledSample> samples = load_dataset(spec);

  AblateOutput out;
  out.rows = run_ablation(plan, samples, *model, schedule, *backbone, cfg.detect_config(),
                          cfg.seed, cfg.dataset.category);

  out.run_dir = make_run_dir(cfg.output_dir, "ablate", cfg.dataset.category, run_name);
  const fs::path dir(out.run_dir);
  std::ofstream csv(dir / "metrics.csv");
  csv << metrics_csv_header() << "\n";
  for (const auto& r : out.rows) csv << metrics_csv_row(r) << "\n";

  json mirror = json::array();
  for (const auto& r : out.rows) {
    mirror.push_back({{"category", r.category},
                      {"variant", r.variant},
                      {"image_auroc", r.image_auroc},
                      {"pixel_auroc", r.pixel_auroc},
                      {"N_s", r.n_samples},
                      {"rho", r.rho},
                      {"lambda", r.lambda},
                      {"T", r.noise_level},
                      {"N", r.steps},
                      {"seed", r.seed},
                      {"wall_time_s", r.wall_time_s}});
  }
  std::ofstream(dir / "metrics.json") << mirror.dump(2) << "\n";
  write_manifest(out.run_dir, "ablate", &cfg, checkpoint_path);
  return out;
}

std::string oracle_report_json(const std::vector<OracleReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j;
    j["y"] = r.y;
    j["rho"] = r.rho;
    j["T"] = r.noise_level;
    j["N"] = r.steps;
    j["side"] = r.side;
    j["n_samples"] = r.n_samples;
    j["seed"] = r.seed;
    j["prior_mean"] = r.prior_mean;
    j["prior_var"] = r.prior_var;
    if (std::isinf(r.heuristic_sigma2)) {
      j["heuristic_sigma2"] = "inf";
    } else {
      j["heuristic_sigma2"] = r.heuristic_sigma2;
    }
    j["posterior_mean"] = r.posterior_mean;
    j["posterior_var"] = r.posterior_var;
    j["empirical_mean"] = r.empirical_mean;
    j["empirical_var"] = r.empirical_var;
    j["prior_standard_error"] = r.prior_standard_error;
    j["dist_to_prior_mean"] = r.dist_to_prior_mean;
    j["dist_to_y"] = r.dist_to_y;
    j["dist_to_posterior_mean"] = r.dist_to_posterior_mean;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

OracleCheckOutput cmd_oracle_check(const RunConfig& cfg, const std::string& run_name) {
  NoiseSchedule schedule = cfg.build_noise_schedule();
  GaussianPrior prior;  // mu0 = 0, var0 = 1

  // Sampling the prior needs a start state of (nearly) pure noise, so the
  // oracle runs at T = t_max regardless of the detection-time T.
  SamplerConfig oc;
  oc.noise_level = cfg.schedule_t_max;
  oc.steps = 20;
  oc.n_samples = 1;
  oc.clamp_output = false;

  OracleCheckOutput out;
  const double y = 1.0;
  for (double rho : {0.0, 1.0, 10.0, 50.0}) {
    SamplerConfig c = oc;
    c.rho = rho;
    out.reports.push_back(oracle_check(prior, y, c, schedule, 2000, cfg.seed));
  }

  out.run_dir = make_run_dir(cfg.output_dir, "oracle-check", "", run_name);
  std::ofstream(fs::path(out.run_dir) / "oracle_report.json") << oracle_report_json(out.reports);
  write_manifest(out.run_dir, "oracle-check", &cfg, "");
  return out;
}

std::string cmd_synth(const RunConfig& cfg, int n_train, int n_test_normal, int n_test_anomalous,
                      int size) {
  SyntheticDataset data =
      generate_synthetic(cfg.seed, n_train, n_test_normal, n_test_anomalous, size);
  write_synthetic_layout(data, cfg.dataset.root);
  return (fs::path(cfg.dataset.root) / "synthetic").string();
}

AblationPlan load_ablation_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan: " + path);
  json j = json::parse(in);
  AblationPlan plan;
  plan.variants.clear();
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key == "variants") {
      plan.variants = item.value().get<std::vector<std::string>>();
    } else if (key == "rho_sweep") {
      plan.rho_sweep = item.value().get<std::vector<double>>();
    } else if (key == "ns_sweep") {
      plan.ns_sweep = item.value().get<std::vector<int>>();
    } else if (key == "lambda_sweep") {
      plan.lambda_sweep = item.value().get<std::vector<double>>();
    } else if (key == "metric_modes") {
      for (const auto& m : item.value()) {
        plan.metric_modes.push_back(difference_mode_from_name(m.get<std::string>()));
      }
    } else {
      throw std::invalid_argument("plan: unknown key '" + key + "'");
    }
  }
  plan.validate();
  return plan;
}

}  // namespace mdps
