// SPDX-License-Identifier: Apache-2.0
#include "mdps/runconfig.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mdps {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  dataset.validate();
  if (schedule_t_max < 1) throw std::invalid_argument("config: schedule.t_max must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("config: need 0 < beta_start <= beta_end < 1");
  }
  train.validate();
  if (train.t_max != schedule_t_max) {
    throw std::invalid_argument("config: train.t_max must equal schedule.t_max");
  }
  difference.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("config: lambda must lie in [0,1]");
  }
  if (top_s < 0) throw std::invalid_argument("config: top_s must be >= 0");
  // sampler checked against the built schedule
  build_noise_schedule();
  SamplerConfig sc = sampler;
  sc.validate(build_noise_schedule());
}

NoiseSchedule RunConfig::build_noise_schedule() const {
  return build_schedule(schedule_t_max, beta_start, beta_end);
}

DetectConfig RunConfig::detect_config() const {
  DetectConfig cfg;
  cfg.sampler = sampler;
  cfg.difference = difference;
  cfg.lambda = lambda;
  cfg.top_s = top_s;
  return cfg;
}

std::string run_config_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"root", c.dataset.root},
                  {"category", c.dataset.category},
                  {"resize", c.dataset.resize}};
  if (c.dataset.center_crop) {
    j["dataset"]["center_crop"] = *c.dataset.center_crop;
  } else {
    j["dataset"]["center_crop"] = nullptr;
  }
  j["schedule"] = {{"t_max", c.schedule_t_max},
                   {"beta_start", c.beta_start},
                   {"beta_end", c.beta_end}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"weight_decay", c.train.weight_decay}};
  j["arch"] = {{"backend", c.arch.backend},
               {"in_channels", c.arch.in_channels},
               {"base_channels", c.arch.base_channels},
               {"time_embed_dim", c.arch.time_embed_dim},
               {"attention", c.arch.attention}};
  j["sampler"] = {{"T", c.sampler.noise_level},
                  {"N", c.sampler.steps},
                  {"rho", c.sampler.rho},
                  {"n_samples", c.sampler.n_samples},
                  {"restrict_loss_to_mask", c.sampler.restrict_loss_to_mask}};
  json stages = json::array();
  for (int s : c.difference.stages) stages.push_back(s);
  j["difference"] = {{"eta", c.difference.eta},
                     {"stages", stages},
                     {"mode", difference_mode_name(c.difference.mode)}};
  j["scoring"] = {{"lambda", c.lambda}, {"top_s", c.top_s}};
  j["backbone"] = {{"name", c.backbone_name}, {"cache_dir", c.cache_dir}, {"offline", c.offline}};
  j["trace"] = c.trace;
  return j.dump(2) + "\n";
}

RunConfig parse_run_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j,
             {"seed", "output_dir", "dataset", "schedule", "train", "arch", "sampler",
              "difference", "scoring", "backbone", "trace"},
             "top level");

  RunConfig c;
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, {"root", "category", "resize", "center_crop"}, "dataset");
    if (d.contains("root")) c.dataset.root = d["root"].get<std::string>();
    if (d.contains("category")) c.dataset.category = d["category"].get<std::string>();
    if (d.contains("resize")) c.dataset.resize = d["resize"].get<int>();
    if (d.contains("center_crop")) {
      if (d["center_crop"].is_null()) {
        c.dataset.center_crop.reset();
      } else {
        c.dataset.center_crop = d["center_crop"].get<int>();
      }
    }
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    check_keys(s, {"t_max", "beta_start", "beta_end"}, "schedule");
    if (s.contains("t_max")) c.schedule_t_max = s["t_max"].get<int>();
    if (s.contains("beta_start")) c.beta_start = s["beta_start"].get<double>();
    if (s.contains("beta_end")) c.beta_end = s["beta_end"].get<double>();
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, {"epochs", "batch_size", "learning_rate", "weight_decay"}, "train");
    if (t.contains("epochs")) c.train.epochs = t["epochs"].get<int>();
    if (t.contains("batch_size")) c.train.batch_size = t["batch_size"].get<int>();
    if (t.contains("learning_rate")) c.train.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("weight_decay")) c.train.weight_decay = t["weight_decay"].get<double>();
  }
  c.train.t_max = c.schedule_t_max;
  if (j.contains("arch")) {
    const auto& a = j["arch"];
    check_keys(a, {"backend", "in_channels", "base_channels", "time_embed_dim", "attention"},
               "arch");
    if (a.contains("backend")) c.arch.backend = a["backend"].get<std::string>();
    if (a.contains("in_channels")) c.arch.in_channels = a["in_channels"].get<int>();
    if (a.contains("base_channels")) c.arch.base_channels = a["base_channels"].get<int>();
    if (a.contains("time_embed_dim")) c.arch.time_embed_dim = a["time_embed_dim"].get<int>();
    if (a.contains("attention")) c.arch.attention = a["attention"].get<bool>();
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    check_keys(s, {"T", "N", "rho", "n_samples", "restrict_loss_to_mask"}, "sampler");
    if (s.contains("T")) c.sampler.noise_level = s["T"].get<int>();
    if (s.contains("N")) c.sampler.steps = s["N"].get<int>();
    if (s.contains("rho")) c.sampler.rho = s["rho"].get<double>();
    if (s.contains("n_samples")) c.sampler.n_samples = s["n_samples"].get<int>();
    if (s.contains("restrict_loss_to_mask")) {
      c.sampler.restrict_loss_to_mask = s["restrict_loss_to_mask"].get<bool>();
    }
  }
  if (j.contains("difference")) {
    const auto& d = j["difference"];
    check_keys(d, {"eta", "stages", "mode"}, "difference");
    if (d.contains("eta")) c.difference.eta = d["eta"].get<float>();
    if (d.contains("stages")) c.difference.stages = d["stages"].get<std::vector<int>>();
    if (d.contains("mode")) {
      c.difference.mode = difference_mode_from_name(d["mode"].get<std::string>());
    }
  }
  if (j.contains("scoring")) {
    const auto& s = j["scoring"];
    check_keys(s, {"lambda", "top_s"}, "scoring");
    if (s.contains("lambda")) c.lambda = s["lambda"].get<double>();
    if (s.contains("top_s")) c.top_s = s["top_s"].get<int>();
  }
  if (j.contains("backbone")) {
    const auto& b = j["backbone"];
    check_keys(b, {"name", "cache_dir", "offline"}, "backbone");
    if (b.contains("name")) c.backbone_name = b["name"].get<std::string>();
    if (b.contains("cache_dir")) c.cache_dir = b["cache_dir"].get<std::string>();
    if (b.contains("offline")) c.offline = b["offline"].get<bool>();
  }
  if (j.contains("trace")) c.trace = j["trace"].get<bool>();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config_json(text);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << run_config_json(cfg);
}

RunConfig default_run_config() {
  RunConfig c;
  c.dataset.root = "data/mvtec";
  c.dataset.category = "bottle";
  c.dataset.resize = 256;
  c.dataset.center_crop = 224;
  c.arch.backend = "unet";
  c.arch.base_channels = 64;
  c.arch.time_embed_dim = 128;
  c.sampler.n_samples = 16;
  c.top_s = 500;
  c.backbone_name = "wide-resnet-101";
  return c;
}

RunConfig synthetic_run_config() {
  RunConfig c;
  c.dataset.root = "data/synthetic";
  c.dataset.category = "synthetic";
  c.dataset.resize = 64;
  c.dataset.center_crop.reset();
  c.train.epochs = 240;
  c.train.batch_size = 8;
  c.train.learning_rate = 1e-3;
  c.train.weight_decay = 1e-2;
  c.arch.backend = "compact";
  c.arch.base_channels = 32;
  c.arch.time_embed_dim = 64;
  c.sampler.noise_level = 200;
  c.sampler.steps = 10;
  c.sampler.rho = 2.0;
  c.sampler.n_samples = 4;
  c.lambda = 0.3;
  c.top_s = 0;
  c.backbone_name = "toy";
  return c;
}

}  // namespace mdps
