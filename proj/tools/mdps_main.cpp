// SPDX-License-Identifier: Apache-2.0
//
// mdps — masked diffusion posterior sampling for unsupervised anomaly
// detection. Subcommands: train, detect, evaluate, ablate, oracle-check,
// synth. Every command exits 0 on success and prints a single-line JSON
// error to stderr otherwise.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>

#include "mdps/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::int64_t seed = -1;
  std::string output_dir;
  bool offline = false;
  std::string run_name;
};

void add_common(CLI::App* app, CommonArgs* args, bool config_required = true) {
  auto* opt = app->add_option("--config", args->config_path, "run configuration JSON");
  if (config_required) opt->required();
  app->add_option("--seed", args->seed, "override the config seed");
  app->add_option("--output", args->output_dir, "override the output directory");
  app->add_flag("--offline", args->offline, "use only cached backbone weights");
  app->add_option("--run-name", args->run_name, "fixed run-directory name (default: timestamped)");
}

mdps::RunConfig resolve_config(const CommonArgs& args) {
  mdps::RunConfig cfg =
      args.config_path.empty() ? mdps::synthetic_run_config() : mdps::load_run_config(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (args.offline) cfg.offline = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked diffusion posterior sampling for unsupervised anomaly detection"};
  app.require_subcommand(1);

  CommonArgs train_args, detect_args, ablate_args, oracle_args, synth_args;
  std::string checkpoint, results_dir, plan_path;
  bool force = false;
  std::string eval_output = "runs", eval_run_name;
  int synth_train = 100, synth_test_normal = 16, synth_test_anomalous = 24, synth_size = 64;

  auto* c_train = app.add_subcommand("train", "train a denoiser on the normal split");
  add_common(c_train, &train_args);

  auto* c_detect = app.add_subcommand("detect", "two-pass MDPS detection over the test split");
  add_common(c_detect, &detect_args);
  c_detect->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  c_detect->add_flag("--force", force, "allow a cross-category checkpoint");

  auto* c_eval = app.add_subcommand("evaluate", "aggregate metrics from run directories");
  c_eval->add_option("--results", results_dir, "directory holding detect/ablate runs")->required();
  c_eval->add_option("--output", eval_output, "output directory");
  c_eval->add_option("--run-name", eval_run_name, "fixed run-directory name");

  auto* c_ablate = app.add_subcommand("ablate", "variant/sweep matrix on the test split");
  add_common(c_ablate, &ablate_args);
  c_ablate->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  c_ablate->add_option("--plan", plan_path, "ablation plan JSON (default: variants only)");
  c_ablate->add_flag("--force", force, "allow a cross-category checkpoint");

  auto* c_oracle = app.add_subcommand("oracle-check", "closed-form Gaussian sampler verification");
  add_common(c_oracle, &oracle_args, /*config_required=*/false);

  auto* c_synth = app.add_subcommand("synth", "generate the synthetic benchmark (MVTec layout)");
  add_common(c_synth, &synth_args, /*config_required=*/false);
  c_synth->add_option("--train-count", synth_train, "normal training images");
  c_synth->add_option("--test-normal", synth_test_normal, "normal test images");
  c_synth->add_option("--test-anomalous", synth_test_anomalous, "anomalous test images");
  c_synth->add_option("--size", synth_size, "image side length");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_train->parsed()) {
      auto out = mdps::cmd_train(resolve_config(train_args), train_args.run_name);
      std::cout << "run_dir: " << out.run_dir << "\ncheckpoint: " << out.checkpoint_path << "\n";
      if (!out.epoch_loss.empty()) {
        std::cout << "first_epoch_loss: " << out.epoch_loss.front()
                  << "\nfinal_epoch_loss: " << out.epoch_loss.back() << "\n";
      }
    } else if (c_detect->parsed()) {
      auto out = mdps::cmd_detect(resolve_config(detect_args), checkpoint, force,
                                  detect_args.run_name);
      std::cout << "run_dir: " << out.run_dir << "\nimage_auroc: " << out.metrics.image_auroc
                << "\npixel_auroc: " << out.metrics.pixel_auroc << "\n";
    } else if (c_eval->parsed()) {
      auto out = mdps::cmd_evaluate(results_dir, eval_output, eval_run_name);
      std::cout << "run_dir: " << out.run_dir << "\n" << mdps::metrics_csv_header() << "\n";
      for (const auto& r : out.rows) std::cout << mdps::metrics_csv_row(r) << "\n";
    } else if (c_ablate->parsed()) {
      mdps::AblationPlan plan;
      if (!plan_path.empty()) plan = mdps::load_ablation_plan(plan_path);
      auto out = mdps::cmd_ablate(resolve_config(ablate_args), plan, checkpoint, force,
                                  ablate_args.run_name);
      std::cout << "run_dir: " << out.run_dir << "\n" << mdps::metrics_csv_header() << "\n";
      for (const auto& r : out.rows) std::cout << mdps::metrics_csv_row(r) << "\n";
    } else if (c_oracle->parsed()) {
      auto out = mdps::cmd_oracle_check(resolve_config(oracle_args), oracle_args.run_name);
      std::cout << "run_dir: " << out.run_dir << "\n" << mdps::oracle_report_json(out.reports);
    } else if (c_synth->parsed()) {
      mdps::RunConfig cfg = resolve_config(synth_args);
      std::string dir =
          mdps::cmd_synth(cfg, synth_train, synth_test_normal, synth_test_anomalous, synth_size);
      std::cout << "dataset: " << dir << "\n";
    }
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
