// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mdps/eval.hpp"
#include "mdps/oracle.hpp"
#include "mdps/runconfig.hpp"

namespace mdps {

// Library-level command implementations behind the `mdps` CLI. Each creates
// an append-only run directory under cfg.output_dir (or `run_name` when
// given) holding its artifacts plus a manifest with the config digest, the
// checkpoint digest and the seed.

struct TrainOutput {
  std::string run_dir;
  std::string checkpoint_path;
  std::vector<double> epoch_loss;
};

TrainOutput cmd_train(const RunConfig& cfg, const std::string& run_name = "");

struct DetectOutput {
  std::string run_dir;
  MetricsRecord metrics;
  std::vector<AnomalyResult> results;
  std::vector<std::string> image_ids;
};

/// Refuses checkpoints whose schedule disagrees with the config, and
/// cross-category checkpoints unless `force`.
DetectOutput cmd_detect(const RunConfig& cfg, const std::string& checkpoint_path,
                        bool force = false, const std::string& run_name = "");

struct EvaluateOutput {
  std::string run_dir;
  std::vector<MetricsRecord> rows;  // per-category rows plus an average row
};

/// Aggregates metrics.csv records from one or more detect/ablate run
/// directories (searched recursively) into a per-category table.
EvaluateOutput cmd_evaluate(const std::string& results_dir, const std::string& output_dir = "runs",
                            const std::string& run_name = "");

struct AblateOutput {
  std::string run_dir;
  std::vector<MetricsRecord> rows;
};

AblateOutput cmd_ablate(const RunConfig& cfg, const AblationPlan& plan,
                        const std::string& checkpoint_path, bool force = false,
                        const std::string& run_name = "");

struct OracleCheckOutput {
  std::string run_dir;
  std::vector<OracleReport> reports;  // the rho grid {0, 1, 10, 50}
};

OracleCheckOutput cmd_oracle_check(const RunConfig& cfg, const std::string& run_name = "");

/// Writes the synthetic benchmark in MVTec layout under cfg.dataset.root.
std::string cmd_synth(const RunConfig& cfg, int n_train, int n_test_normal, int n_test_anomalous,
                      int size);

/// Loads an ablation plan JSON ({"variants": [...], "rho_sweep": [...],
/// "ns_sweep": [...], "lambda_sweep": [...], "metric_modes": [...]}).
AblationPlan load_ablation_plan(const std::string& path);

std::string oracle_report_json(const std::vector<OracleReport>& reports);

}  // namespace mdps
