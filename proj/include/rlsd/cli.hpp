/*
 * Copyright 2026 The RLSD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RLSD_CLI_HPP_
#define RLSD_CLI_HPP_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rlsd/checkpoint.hpp"
#include "rlsd/config.hpp"
#include "rlsd/metrics.hpp"
#include "rlsd/models.hpp"
#include "rlsd/synthdata.hpp"
#include "rlsd/trainer.hpp"

namespace rlsd {

// Desk defaults; every key here may be overridden by --config files and --set.
Config default_config();

ModelConfig model_config_from(const Config& cfg, std::size_t num_labels);
// train.<stage>.<key> wins over train.<key>. Stages: backbone, localizer,
// lstm, rlsd, rlsd-ft-rpn.
TrainConfig train_config_from(const Config& cfg, const std::string& stage);

SceneSpec scene_spec_for(std::size_t num_classes, std::uint64_t seed);

// One trained model of any kind, as rebuilt from a checkpoint.
class TrainedModel {
 public:
  TrainedModel(ModelKind kind, const ModelConfig& config, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  ParamSet params() const;
  std::vector<double> predict(const Tensor& image) const;

  const MultiCnn& multi_cnn() const { return *multi_cnn_; }
  const CnnLstm& cnn_lstm() const { return *cnn_lstm_; }
  const RlsdModel& rlsd() const { return *rlsd_; }
  bool has_localizer() const { return rlsd_ != nullptr; }

 private:
  ModelKind kind_;
  ModelConfig config_;
  std::unique_ptr<MultiCnn> multi_cnn_;
  std::unique_ptr<CnnLstm> cnn_lstm_;
  std::unique_ptr<RlsdModel> rlsd_;
};

struct TrainResult {
  std::string checkpoint_bytes;
  TrainLog log;  // last stage
  std::vector<std::pair<std::string, TrainLog>> stages;
  double proposal_recall = -1.0;  // rlsd kinds only
};

// Runs every stage of one regime and returns the encoded checkpoint.
TrainResult train_model(ModelKind kind, const Dataset& data, const Config& cfg,
                        std::ostream* progress);
// Several regimes from one run of the shared stages. Each result is
// bit-identical to train_model for that kind. Results follow pipeline order.
std::vector<std::pair<ModelKind, TrainResult>> train_regimes(
    std::span<const ModelKind> kinds, const Dataset& data, const Config& cfg,
    std::ostream* progress);

TrainedModel model_from_checkpoint(const Checkpoint& ckpt, const std::string& origin);
TrainedModel load_model(const std::filesystem::path& checkpoint);

std::string loss_csv(const TrainLog& log);

struct EvalOptions {
  std::size_t k = 3;
  double threshold = 0.5;
  std::vector<std::string> pr_classes;
  bool recall_area = false;
};

struct EvalOutput {
  MetricsReport report;
  std::string json;
  std::vector<std::pair<std::string, std::string>> curves;  // file suffix, CSV
};

// Scores are taken from the records; class names resolve --pr-class.
EvalOutput evaluate(std::span<const EvalRecord> records,
                    std::span<const std::string> class_names,
                    std::span<const std::size_t> small_classes,
                    const EvalOptions& options, const std::string& extra_json = "{}");

std::string proposals_json(std::span<const ScoredBox> proposals);

std::string plot_svg(const std::string& csv, const std::string& title);

// Full command line, argv[0] excluded. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rlsd

#endif  // RLSD_CLI_HPP_
