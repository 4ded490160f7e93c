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

#include "rlsd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rlsd/checkpoint.hpp"

namespace rlsd {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kDefaults = R"(seed=1
data.classes=12
data.train=2000
data.test=500
model.t_max=0
model.proposals=32
model.grid=7
model.feature=256
model.encoder_hidden=256
model.embed=64
model.hidden=128
model.dropout=0
model.head_channels=64
model.nms=0.7
cluster.cutoff=0.3
localizer.init_from_backbone=true
train.momentum=0.9
train.weight_decay=0
train.batch=8
train.m=64
train.lr_decay=1
train.lr_decay_every=0
train.backbone.lr=0.05
train.backbone.epochs=12
train.localizer.lr=0.01
train.localizer.epochs=4
train.lstm.lr=0.01
train.lstm.epochs=24
train.rlsd.lr=0.05
train.rlsd.epochs=7
train.rlsd-ft-rpn.lr=0.05
train.rlsd-ft-rpn.epochs=7
)";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::uint64_t stage_seed(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return Rng::derive(seed, h);
}

// Mirrors the config into the snapshot with the resolved model keys.
std::string snapshot(const Config& cfg, ModelKind kind, const ModelConfig& mc) {
  Config out = cfg;
  out.set("model.kind", model_kind_name(kind));
  out.set("model.num_labels", std::to_string(mc.num_labels));
  out.set("model.t_max", std::to_string(mc.t_max));
  return out.text();
}

}  // namespace

Config default_config() { return Config::parse(kDefaults, "defaults"); }

ModelConfig model_config_from(const Config& cfg, std::size_t num_labels) {
  ModelConfig mc;
  mc.num_labels = num_labels;
  mc.grid = cfg.get_size("model.grid", mc.grid);
  mc.feature = cfg.get_size("model.feature", mc.feature);
  mc.encoder_hidden = cfg.get_size("model.encoder_hidden", mc.encoder_hidden);
  mc.embed = cfg.get_size("model.embed", mc.embed);
  mc.hidden = cfg.get_size("model.hidden", mc.hidden);
  mc.dropout = cfg.get_double("model.dropout", mc.dropout);
  mc.proposals = cfg.get_size("model.proposals", mc.proposals);
  mc.t_max = cfg.get_size("model.t_max", mc.t_max);
  mc.localizer.head_channels = cfg.get_size("model.head_channels", mc.localizer.head_channels);
  mc.localizer.nms_threshold = cfg.get_double("model.nms", mc.localizer.nms_threshold);
  if (num_labels == 0) throw std::invalid_argument("model needs at least one label");
  if (mc.proposals == 0) throw std::invalid_argument("model.proposals must be >= 1");
  if (!(mc.dropout >= 0.0 && mc.dropout < 1.0)) {
    throw std::invalid_argument("model.dropout must be in [0,1)");
  }
  return mc;
}

TrainConfig train_config_from(const Config& cfg, const std::string& stage) {
  auto key = [&](const std::string& k) {
    const std::string specific = "train." + stage + "." + k;
    return cfg.has(specific) ? specific : "train." + k;
  };
  TrainConfig tc;
  tc.lr = cfg.get_double(key("lr"), tc.lr);
  tc.momentum = cfg.get_double(key("momentum"), tc.momentum);
  tc.weight_decay = cfg.get_double(key("weight_decay"), tc.weight_decay);
  tc.epochs = cfg.get_size(key("epochs"), tc.epochs);
  tc.batch = cfg.get_size(key("batch"), tc.batch);
  tc.m = cfg.get_size(key("m"), tc.m);
  tc.lr_decay = cfg.get_double(key("lr_decay"), tc.lr_decay);
  tc.lr_decay_every = cfg.get_size(key("lr_decay_every"), tc.lr_decay_every);
  tc.seed = stage_seed(cfg.get_u64("seed", 1), stage);
  tc.validate();
  return tc;
}

SceneSpec scene_spec_for(std::size_t num_classes, std::uint64_t seed) {
  SceneSpec s = SceneSpec::desk(seed);
  if (num_classes == s.num_classes) return s;
  if (num_classes == 0 || num_classes > s.num_classes) {
    throw std::invalid_argument("--classes must be in [1, " +
                                std::to_string(s.num_classes) + "], got " +
                                std::to_string(num_classes));
  }
  s.num_classes = num_classes;
  s.cooccurrence.resize(num_classes);
  for (auto& row : s.cooccurrence) row.resize(num_classes);
  std::erase_if(s.small_classes, [&](std::size_t c) { return c >= num_classes; });
  s.validate();
  return s;
}

TrainedModel::TrainedModel(ModelKind kind, const ModelConfig& config,
                           std::uint64_t seed)
    : kind_(kind), config_(config) {
  Rng rng(stage_seed(seed, "init." + model_kind_name(kind)));
  switch (kind) {
    case ModelKind::kMultiCnn:
      multi_cnn_ = std::make_unique<MultiCnn>(config.backbone, config.num_labels, rng);
      break;
    case ModelKind::kCnnLstm:
      cnn_lstm_ = std::make_unique<CnnLstm>(config, rng);
      break;
    case ModelKind::kRlsd:
    case ModelKind::kRlsdFtRpn:
      rlsd_ = std::make_unique<RlsdModel>(config, rng);
      break;
  }
}

ParamSet TrainedModel::params() const {
  if (multi_cnn_) return multi_cnn_->params();
  if (cnn_lstm_) return cnn_lstm_->params();
  return rlsd_->params();
}

std::vector<double> TrainedModel::predict(const Tensor& image) const {
  if (multi_cnn_) {
    Tape tape(false);
    const Tensor s = multi_cnn_->forward(tape, image);
    return {s.data().begin(), s.data().end()};
  }
  if (cnn_lstm_) return cnn_lstm_->predict(image);
  return rlsd_->predict(image);
}

std::vector<std::pair<ModelKind, TrainResult>> train_regimes(
    std::span<const ModelKind> kinds, const Dataset& data, const Config& cfg,
    std::ostream* progress) {
  if (data.train.empty()) throw std::invalid_argument("train: dataset has no train split");
  auto wanted = [&kinds](ModelKind k) {
    return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
  };
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  ModelConfig mc = model_config_from(cfg, data.num_labels());
  if (mc.t_max == 0) mc.t_max = horizon_for(data.train);
  const double cutoff = cfg.get_double("cluster.cutoff", 0.3);
  if (wanted(ModelKind::kRlsdFtRpn)) {
    for (const Sample& s : data.train) {
      if (s.boxes.empty()) {
        throw std::invalid_argument("rlsd-ft-rpn needs boxes in every annotation; '" +
                                    s.id + "' has none");
      }
    }
  }
  std::vector<std::pair<ModelKind, TrainResult>> out;
  std::vector<std::pair<std::string, TrainLog>> shared;
  auto finish = [&](ModelKind kind, const ParamSet& params,
                    std::vector<std::pair<std::string, TrainLog>> stages,
                    double recall) {
    TrainResult r;
    r.checkpoint_bytes = encode_checkpoint(params, snapshot(cfg, kind, mc));
    r.log = stages.back().second;
    r.stages = std::move(stages);
    r.proposal_recall = recall;
    out.emplace_back(kind, std::move(r));
  };
  auto done = [&] { return out.size() == kinds.size(); };

  // Every regime starts from a backbone trained as the Multi-CNN baseline.
  TrainedModel base(ModelKind::kMultiCnn, mc, seed);
  shared.emplace_back("backbone",
                      train_multi_cnn(base.multi_cnn(), data.train,
                                      train_config_from(cfg, "backbone"), progress));
  if (wanted(ModelKind::kMultiCnn)) finish(ModelKind::kMultiCnn, base.params(), shared, -1);
  if (done()) return out;
  const ParamSet backbone = base.multi_cnn().backbone().params();

  TrainedModel global(ModelKind::kCnnLstm, mc, seed);
  global.cnn_lstm().backbone().params().copy_from(backbone);
  shared.emplace_back("lstm", pretrain_global_lstm(global.cnn_lstm(), data.train,
                                                   train_config_from(cfg, "lstm"),
                                                   progress));
  if (wanted(ModelKind::kCnnLstm)) finish(ModelKind::kCnnLstm, global.params(), shared, -1);
  if (done()) return out;

  TrainedModel pre(ModelKind::kRlsd, mc, seed);
  const Localizer& loc = pre.rlsd().localizer();
  if (cfg.get_bool("localizer.init_from_backbone", true)) {
    loc.backbone().params().copy_from(backbone);
  }
  shared.emplace_back("localizer", pretrain_localizer(loc, data.train,
                                                      train_config_from(cfg, "localizer"),
                                                      cutoff, progress));
  double recall = -1.0;
  if (!data.test.empty() && !data.test.front().boxes.empty()) {
    recall = proposal_recall(loc, data.test, mc.proposals, 0.5, cutoff);
    if (progress) {
      *progress << "proposal recall@" << mc.proposals << " (test): " << recall << "\n";
    }
  }
  pre.rlsd().recognition_params().copy_from(global.params());
  for (ModelKind kind : {ModelKind::kRlsd, ModelKind::kRlsdFtRpn}) {
    if (!wanted(kind)) continue;
    TrainedModel model(kind, mc, seed);
    model.params().copy_from(pre.params());
    const std::string stage = model_kind_name(kind);
    auto stages = shared;
    stages.emplace_back(stage, train_rlsd(model.rlsd(), data.train,
                                          train_config_from(cfg, stage),
                                          kind == ModelKind::kRlsdFtRpn, cutoff,
                                          progress));
    finish(kind, model.params(), std::move(stages), recall);
  }
  return out;
}

TrainResult train_model(ModelKind kind, const Dataset& data, const Config& cfg,
                        std::ostream* progress) {
  const ModelKind kinds[] = {kind};
  return std::move(train_regimes(kinds, data, cfg, progress).front().second);
}

TrainedModel model_from_checkpoint(const Checkpoint& ckpt, const std::string& origin) {
  const Config cfg = Config::parse(ckpt.config_text, origin + " (config)");
  if (!cfg.has("model.kind") || !cfg.has("model.num_labels")) {
    throw std::runtime_error(origin + ": checkpoint config lacks model.kind");
  }
  const ModelKind kind = parse_model_kind(cfg.get("model.kind", ""));
  const ModelConfig mc = model_config_from(cfg, cfg.get_size("model.num_labels", 0));
  TrainedModel model(kind, mc, cfg.get_u64("seed", 1));
  restore_params(ckpt, model.params());
  return model;
}

TrainedModel load_model(const std::filesystem::path& path) {
  return model_from_checkpoint(load_checkpoint(path), path.string());
}

std::string loss_csv(const TrainLog& log) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (const EpochLoss& e : log.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", e.epoch, e.loss);
    out += buf;
  }
  return out;
}

EvalOutput evaluate(std::span<const EvalRecord> records,
                    std::span<const std::string> class_names,
                    std::span<const std::size_t> small_classes,
                    const EvalOptions& options, const std::string& extra_json) {
  std::vector<std::size_t> pr_ids;
  for (const std::string& name : options.pr_classes) {
    const auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) {
      throw std::invalid_argument("unknown class '" + name + "'");
    }
    pr_ids.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  EvalOutput out;
  out.report = evaluate_records(records, class_names, options.k, options.threshold);
  json extra = json::parse(extra_json);
  if (!small_classes.empty()) {
    extra["small_classes"] = std::vector<std::size_t>(small_classes.begin(),
                                                      small_classes.end());
    extra["small_class_recall"] =
        label_subset_recall(records, small_classes, options.k, options.threshold);
  }
  for (std::size_t i = 0; i < pr_ids.size(); ++i) {
    out.curves.emplace_back("pr-" + options.pr_classes[i],
                            curve_csv(pr_curve(records, pr_ids[i])));
  }
  if (options.recall_area) {
    const auto edges = default_area_edges();
    const auto bins = recall_vs_area(records, edges, options.k, options.threshold);
    out.curves.emplace_back("recall-area", curve_csv(area_curve(bins)));
    json rows = json::array();
    for (const AreaBin& b : bins) {
      rows.push_back({{"lo", b.lo}, {"hi", b.hi}, {"instances", b.instances},
                      {"hits", b.hits}, {"recall", b.recall}});
    }
    extra["recall_vs_area"] = rows;
  }
  out.json = out.report.to_json(extra.dump());
  return out;
}

std::string proposals_json(std::span<const ScoredBox> proposals) {
  json arr = json::array();
  for (const ScoredBox& p : proposals) {
    arr.push_back({{"x", p.box.x}, {"y", p.box.y}, {"w", p.box.w}, {"h", p.box.h},
                   {"confidence", p.confidence}});
  }
  return arr.dump(2) + "\n";
}

std::string plot_svg(const std::string& csv, const std::string& title) {
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::pair<double, double>> pts;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("csv line " + std::to_string(lineno) +
                                  ": expected two columns");
    }
    if (header.empty()) {
      header = {line.substr(0, comma), line.substr(comma + 1)};
      continue;
    }
    try {
      pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": not numeric");
    }
  }
  if (header.empty()) throw std::invalid_argument("csv is empty");
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = pts[0].second;
    for (auto [x, y] : pts) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    y0 = std::min(y0, 0.0);
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
  }
  const double w = 480, h = 320, pad = 48;
  auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (w - 2 * pad); };
  auto py = [&](double y) { return h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad); };
  auto esc = [](std::string s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };
  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\">" << esc(title)
      << "</text>\n<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad
      << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n<line x1=\"" << pad << "\" y1=\""
      << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">"
      << esc(header[0]) << " [" << x0 << ", " << x1 << "]</text>\n"
      << "<text x=\"14\" y=\"" << h / 2 << "\" transform=\"rotate(-90 14 " << h / 2
      << ")\" text-anchor=\"middle\">" << esc(header[1]) << " [" << y0 << ", " << y1
      << "]</text>\n";
  if (!pts.empty()) {
    svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : pts) svg << px(x) << "," << py(y) << " ";
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

struct CommonOpts {
  std::vector<std::string> config_files;
  std::vector<std::string> sets;
};

Config resolve_config(const CommonOpts& c, const CLI::App& sub, std::uint64_t seed) {
  Config cfg = default_config();
  for (const auto& f : c.config_files) cfg.merge(Config::load(f));
  for (const auto& s : c.sets) cfg.apply(s);
  if (sub.count("--seed")) cfg.set("seed", std::to_string(seed));
  return cfg;
}

bool non_empty_dir(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) && !std::filesystem::is_empty(p);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Region-based multi-label recognition on synthetic scenes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  std::size_t gen_classes = 12, gen_train = 2000, gen_test = 500;
  bool gen_force = false;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--classes", gen_classes, "Number of classes (<= 12)");
  gen->add_option("--train", gen_train, "Train images");
  gen->add_option("--test", gen_test, "Test images");
  gen->add_flag("--force", gen_force, "Overwrite a non-empty output directory");

  // train
  auto* train = app.add_subcommand("train", "Train one model regime");
  std::string tr_model, tr_data, tr_out, tr_loss;
  std::uint64_t tr_seed = 1;
  CommonOpts tr_common;
  train->add_option("--model", tr_model, "multi-cnn | cnn-lstm | rlsd | rlsd-ft-rpn")
      ->required();
  train->add_option("--data", tr_data, "Dataset directory")->required();
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--seed", tr_seed, "Seed for init, shuffling and dropout");
  train->add_option("--config", tr_common.config_files, "Config file(s), key=value lines");
  train->add_option("--set", tr_common.sets, "Override, key=value");
  train->add_option("--loss-log", tr_loss, "CSV epoch,loss (default <out>.loss.csv)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
  EvalOptions ev_opts;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--split", ev_split, "train | test");
  ev->add_option("--k", ev_opts.k, "Labels predicted per image");
  ev->add_option("--threshold", ev_opts.threshold, "Score threshold");
  ev->add_option("--pr-class", ev_opts.pr_classes, "Emit a PR curve CSV for this class");
  ev->add_flag("--recall-area", ev_opts.recall_area, "Emit recall vs object area CSV");
  ev->add_option("--out", ev_out, "Report path (default stdout)");

  // propose
  auto* pr = app.add_subcommand("propose", "Emit region proposals for one image");
  std::string pr_ckpt, pr_image, pr_out;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint with a localizer")->required();
  pr->add_option("--image", pr_image, "PPM image")->required();
  pr->add_option("--out", pr_out, "Output path (default stdout)");

  // plot
  auto* pl = app.add_subcommand("plot", "Render a two-column CSV as an SVG line chart");
  std::string pl_in, pl_out, pl_title;
  pl->add_option("--in", pl_in, "CSV path")->required();
  pl->add_option("--out", pl_out, "SVG path")->required();
  pl->add_option("--title", pl_title, "Chart title");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      const std::filesystem::path root(gen_out);
      if (non_empty_dir(root) && !gen_force) {
        err << "gen-data: " << root.string() << " is not empty (use --force)\n";
        return 1;
      }
      if (gen_force && std::filesystem::exists(root)) std::filesystem::remove_all(root);
      const SceneSpec spec = scene_spec_for(gen_classes, gen_seed);
      const Dataset ds = generate_dataset(spec, gen_train, gen_test);
      write_dataset(root, ds, spec);
      out << (root / "manifest.json").string() << "\n";
      return 0;
    }
    if (*train) {
      const ModelKind kind = parse_model_kind(tr_model);
      const Config cfg = resolve_config(tr_common, *train, tr_seed);
      const Dataset ds = load_dataset(tr_data);
      err << "config:\n" << cfg.text();
      const TrainResult r = train_model(kind, ds, cfg, &err);
      write_file(tr_out, r.checkpoint_bytes);
      write_file(tr_loss.empty() ? tr_out + ".loss.csv" : tr_loss, loss_csv(r.log));
      out << tr_out << "\n";
      return 0;
    }
    if (*ev) {
      const TrainedModel model = load_model(ev_ckpt);
      const Dataset ds = load_dataset(ev_data);
      if (ds.num_labels() != model.config().num_labels) {
        throw std::invalid_argument("checkpoint has " +
                                    std::to_string(model.config().num_labels) +
                                    " labels, dataset has " +
                                    std::to_string(ds.num_labels()));
      }
      const auto& split = ds.split(ev_split);
      if (ev_opts.recall_area) {
        for (const Sample& s : split) {
          if (s.boxes.empty()) {
            throw std::invalid_argument("--recall-area needs boxes; '" + s.id +
                                        "' has none");
          }
        }
      }
      // Fails on bad class names before spending time on inference.
      for (const auto& name : ev_opts.pr_classes) {
        if (std::find(ds.class_names.begin(), ds.class_names.end(), name) ==
            ds.class_names.end()) {
          throw std::invalid_argument("unknown class '" + name + "'");
        }
      }
      const auto records = make_records(
          split, [&](const Sample& s) { return model.predict(s.image); });
      json extra = {{"model", model_kind_name(model.kind())}, {"split", ev_split}};
      const EvalOutput o = evaluate(records, ds.class_names, ds.small_classes, ev_opts,
                                    extra.dump());
      if (ev_out.empty()) {
        out << o.json;
        if (!o.curves.empty()) err << "eval: curves need --out, not written\n";
      } else {
        write_file(ev_out, o.json);
        for (const auto& [suffix, csv] : o.curves) {
          write_file(ev_out + "." + suffix + ".csv", csv);
        }
        out << ev_out << "\n";
      }
      return 0;
    }
    if (*pr) {
      const TrainedModel model = load_model(pr_ckpt);
      if (!model.has_localizer()) {
        throw std::invalid_argument("checkpoint of kind " + model_kind_name(model.kind()) +
                                    " has no localizer");
      }
      const Tensor image = read_ppm(pr_image);
      const auto props = model.rlsd().localizer().propose(image, model.config().proposals);
      const std::string text = proposals_json(props);
      if (pr_out.empty()) {
        out << text;
      } else {
        write_file(pr_out, text);
      }
      return 0;
    }
    if (*pl) {
      write_file(pl_out, plot_svg(read_file(pl_in), pl_title.empty() ? pl_in : pl_title));
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rlsd
