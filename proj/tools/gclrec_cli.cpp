// gclrec command-line driver: pretrain / suggest / train / eval.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gclrec/augment.hpp"
#include "gclrec/checkpoint.hpp"
#include "gclrec/config.hpp"
#include "gclrec/metrics.hpp"
#include "gclrec/trainer.hpp"

namespace fs = std::filesystem;
using namespace gclrec;

namespace {

struct MissingFile : std::runtime_error {
  explicit MissingFile(const std::string& path)
      : std::runtime_error("missing file: " + path) {}
};

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw MissingFile(path);
}

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::int64_t seed = -1;  // -1: keep config/default
  std::vector<std::string> overrides;
  bool deterministic = true;
  std::string export_splits;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data = true) {
  cmd->add_option("--config", args.config_path, "flat key=value settings file");
  auto* data = cmd->add_option("--data", args.data_path,
                               "interaction file (user<TAB>item per line)");
  if (needs_data) data->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--set", args.overrides, "override a setting, key=value");
  cmd->add_option("--deterministic", args.deterministic,
                  "recorded in the manifest; runs are deterministic either way");
  cmd->add_option("--export-splits", args.export_splits,
                  "also write the split-tagged interactions to this file");
}

RunSettings resolve_settings(const CommonArgs& args) {
  RunSettings settings;
  if (!args.config_path.empty()) {
    require_file(args.config_path);
    settings = load_settings(args.config_path);
  }
  for (const std::string& kv : args.overrides) apply_override(settings, kv);
  if (args.seed >= 0) settings.values["seed"] = std::to_string(args.seed);
  check_known_keys(settings);
  return settings;
}

struct LoadedData {
  TrainData td;
  std::int64_t raw_records = 0;
};

LoadedData load_pipeline(const CommonArgs& args, const RunSettings& settings) {
  require_file(args.data_path);
  const DataSettings ds = make_data_settings(settings);
  const TrainConfig cfg = make_train_config(settings);
  InteractionSet set = load_interactions(args.data_path);
  const std::int64_t raw = set.n_records();
  if (ds.min_interactions > 0)
    set = filter_min_interactions(set, ds.min_interactions);
  set = split_interactions(set, ds.ratios, cfg.seed, ds.split_mode);
  if (!args.export_splits.empty()) save_interactions(set, args.export_splits);
  LoadedData out{prepare_train_data(std::move(set)), raw};
  return out;
}

RunManifest start_manifest(const std::string& command, const CommonArgs& args,
                           const RunSettings& settings, const LoadedData& data) {
  RunManifest m;
  m.command = command;
  m.settings = resolved_settings(settings);
  m.data_path = args.data_path;
  m.data_digest = file_digest(args.data_path);
  m.n_records = data.td.data.n_records();
  m.n_users = data.td.data.n_users();
  m.n_items = data.td.data.n_items();
  m.seed = make_train_config(settings).seed;
  m.settings["deterministic"] = args.deterministic ? "true" : "false";
  return m;
}

Mat propagate_checkpoint(const Checkpoint& ckpt, const TrainConfig& cfg,
                         const TrainData& td) {
  if (ckpt.n_users != td.data.n_users() || ckpt.n_items != td.data.n_items())
    throw std::runtime_error(
        "checkpoint vocabulary (" + std::to_string(ckpt.n_users) + "x" +
        std::to_string(ckpt.n_items) + ") does not match the data (" +
        std::to_string(td.data.n_users()) + "x" +
        std::to_string(td.data.n_items()) + "); same data/config/seed required");
  return propagate(td.adj, ckpt.embeddings, cfg.effective_layers(), nullptr,
                   cfg.threads);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

int cmd_pretrain(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSettings settings = resolve_settings(args);
  TrainConfig cfg = make_train_config(settings);
  // The pretraining stage always trains a plain encoder; a contrastive model
  // in the config means "pretrain its f0", which is LightGCN.
  if (cfg.model == ModelKind::kDaGcl || cfg.model == ModelKind::kLdaGcl) {
    cfg.model = ModelKind::kLightGcn;
    settings.values["model"] = "lightgcn";
  }
  LoadedData data = load_pipeline(args, settings);
  fs::create_directories(args.out_dir);

  const std::string log_path = (fs::path(args.out_dir) / "metrics.jsonl").string();
  std::ofstream log(log_path);
  const auto t_train = std::chrono::steady_clock::now();
  TrainResult result = pretrain(cfg, data.td, &log);
  const double train_sec = seconds_since(t_train);

  const std::string ckpt_path = (fs::path(args.out_dir) / "checkpoint.bin").string();
  save_checkpoint(result.best, ckpt_path);

  RunManifest m = start_manifest("pretrain", args, settings, data);
  m.artifacts["checkpoint"] = ckpt_path;
  m.artifacts["metrics_log"] = log_path;
  m.timings_sec["train"] = train_sec;
  m.timings_sec["total"] = seconds_since(t0);
  m.save((fs::path(args.out_dir) / "manifest.json").string());

  std::printf("pretrain: best val NDCG@10 %.6f at epoch %lld (%lld epochs run)\n",
              result.best_val_ndcg10, static_cast<long long>(result.best_epoch),
              static_cast<long long>(result.epochs_run));
  return 0;
}

int cmd_suggest(const CommonArgs& args, const std::string& checkpoint_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunSettings settings = resolve_settings(args);
  const TrainConfig cfg = make_train_config(settings);
  require_file(checkpoint_path);
  LoadedData data = load_pipeline(args, settings);
  fs::create_directories(args.out_dir);

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Mat z = propagate_checkpoint(ckpt, cfg, data.td);
  const EdgeCandidateSet cands =
      suggest_edges(z, *data.td.train_graph, cfg.threads);

  const std::string cand_path = (fs::path(args.out_dir) / "candidates.tsv").string();
  save_candidates(cands, data.td.data, cand_path);

  RunManifest m = start_manifest("suggest", args, settings, data);
  m.artifacts["candidates"] = cand_path;
  m.artifacts["checkpoint_in"] = checkpoint_path;
  m.timings_sec["total"] = seconds_since(t0);
  m.save((fs::path(args.out_dir) / "manifest.json").string());

  std::printf("suggest: |E0|=%lld |E1|=%lld shortfall=%lld\n",
              static_cast<long long>(cands.n_original()),
              static_cast<long long>(cands.n_suggested()),
              static_cast<long long>(cands.shortfall));
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& candidates_path,
              const std::string& pretrained_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunSettings settings = resolve_settings(args);
  const TrainConfig cfg = make_train_config(settings);
  LoadedData data = load_pipeline(args, settings);
  fs::create_directories(args.out_dir);

  std::optional<Checkpoint> pretrained;
  if (!pretrained_path.empty()) {
    require_file(pretrained_path);
    pretrained = load_checkpoint(pretrained_path);
  }
  std::optional<EdgeCandidateSet> candidates;
  if (!candidates_path.empty()) {
    require_file(candidates_path);
    candidates = load_candidates(candidates_path, data.td.data);
  }

  const Mat* warm = nullptr;
  if (cfg.warm_start) {
    if (!pretrained)
      throw std::runtime_error("warm_start=true requires --pretrained CHECKPOINT");
    warm = &pretrained->embeddings;
  }

  const std::string log_path = (fs::path(args.out_dir) / "metrics.jsonl").string();
  std::ofstream log(log_path);
  const auto t_train = std::chrono::steady_clock::now();
  TrainResult result;
  switch (cfg.model) {
    case ModelKind::kBprMf:
    case ModelKind::kLightGcn:
      result = pretrain(cfg, data.td, &log);
      break;
    case ModelKind::kDaGcl: {
      if (cfg.p_add > 0.0 && !candidates)
        throw std::runtime_error(
            "model=da_gcl with p_add > 0 needs --candidates FILE; "
            "run the suggest command first");
      result = train_da_gcl(cfg, data.td, candidates ? &*candidates : nullptr,
                            warm, &log);
      break;
    }
    case ModelKind::kLdaGcl: {
      if (!candidates) {
        if (!pretrained)
          throw std::runtime_error(
              "model=lda_gcl needs edge candidates: pass --candidates FILE, or "
              "--pretrained CHECKPOINT to derive them (run the pretrain "
              "command first)");
        const Mat z = propagate_checkpoint(*pretrained, cfg, data.td);
        candidates = suggest_edges(z, *data.td.train_graph, cfg.threads);
      }
      result = train_lda_gcl(cfg, data.td, std::move(*candidates), warm, &log);
      break;
    }
  }
  const double train_sec = seconds_since(t_train);

  const std::string ckpt_path = (fs::path(args.out_dir) / "checkpoint.bin").string();
  save_checkpoint(result.best, ckpt_path);

  RunManifest m = start_manifest("train", args, settings, data);
  m.artifacts["checkpoint"] = ckpt_path;
  m.artifacts["metrics_log"] = log_path;
  if (!candidates_path.empty()) m.artifacts["candidates_in"] = candidates_path;
  if (!pretrained_path.empty()) m.artifacts["pretrained_in"] = pretrained_path;
  m.timings_sec["train"] = train_sec;
  m.timings_sec["total"] = seconds_since(t0);
  m.save((fs::path(args.out_dir) / "manifest.json").string());

  std::printf("train[%s]: best val NDCG@10 %.6f at epoch %lld (%lld epochs run)\n",
              model_name(cfg.model), result.best_val_ndcg10,
              static_cast<long long>(result.best_epoch),
              static_cast<long long>(result.epochs_run));
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             std::vector<std::int64_t> cutoffs, std::int64_t groups,
             const std::string& split_name_arg) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunSettings settings = resolve_settings(args);
  const TrainConfig cfg = make_train_config(settings);
  require_file(checkpoint_path);
  LoadedData data = load_pipeline(args, settings);
  fs::create_directories(args.out_dir);

  Split target;
  if (split_name_arg == "test")
    target = Split::kTest;
  else if (split_name_arg == "valid")
    target = Split::kValid;
  else
    throw std::runtime_error("eval: --split must be test or valid");

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Mat z = propagate_checkpoint(ckpt, cfg, data.td);
  if (cutoffs.empty()) cutoffs = {10, 20, 50};
  const MetricsReport report = evaluate(z, data.td.data, *data.td.train_graph,
                                        target, cutoffs, groups, cfg.threads);

  const std::string json_path = (fs::path(args.out_dir) / "report.json").string();
  const std::string csv_path = (fs::path(args.out_dir) / "report.csv").string();
  {
    std::ofstream out(json_path);
    out << report_to_json(report).dump(2) << '\n';
  }
  save_report_csv(report, csv_path);

  RunManifest m = start_manifest("eval", args, settings, data);
  m.artifacts["report_json"] = json_path;
  m.artifacts["report_csv"] = csv_path;
  m.artifacts["checkpoint_in"] = checkpoint_path;
  m.timings_sec["total"] = seconds_since(t0);
  m.save((fs::path(args.out_dir) / "manifest.json").string());

  for (const auto& [metric, by_cutoff] : report.values)
    for (const auto& [cutoff, value] : by_cutoff)
      std::printf("%s@%lld %s: %.6f\n", metric.c_str(),
                  static_cast<long long>(cutoff), split_name_arg.c_str(), value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph collaborative filtering with learnable contrastive augmentation"};
  app.require_subcommand(1);

  CommonArgs pre_args, sug_args, train_args, eval_args;
  std::string sug_checkpoint, train_candidates, train_pretrained;
  std::string eval_checkpoint, eval_split = "test";
  std::vector<std::int64_t> eval_cutoffs;
  std::int64_t eval_groups = 0;

  CLI::App* pre = app.add_subcommand("pretrain", "train a BPRMF/LightGCN encoder");
  add_common(pre, pre_args);

  CLI::App* sug = app.add_subcommand("suggest", "emit edge candidates from a checkpoint");
  add_common(sug, sug_args);
  sug->add_option("--checkpoint", sug_checkpoint, "pretrained checkpoint")->required();

  CLI::App* trn = app.add_subcommand("train", "train any model kind from the config");
  add_common(trn, train_args);
  trn->add_option("--candidates", train_candidates, "edge candidate file");
  trn->add_option("--pretrained", train_pretrained, "pretrained checkpoint");

  CLI::App* evl = app.add_subcommand("eval", "full-ranking evaluation of a checkpoint");
  add_common(evl, eval_args);
  evl->add_option("--checkpoint", eval_checkpoint, "checkpoint to score")->required();
  evl->add_option("--cutoffs", eval_cutoffs, "ranking cutoffs (default 10 20 50)");
  evl->add_option("--groups", eval_groups, "degree-group count for the breakdown");
  evl->add_option("--split", eval_split, "test or valid");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return cmd_pretrain(pre_args);
    if (sug->parsed()) return cmd_suggest(sug_args, sug_checkpoint);
    if (trn->parsed()) return cmd_train(train_args, train_candidates, train_pretrained);
    if (evl->parsed()) return cmd_eval(eval_args, eval_checkpoint, eval_cutoffs,
                                       eval_groups, eval_split);
  } catch (const MissingFile& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
