#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gclrec/augment.hpp"
#include "gclrec/checkpoint.hpp"
#include "gclrec/dataset.hpp"
#include "gclrec/graph.hpp"
#include "gclrec/lightgcn.hpp"
#include "gclrec/losses.hpp"
#include "gclrec/metrics.hpp"
#include "gclrec/params.hpp"
#include "gclrec/rng.hpp"

namespace gclrec {

enum class ModelKind { kBprMf, kLightGcn, kDaGcl, kLdaGcl };

inline const char* model_name(ModelKind m) {
  switch (m) {
    case ModelKind::kBprMf: return "bprmf";
    case ModelKind::kLightGcn: return "lightgcn";
    case ModelKind::kDaGcl: return "da_gcl";
    default: return "lda_gcl";
  }
}

inline ModelKind model_from_name(const std::string& name) {
  if (name == "bprmf") return ModelKind::kBprMf;
  if (name == "lightgcn") return ModelKind::kLightGcn;
  if (name == "da_gcl") return ModelKind::kDaGcl;
  if (name == "lda_gcl") return ModelKind::kLdaGcl;
  throw std::invalid_argument("unknown model kind: " + name);
}

struct TrainConfig {
  ModelKind model = ModelKind::kLightGcn;
  std::int64_t embedding_dim = 64;
  std::int64_t layers = 3;
  std::int64_t batch_size = 4096;
  double lr = 1e-3;
  double t_lr = -1.0;  // < 0: use lr
  double lambda_ssl = 0.1;
  double lambda_reg = 1e-4;
  double lambda_t = 0.2;
  double tau = 0.2;
  double tau_g = 1.0;
  double p_add = 0.0;
  double p_drop = 0.0;
  std::int64_t patience = 10;
  std::int64_t max_epochs = 200;
  std::uint64_t seed = 42;
  double epsilon = 1e-8;
  bool operator_enabled = true;
  bool warm_start = false;
  bool aug_count_degrees = false;
  int threads = 0;  // 0 = hardware concurrency

  double effective_t_lr() const { return t_lr < 0.0 ? lr : t_lr; }
  std::int64_t effective_layers() const {
    return model == ModelKind::kBprMf ? 0 : layers;
  }
  LossParams loss_params() const {
    return {lambda_ssl, lambda_reg, lambda_t, tau};
  }
  void validate() const {
    if (embedding_dim <= 0 || batch_size <= 0 || layers < 0)
      throw std::invalid_argument("config: dimensions must be positive");
    if (lr < 0.0 || tau <= 0.0 || tau_g <= 0.0 || lambda_reg < 0.0 ||
        lambda_ssl < 0.0 || lambda_t < 0.0)
      throw std::invalid_argument("config: rates must be nonnegative, temperatures positive");
    if (patience < 1) throw std::invalid_argument("config: patience must be >= 1");
    if (!(p_add >= 0.0 && p_add <= 1.0) || !(p_drop >= 0.0 && p_drop < 1.0))
      throw std::invalid_argument("config: augmentation ratios out of range");
  }
};

/// Split-tagged interactions plus the training-graph structures every
/// regime shares.
struct TrainData {
  InteractionSet data;
  std::shared_ptr<const BipartiteGraph> train_graph;
  NormalizedAdjacency adj;
  std::vector<EdgePair> train_positives;
};

inline TrainData prepare_train_data(InteractionSet data) {
  TrainData td;
  td.train_positives = data.edges_of(Split::kTrain);
  if (td.train_positives.empty())
    throw std::runtime_error("prepare_train_data: no training records (split first)");
  td.train_graph = std::make_shared<const BipartiteGraph>(
      build_graph(td.train_positives, data.n_users(), data.n_items()));
  td.adj = normalize(td.train_graph);
  td.data = std::move(data);
  return td;
}

struct EpochLogEntry {
  std::int64_t epoch = 0;
  std::string phase;  // "t" or "f"
  double loss_total = 0.0;
  double loss_bpr = 0.0;
  double loss_nce = 0.0;  // lambda-weighted contrastive contribution
  std::optional<double> val_ndcg10;
};

inline void write_log_line(std::ostream& out, const EpochLogEntry& e) {
  char buf[512];
  if (e.val_ndcg10) {
    std::snprintf(buf, sizeof(buf),
                  "{\"epoch\":%lld,\"phase\":\"%s\",\"loss_total\":%.17g,"
                  "\"loss_bpr\":%.17g,\"loss_nce\":%.17g,\"val_ndcg10\":%.17g}\n",
                  static_cast<long long>(e.epoch), e.phase.c_str(), e.loss_total,
                  e.loss_bpr, e.loss_nce, *e.val_ndcg10);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "{\"epoch\":%lld,\"phase\":\"%s\",\"loss_total\":%.17g,"
                  "\"loss_bpr\":%.17g,\"loss_nce\":%.17g}\n",
                  static_cast<long long>(e.epoch), e.phase.c_str(), e.loss_total,
                  e.loss_bpr, e.loss_nce);
  }
  out << buf;
}

/// Early stopping on validation NDCG@10: strict improvement resets the
/// counter (and the caller snapshots); `patience` non-improving epochs stop.
struct EarlyStopper {
  std::int64_t patience = 10;
  double best = -std::numeric_limits<double>::infinity();
  std::int64_t since_best = 0;
  std::int64_t best_epoch = 0;

  explicit EarlyStopper(std::int64_t p) : patience(p) {}

  /// Returns true when this epoch strictly improved the best value.
  bool update(std::int64_t epoch, double ndcg10) {
    if (!(ndcg10 >= 0.0 && ndcg10 <= 1.0))
      throw std::invalid_argument("early_stop_update: ndcg outside [0,1]");
    if (ndcg10 > best) {
      best = ndcg10;
      best_epoch = epoch;
      since_best = 0;
      return true;
    }
    ++since_best;
    return false;
  }
  bool should_stop() const { return since_best >= patience; }
};

struct TrainResult {
  Checkpoint best;
  double best_val_ndcg10 = 0.0;
  std::int64_t best_epoch = 0;
  std::int64_t epochs_run = 0;
  std::vector<EpochLogEntry> history;
};

namespace detail {

struct PhaseStats {
  double total = 0.0, bpr = 0.0, nce = 0.0;
  std::int64_t n = 0;
  void add(const LossReport& r, double weighted_nce) {
    total += r.total;
    bpr += r.component("bpr");
    nce += weighted_nce;
    ++n;
  }
  EpochLogEntry entry(std::int64_t epoch, const char* phase) const {
    EpochLogEntry e;
    e.epoch = epoch;
    e.phase = phase;
    const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
    e.loss_total = total * inv;
    e.loss_bpr = bpr * inv;
    e.loss_nce = nce * inv;
    return e;
  }
};

inline Mat embeddings_of(const ParamStore& params, std::int64_t rows,
                         std::int64_t dim) {
  return Eigen::Map<const Mat>(params.tensors[0].values.data(), rows, dim);
}

}  // namespace detail

/// Plain BPR training of LightGCN (or BPRMF as the 0-layer special case).
class PretrainTrainer {
public:
  PretrainTrainer(const TrainConfig& config, const TrainData& td)
      : config_(config), td_(td) {
    config_.validate();
    if (config_.model != ModelKind::kBprMf && config_.model != ModelKind::kLightGcn)
      throw std::invalid_argument("pretrain: model must be bprmf or lightgcn");
    const std::int64_t rows = td.data.n_users() + td.data.n_items();
    Rng init = derive_stream(config_.seed, "init_f");
    f_params_.tensors.push_back(
        xavier_init("embeddings", {rows, config_.embedding_dim}, init));
    opt_ = Adam(config_.lr);
  }

  const ParamStore& f_params() const { return f_params_; }

  LossReport step_batch(const TrainBatch& batch, std::int64_t epoch = 0,
                        std::int64_t batch_index = 0) {
    const std::int64_t rows = td_.data.n_users() + td_.data.n_items();
    const Mat z0 = detail::embeddings_of(f_params_, rows, config_.embedding_dim);
    PropagationTape tape;
    const Mat z = propagate(td_.adj, z0, config_.effective_layers(), &tape,
                            config_.threads);
    LossReport report = bpr_loss(batch, z, *td_.train_graph);
    const double reg = l2_penalty(f_params_, config_.lambda_reg);
    report.components["reg"] = reg;
    report.total += reg;
    if (!std::isfinite(report.total))
      throw std::runtime_error("pretrain diverged at epoch " +
                               std::to_string(epoch) + " batch " +
                               std::to_string(batch_index));
    const Mat dz0 =
        propagate_backward(tape, report.grad_z1, nullptr, config_.threads);
    f_params_.tensors[0].grad +=
        Eigen::Map<const Vec>(dz0.data(), dz0.size());
    opt_.step(f_params_);
    return report;
  }

private:
  TrainConfig config_;
  const TrainData& td_;
  ParamStore f_params_;
  Adam opt_;
};

/// Contrastive training against a randomly augmented second view
/// (edge-dropping then edge-adding, re-sampled each epoch).
class DaGclTrainer {
public:
  DaGclTrainer(const TrainConfig& config, const TrainData& td,
               const EdgeCandidateSet* candidates,
               const Mat* warm_start_embeddings = nullptr)
      : config_(config), td_(td), candidates_(candidates) {
    config_.validate();
    if (config_.p_add > 0.0 && !candidates_)
      throw std::invalid_argument("da_gcl: p_add > 0 requires an edge candidate set");
    const std::int64_t rows = td.data.n_users() + td.data.n_items();
    Rng init = derive_stream(config_.seed, "init_f");
    f_params_.tensors.push_back(
        xavier_init("embeddings", {rows, config_.embedding_dim}, init));
    if (warm_start_embeddings) {
      if (warm_start_embeddings->rows() != rows ||
          warm_start_embeddings->cols() != config_.embedding_dim)
        throw std::invalid_argument("da_gcl: warm-start embedding shape mismatch");
      f_params_.tensors[0].values = Eigen::Map<const Vec>(
          warm_start_embeddings->data(), warm_start_embeddings->size());
    }
    opt_ = Adam(config_.lr);
  }

  const ParamStore& f_params() const { return f_params_; }

  /// Draws this epoch's augmented view.
  void begin_epoch(std::int64_t epoch) {
    Rng drop_rng = derive_stream(config_.seed, "aug_drop", epoch);
    BipartiteGraph aug = random_edge_drop(*td_.train_graph, config_.p_drop, drop_rng);
    if (config_.p_add > 0.0) {
      Rng add_rng = derive_stream(config_.seed, "aug_add", epoch);
      aug = random_edge_add(aug, *candidates_, config_.p_add, add_rng);
    }
    aug_graph_ = std::make_shared<const BipartiteGraph>(std::move(aug));
    aug_adj_ = normalize(aug_graph_);
  }

  const BipartiteGraph& augmented_graph() const { return *aug_graph_; }

  LossReport step_batch(const TrainBatch& batch, std::int64_t epoch = 0,
                        std::int64_t batch_index = 0) {
    const std::int64_t rows = td_.data.n_users() + td_.data.n_items();
    const Mat z0 = detail::embeddings_of(f_params_, rows, config_.embedding_dim);
    PropagationTape tape_g, tape_t;
    const Mat z_g =
        propagate(td_.adj, z0, config_.effective_layers(), &tape_g, config_.threads);
    const Mat z_t =
        propagate(aug_adj_, z0, config_.effective_layers(), &tape_t, config_.threads);
    LossReport report = loss_f(batch, z_g, z_t, *td_.train_graph,
                               config_.loss_params(), f_params_, true,
                               config_.threads);
    if (!std::isfinite(report.total))
      throw std::runtime_error("da_gcl diverged at epoch " +
                               std::to_string(epoch) + " batch " +
                               std::to_string(batch_index));
    Mat dz0 = propagate_backward(tape_g, report.grad_z1, nullptr, config_.threads);
    dz0 += propagate_backward(tape_t, report.grad_z2, nullptr, config_.threads);
    f_params_.tensors[0].grad += Eigen::Map<const Vec>(dz0.data(), dz0.size());
    opt_.step(f_params_);
    return report;
  }

private:
  TrainConfig config_;
  const TrainData& td_;
  const EdgeCandidateSet* candidates_;
  ParamStore f_params_;
  Adam opt_;
  std::shared_ptr<const BipartiteGraph> aug_graph_;
  NormalizedAdjacency aug_adj_;
};

/// Adversarial training: per batch, the edge operator t takes a gradient
/// step against the encoder objective, then the encoder f takes one with t
/// frozen. Each side has its own optimizer; both phases consume the same
/// mini-batch.
class LdaGclTrainer {
public:
  LdaGclTrainer(const TrainConfig& config, const TrainData& td,
                EdgeCandidateSet candidates,
                const Mat* warm_start_embeddings = nullptr)
      : config_(config), td_(td), candidates_(std::move(candidates)) {
    config_.validate();
    const std::int64_t rows = td.data.n_users() + td.data.n_items();
    Rng init_f = derive_stream(config_.seed, "init_f");
    f_params_.tensors.push_back(
        xavier_init("embeddings", {rows, config_.embedding_dim}, init_f));
    if (warm_start_embeddings) {
      if (warm_start_embeddings->rows() != rows ||
          warm_start_embeddings->cols() != config_.embedding_dim)
        throw std::invalid_argument("lda_gcl: warm-start embedding shape mismatch");
      f_params_.tensors[0].values = Eigen::Map<const Vec>(
          warm_start_embeddings->data(), warm_start_embeddings->size());
    }
    Rng init_t = derive_stream(config_.seed, "init_t");
    mlp_ = EdgeOperatorMlp(config_.embedding_dim, init_t);
    opt_f_ = Adam(config_.lr);
    opt_t_ = Adam(config_.effective_t_lr());
  }

  const ParamStore& f_params() const { return f_params_; }
  const EdgeOperatorMlp& mlp() const { return mlp_; }
  const EdgeCandidateSet& candidates() const { return candidates_; }

  Mat embedding_table() const {
    const std::int64_t rows = td_.data.n_users() + td_.data.n_items();
    return detail::embeddings_of(f_params_, rows, config_.embedding_dim);
  }

  /// Operator step with f frozen. delta_rng supplies the Gumbel noise.
  LossReport t_step(const TrainBatch& batch, Rng& delta_rng,
                    std::int64_t epoch = 0, std::int64_t batch_index = 0) {
    const Mat z0 = embedding_table();
    PropagationTape tape_g;
    const Mat z_g =
        propagate(td_.adj, z0, config_.effective_layers(), &tape_g, config_.threads);
    operator_features(z0, td_.data.n_users(), candidates_, features_,
                      config_.threads);
    return t_step_with(batch, z0, z_g, delta_rng, epoch, batch_index);
  }

  /// Encoder step with t frozen.
  LossReport f_step(const TrainBatch& batch, Rng& delta_rng,
                    std::int64_t epoch = 0, std::int64_t batch_index = 0) {
    const Mat z0 = embedding_table();
    PropagationTape tape_g;
    const Mat z_g =
        propagate(td_.adj, z0, config_.effective_layers(), &tape_g, config_.threads);
    if (config_.operator_enabled)
      operator_features(z0, td_.data.n_users(), candidates_, features_,
                        config_.threads);
    return f_step_with(batch, z0, z_g, tape_g, delta_rng, epoch, batch_index);
  }

  /// Both adversarial phases on one batch. f(G) and the candidate features
  /// are computed once and shared: f is frozen during the t phase, so
  /// neither can go stale before the f step.
  std::pair<std::optional<LossReport>, LossReport> step_batch(
      const TrainBatch& batch, std::int64_t epoch, std::int64_t batch_index) {
    const Mat z0 = embedding_table();
    PropagationTape tape_g;
    const Mat z_g =
        propagate(td_.adj, z0, config_.effective_layers(), &tape_g, config_.threads);
    std::optional<LossReport> t_report;
    if (config_.operator_enabled)
      operator_features(z0, td_.data.n_users(), candidates_, features_,
                        config_.threads);
    if (config_.operator_enabled) {
      Rng t_rng = derive_stream(config_.seed, "gumbel_t", epoch, batch_index);
      t_report = t_step_with(batch, z0, z_g, t_rng, epoch, batch_index);
    }
    Rng f_rng = derive_stream(config_.seed, "gumbel_f", epoch, batch_index);
    LossReport f_report =
        f_step_with(batch, z0, z_g, tape_g, f_rng, epoch, batch_index);
    return {std::move(t_report), std::move(f_report)};
  }

private:
  Vec draw_delta(Rng& rng) {
    Vec delta(candidates_.size());
    for (Index c = 0; c < candidates_.size(); ++c) delta[c] = rng.uniform_open01();
    return delta;
  }

  LossReport t_step_with(const TrainBatch& batch, const Mat& z0, const Mat& z_g,
                         Rng& delta_rng, std::int64_t epoch,
                         std::int64_t batch_index) {
    const Vec p = edge_operator_forward_features(
        mlp_, features_, config_.tau_g, draw_delta(delta_rng), &op_tape_,
        config_.threads);
    const NormalizedAdjacency aug = build_augmented_adjacency(
        candidates_, p, config_.epsilon, config_.aug_count_degrees);
    PropagationTape tape_t;
    const Mat z_t =
        propagate(aug, z0, config_.effective_layers(), &tape_t, config_.threads);
    LossReport report = loss_t(batch, z_g, z_t, *td_.train_graph,
                               config_.loss_params(), mlp_.params, true,
                               config_.threads);
    if (!std::isfinite(report.total))
      throw std::runtime_error("lda_gcl operator phase diverged at epoch " +
                               std::to_string(epoch) + " batch " +
                               std::to_string(batch_index));
    std::vector<double> d_weights;
    propagate_backward(tape_t, report.grad_z2, &d_weights, config_.threads);
    const Vec d_p = Eigen::Map<const Vec>(d_weights.data(),
                                          static_cast<Index>(d_weights.size()));
    edge_operator_backward(mlp_, op_tape_, features_, d_p, config_.threads);
    opt_t_.step(mlp_.params);
    return report;
  }

  LossReport f_step_with(const TrainBatch& batch, const Mat& z0, const Mat& z_g,
                         const PropagationTape& tape_g, Rng& delta_rng,
                         std::int64_t epoch, std::int64_t batch_index) {
    Mat z_t;
    PropagationTape tape_t;
    const PropagationTape* t_tape = nullptr;
    if (config_.operator_enabled) {
      const Vec p = edge_operator_forward_features(
          mlp_, features_, config_.tau_g, draw_delta(delta_rng), &op_tape_,
          config_.threads);
      const NormalizedAdjacency aug = build_augmented_adjacency(
          candidates_, p, config_.epsilon, config_.aug_count_degrees);
      z_t = propagate(aug, z0, config_.effective_layers(), &tape_t, config_.threads);
      t_tape = &tape_t;
    } else {
      // Operator disabled: the second view is the original graph.
      z_t = z_g;
      t_tape = &tape_g;
    }
    LossReport report = loss_f(batch, z_g, z_t, *td_.train_graph,
                               config_.loss_params(), f_params_, true,
                               config_.threads);
    if (!std::isfinite(report.total))
      throw std::runtime_error("lda_gcl encoder phase diverged at epoch " +
                               std::to_string(epoch) + " batch " +
                               std::to_string(batch_index));
    Mat dz0 = propagate_backward(tape_g, report.grad_z1, nullptr, config_.threads);
    dz0 += propagate_backward(*t_tape, report.grad_z2, nullptr, config_.threads);
    f_params_.tensors[0].grad += Eigen::Map<const Vec>(dz0.data(), dz0.size());
    opt_f_.step(f_params_);
    return report;
  }

  TrainConfig config_;
  const TrainData& td_;
  EdgeCandidateSet candidates_;
  ParamStore f_params_;
  EdgeOperatorMlp mlp_;
  Adam opt_f_;
  Adam opt_t_;
  // Per-batch workspace, reused so the large feature/activation buffers are
  // allocated once.
  Mat features_;
  OperatorTape op_tape_;
};

namespace detail {

inline Checkpoint make_checkpoint(const TrainData& td, std::int64_t dim,
                                  const ParamStore& f_params,
                                  const EdgeOperatorMlp* mlp) {
  Checkpoint ckpt;
  ckpt.n_users = td.data.n_users();
  ckpt.n_items = td.data.n_items();
  ckpt.dim = dim;
  ckpt.embeddings =
      embeddings_of(f_params, ckpt.n_users + ckpt.n_items, dim);
  if (mlp) ckpt.mlp = mlp->snapshot_tensors();
  return ckpt;
}

inline double validation_ndcg10(const TrainConfig& config, const TrainData& td,
                                const ParamStore& f_params) {
  const std::int64_t rows = td.data.n_users() + td.data.n_items();
  const Mat z0 = embeddings_of(f_params, rows, config.embedding_dim);
  const Mat z = propagate(td.adj, z0, config.effective_layers(), nullptr,
                          config.threads);
  const MetricsReport report = evaluate(z, td.data, *td.train_graph,
                                        Split::kValid, {10}, 0, config.threads);
  return report.values.at("ndcg").at(10);
}

}  // namespace detail

/// Runs a full training regime: shuffled positives, per-batch stepping, one
/// validation pass per epoch, early stopping with best-checkpoint snapshots,
/// JSON-line logging. `Trainer` is one of the trainer classes above; the
/// lambda adapts its batch stepping to the shared loop.
template <typename Trainer, typename BatchStep>
TrainResult run_regime(const TrainConfig& config, const TrainData& td,
                       Trainer& trainer, BatchStep&& batch_step,
                       const EdgeOperatorMlp* mlp_for_ckpt, std::ostream* log) {
  TrainResult result;
  EarlyStopper stopper(config.patience);

  std::vector<std::size_t> order(td.train_positives.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (std::int64_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng = derive_stream(config.seed, "epoch_shuffle", epoch);
    shuffle_rng.shuffle(order);
    Rng neg_rng = derive_stream(config.seed, "neg_sample", epoch);

    detail::PhaseStats t_stats, f_stats;
    std::int64_t batch_index = 0;
    for (std::size_t cursor = 0; cursor < order.size();
         cursor += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const TrainBatch batch =
          sample_batch(*td.train_graph, td.train_positives, order, cursor,
                       static_cast<std::size_t>(config.batch_size), neg_rng);
      batch_step(epoch, batch_index, batch, t_stats, f_stats);
    }

    const double ndcg = detail::validation_ndcg10(config, td, trainer.f_params());
    result.epochs_run = epoch;

    if (t_stats.n > 0) result.history.push_back(t_stats.entry(epoch, "t"));
    EpochLogEntry f_entry = f_stats.entry(epoch, "f");
    f_entry.val_ndcg10 = ndcg;
    result.history.push_back(f_entry);
    if (log) {
      if (t_stats.n > 0)
        write_log_line(*log, result.history[result.history.size() - 2]);
      write_log_line(*log, result.history.back());
      log->flush();
    }

    if (stopper.update(epoch, ndcg)) {
      result.best = detail::make_checkpoint(td, config.embedding_dim,
                                            trainer.f_params(), mlp_for_ckpt);
      result.best_val_ndcg10 = ndcg;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  if (result.best.dim == 0)
    throw std::runtime_error("training finished without a best checkpoint");
  return result;
}

inline TrainResult pretrain(const TrainConfig& config, const TrainData& td,
                            std::ostream* log = nullptr) {
  PretrainTrainer trainer(config, td);
  return run_regime(
      config, td, trainer,
      [&](std::int64_t epoch, std::int64_t batch_index, const TrainBatch& batch,
          detail::PhaseStats&, detail::PhaseStats& f_stats) {
        f_stats.add(trainer.step_batch(batch, epoch, batch_index), 0.0);
      },
      nullptr, log);
}

inline TrainResult train_da_gcl(const TrainConfig& config, const TrainData& td,
                                const EdgeCandidateSet* candidates,
                                const Mat* warm_start = nullptr,
                                std::ostream* log = nullptr) {
  DaGclTrainer trainer(config, td, candidates, warm_start);
  std::int64_t current_epoch = 0;
  return run_regime(
      config, td, trainer,
      [&](std::int64_t epoch, std::int64_t batch_index, const TrainBatch& batch,
          detail::PhaseStats&, detail::PhaseStats& f_stats) {
        if (epoch != current_epoch) {
          trainer.begin_epoch(epoch);
          current_epoch = epoch;
        }
        const LossReport report = trainer.step_batch(batch, epoch, batch_index);
        const double nce = config.lambda_ssl * (report.component("infonce_user") +
                                                report.component("infonce_item"));
        f_stats.add(report, nce);
      },
      nullptr, log);
}

inline TrainResult train_lda_gcl(const TrainConfig& config, const TrainData& td,
                                 EdgeCandidateSet candidates,
                                 const Mat* warm_start = nullptr,
                                 std::ostream* log = nullptr) {
  LdaGclTrainer trainer(config, td, std::move(candidates), warm_start);
  const double lambda2 = config.lambda_t * config.lambda_ssl;
  return run_regime(
      config, td, trainer,
      [&](std::int64_t epoch, std::int64_t batch_index, const TrainBatch& batch,
          detail::PhaseStats& t_stats, detail::PhaseStats& f_stats) {
        auto [t_report, f_report] = trainer.step_batch(batch, epoch, batch_index);
        if (t_report) {
          const double nce_t =
              -lambda2 * (t_report->component("infonce_user") +
                          t_report->component("infonce_item"));
          t_stats.add(*t_report, nce_t);
        }
        const double nce_f =
            config.lambda_ssl * (f_report.component("infonce_user") +
                                 f_report.component("infonce_item"));
        f_stats.add(f_report, nce_f);
      },
      &trainer.mlp(), log);
}

}  // namespace gclrec
