#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imcs/config.hpp"
#include "imcs/dataviews.hpp"
#include "imcs/metrics.hpp"
#include "imcs/network.hpp"
#include "imcs/objectives.hpp"

namespace imcs {

// One batch forward over V view matrices: encode, project, assign codes,
// classify (on a gradient-stopped embedding), and solve balanced targets for
// the first n_high views. Public so tests can drive a step with hand-built
// views and inspect every piece.
struct StepGraph {
  ViewBundle bundle;
  TotalLoss loss;
};
StepGraph framework_step(Graph& g, const std::vector<Matrix>& views,
                         const BoundModel& model, const TrainConfig& cfg);

struct EvalResult {
  double acc = 0;
  double nmi_score = 0;
  double ari_score = 0;
  // Code-agreement diagnostic: mean divergence between the code
  // distributions two independent full-size views give the same sample
  // (jsd_same) vs. different samples (jsd_cross).
  double jsd_same = 0;
  double jsd_cross = 0;
  std::vector<int> pred;
};

// Cluster predictions: argmax of the classifier posterior on raw inputs.
std::vector<int> predict_labels(const ModelParams& params, const Matrix& features,
                                int threads = 1);

EvalResult evaluate_model(const ModelParams& params, const Matrix& features,
                          const std::vector<int>& labels, const ViewConfig& views,
                          double tau, std::uint64_t seed, int threads = 1);

struct EpochRecord {
  std::int64_t epoch = 0;  // zero-based
  double swap = 0;
  double cluster = 0;
  double penalty = 0;
  double total = 0;
  double lr = 0;  // rate used by the epoch's last step
  double wall_ms = 0;
  std::optional<EvalResult> eval;
};

// Owns the full training loop: split, batching, per-step graphs, optimizer,
// evaluation, logging and checkpoints. Training never reads labels; they
// exist only for evaluation.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset data);

  // Loads cfg.dataset_path when set, otherwise draws the synthetic dataset
  // (seeded from the run seed). Honors cfg.resume_from.
  static Trainer from_config(const TrainConfig& cfg);

  // One optimizer step. Returns false once all epochs have completed.
  bool step();

  // Runs the remaining epochs, evaluating every eval_every epochs and at the
  // end, writing config.json, metrics.jsonl, summary.csv and checkpoint.bin
  // into cfg.output_dir.
  void run();

  EvalResult evaluate_validation();

  void save(const std::string& path) const;
  void resume(const std::string& path);

  const TrainConfig& config() const { return cfg_; }
  const Dataset& data() const { return data_; }
  const ModelParams& params() const { return params_; }
  std::int64_t epoch() const { return epoch_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t batch_index() const { return batch_index_; }
  std::size_t batches_per_epoch() const { return train_idx_.size() / cfg_.batch_size; }
  const std::vector<std::size_t>& train_indices() const { return train_idx_; }
  const std::vector<std::size_t>& val_indices() const { return val_idx_; }
  const std::vector<EpochRecord>& records() const { return records_; }

 private:
  void start_epoch();
  void finish_epoch(double lr);

  TrainConfig cfg_;
  Dataset data_;
  std::vector<std::size_t> train_idx_, val_idx_;
  LrSchedule sched_;
  ModelParams params_;
  AdamState adam_;

  std::int64_t epoch_ = 0;
  std::int64_t batch_index_ = 0;
  std::int64_t iteration_ = 0;
  bool epoch_prepared_ = false;
  std::vector<std::vector<std::size_t>> epoch_batches_;

  double sum_swap_ = 0, sum_cluster_ = 0, sum_penalty_ = 0, sum_total_ = 0;
  double epoch_ms_ = 0;
  std::vector<EpochRecord> records_;
};

}  // namespace imcs
