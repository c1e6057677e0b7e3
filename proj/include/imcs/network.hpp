#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imcs/tensor.hpp"

namespace imcs {

// Architecture description. The encoder maps input_dim through the hidden
// widths (ReLU) to embedding_dim (linear); the projection maps the embedding
// to projection_dim and length-normalizes; prototypes are k_prime unit rows
// in projection space; the classifier maps the embedding through two ReLU
// layers of width classifier_hidden to k logits.
struct ModelDims {
  std::size_t input_dim = 32;
  std::vector<std::size_t> encoder_hidden{256, 256};
  std::size_t embedding_dim = 128;
  std::size_t projection_dim = 32;
  std::size_t k_prime = 64;
  std::size_t classifier_hidden = 256;
  std::size_t k = 4;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// 64-bit fingerprint of an architecture; checkpoints embed it so a resume
// against different dims fails loudly.
std::uint64_t arch_hash(const ModelDims& dims);

struct LinearLayer {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
};

struct ModelParams {
  std::vector<LinearLayer> encoder;     // hidden... + linear output
  LinearLayer projection;
  Matrix prototypes;                    // k' x projection_dim, unit rows
  std::vector<LinearLayer> classifier;  // 2 hidden + linear output

  // Gaussian init scaled by fan-in, prototypes length-normalized.
  static ModelParams init(const ModelDims& dims, std::uint64_t seed);

  ModelDims dims() const;

  // Canonical (name, matrix) order; the optimizer, the checkpoint format and
  // bind_model all follow it.
  std::vector<std::pair<std::string, Matrix*>> entries();
  std::vector<std::pair<std::string, const Matrix*>> entries() const;

  // Index into entries() of the prototype matrix (exempt from weight decay).
  std::size_t prototype_entry() const { return 2 * encoder.size() + 2; }
};

// Rescales every prototype row to unit length. Throws DegenerateRowError on
// a (near-)zero row.
void normalize_prototypes(Matrix& prototypes);

// Graph-bound copy of the parameters for one forward/backward pass.
// leaves[i] corresponds to ModelParams::entries()[i].
struct BoundLinear {
  Tensor w, b;
};
struct BoundModel {
  std::vector<BoundLinear> encoder;
  BoundLinear projection;
  Tensor prototypes;
  std::vector<BoundLinear> classifier;
  std::vector<Tensor> leaves;
};
BoundModel bind_model(Graph& g, const ModelParams& params, bool trainable);

// x: batch x input_dim -> batch x embedding_dim.
Tensor encoder_forward(Graph& g, Tensor x, const BoundModel& model);
// z: batch x embedding_dim -> batch x projection_dim, unit rows.
Tensor project_embed(Graph& g, Tensor z, const BoundModel& model);

struct ClassifierOut {
  Tensor logits;     // batch x k
  Tensor posterior;  // batch x k, rows sum to 1
};
ClassifierOut classifier_forward(Graph& g, Tensor z, const BoundModel& model);

// Adam with decoupled weight decay (the decay shrinks the parameter before
// the moment update and never enters the moments).
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamSlot {
  Matrix m, v;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<AdamSlot> slots;  // entries() order
  std::int64_t step = 0;

  static AdamState for_params(const ModelParams& params, AdamConfig cfg);
  // Call once per optimizer step, before the per-parameter updates.
  void begin_step() { ++step; }
  void update(std::size_t slot, Matrix& param, const Matrix& grad, double lr,
              double weight_decay);
};

// Warmup ramps linearly over the first warmup_iters iterations; afterwards
// the rate is base_lr times decay_factor per milestone epoch reached.
struct LrSchedule {
  double base_lr = 5e-4;
  std::int64_t warmup_iters = 100;
  std::vector<std::int64_t> decay_epochs;
  double decay_factor = 0.4;
};
double lr_at(std::int64_t iteration, std::int64_t epoch, const LrSchedule& s);

// Training-progress counters stored alongside the parameters.
struct CheckpointMeta {
  std::int64_t epoch = 0;       // epochs fully completed
  std::int64_t iteration = 0;   // optimizer steps taken
  std::int64_t batch_index = 0; // batches consumed in the current epoch
  std::uint64_t arch = 0;       // arch_hash of the saved dims
};

struct Checkpoint {
  ModelDims dims;
  ModelParams params;
  AdamState adam;
  CheckpointMeta meta;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const AdamState& adam, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace imcs
