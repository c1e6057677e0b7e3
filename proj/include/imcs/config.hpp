#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imcs/dataviews.hpp"
#include "imcs/network.hpp"

namespace imcs {

// Full description of a training run. Defaults are the working desk-scale
// setup; validate() rejects inconsistent combinations with ConfigError.
struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 60;
  std::size_t batch_size = 64;

  // model
  std::size_t k = 4;
  std::size_t k_prime = 64;
  std::vector<std::size_t> encoder_hidden{256, 256};
  std::size_t embedding_dim = 128;
  std::size_t projection_dim = 32;
  std::size_t classifier_hidden = 256;

  // objective
  double tau = 0.1;
  double epsilon = 0.05;
  int sinkhorn_iters = 3;
  double beta = 4.0;
  double alpha = 0.01;
  double logit_threshold = 5.0;

  // optimizer
  double base_lr = 5e-4;
  std::int64_t warmup_iters = 100;
  std::vector<double> decay_milestones{0.3, 0.6, 0.8};  // fractions of epochs
  double decay_factor = 0.4;
  double weight_decay = 1e-5;
  AdamConfig adam;

  ViewConfig views;

  // data: either a container file or a synthetic spec (whose seed is derived
  // from the run seed, so different runs draw different datasets)
  std::string dataset_path;
  DatasetSpec synthetic;
  double val_fraction = 0.2;

  // run control
  std::size_t eval_every = 5;
  int threads = 1;
  std::string output_dir = "out";
  std::string resume_from;

  void validate() const;
  ModelDims model_dims(std::size_t input_dim) const;
  LrSchedule schedule() const;
};

// JSON round-trip. Parsing starts from the defaults, merges the document on
// top and rejects unknown keys or wrong value types.
TrainConfig config_from_json_text(const std::string& text);
TrainConfig config_from_json_file(const std::string& path);
std::string config_to_json_text(const TrainConfig& cfg);

// "section.key=value" override, value parsed as JSON when possible.
void apply_override(TrainConfig& cfg, const std::string& assignment);

}  // namespace imcs
