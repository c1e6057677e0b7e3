#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "imcs/config.hpp"
#include "imcs/container.hpp"
#include "imcs/dataviews.hpp"
#include "imcs/errors.hpp"
#include "imcs/network.hpp"
#include "imcs/rng.hpp"
#include "imcs/selflabel.hpp"
#include "imcs/trainer.hpp"

namespace {

using nlohmann::json;

int cmd_gen_data(const imcs::DatasetSpec& spec, const std::string& out) {
  imcs::Dataset data = imcs::gen_synthetic(spec);
  imcs::save_dataset(out, data);
  json report{{"path", out},
              {"n", spec.n},
              {"input_dim", spec.input_dim},
              {"k_true", spec.k_true},
              {"separation", spec.separation},
              {"noise_std", spec.noise_std},
              {"seed", spec.seed}};
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, bool seed_set, std::uint64_t seed,
              const std::string& out, const std::string& resume,
              const std::vector<std::string>& overrides) {
  imcs::TrainConfig cfg;
  if (!config_path.empty()) cfg = imcs::config_from_json_file(config_path);
  if (seed_set) imcs::apply_override(cfg, "seed=" + std::to_string(seed));
  if (!out.empty()) imcs::apply_override(cfg, "run.output_dir=" + out);
  for (const auto& o : overrides) imcs::apply_override(cfg, o);
  cfg.resume_from = resume;
  cfg.validate();

  imcs::Trainer trainer = imcs::Trainer::from_config(cfg);
  trainer.run();

  json report{{"epochs", trainer.epoch()},
              {"iterations", trainer.iteration()},
              {"output_dir", cfg.output_dir}};
  // Resuming a checkpoint that already reached its epoch budget trains no
  // further epochs, so there may be no record to report.
  if (!trainer.records().empty()) {
    const imcs::EpochRecord& last = trainer.records().back();
    report["total"] = last.total;
    if (last.eval) {
      report["acc"] = last.eval->acc;
      report["nmi"] = last.eval->nmi_score;
      report["ari"] = last.eval->ari_score;
      report["jsd_same"] = last.eval->jsd_same;
      report["jsd_cross"] = last.eval->jsd_cross;
    }
  }
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path,
             std::uint64_t seed) {
  imcs::Checkpoint ck = imcs::load_checkpoint(checkpoint);
  imcs::Dataset data = imcs::load_dataset(data_path);
  if (data.features.cols() != ck.dims.input_dim)
    throw imcs::ConfigError("eval: dataset dimension does not match checkpoint");
  imcs::EvalResult r = imcs::evaluate_model(ck.params, data.features, data.labels,
                                            imcs::ViewConfig{}, 0.1, seed);
  json report{{"n", data.labels.size()},
              {"acc", r.acc},
              {"nmi", r.nmi_score},
              {"ari", r.ari_score},
              {"jsd_same", r.jsd_same},
              {"jsd_cross", r.jsd_cross}};
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_metrics(const std::string& pred_path, const std::string& truth_path) {
  auto read_labels = [](const std::string& path) {
    imcs::Dataset d = imcs::load_dataset(path);
    return d.labels;
  };
  const std::vector<int> pred = read_labels(pred_path);
  const std::vector<int> truth = read_labels(truth_path);
  json report{{"acc", imcs::clustering_accuracy(pred, truth)},
              {"nmi", imcs::nmi(pred, truth)},
              {"ari", imcs::ari(pred, truth)}};
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_sinkhorn(const std::string& in, double epsilon, int iterations,
                 const std::string& out) {
  auto arrays = imcs::read_container(in);
  const imcs::Matrix* scores = nullptr;
  for (const auto& a : arrays)
    if (a.name == "scores") scores = &a.data;
  if (!scores) throw imcs::IoError(in + ": container needs a 'scores' array");

  imcs::Targets t = imcs::sinkhorn_targets(*scores, epsilon, iterations);
  auto [row_res, col_res] = imcs::marginal_residual(t.q);
  if (!out.empty()) imcs::write_container(out, {{"q", t.q}});
  json report{{"rows", t.q.rows()},
              {"cols", t.q.cols()},
              {"epsilon", epsilon},
              {"iterations", iterations},
              {"row_residual", row_res},
              {"col_residual", col_res}};
  std::cout << report.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-labelling clustering trainer"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Draw a synthetic blob dataset");
  imcs::DatasetSpec spec;
  std::string gen_out;
  gen->add_option("--n", spec.n, "Sample count");
  gen->add_option("--dim", spec.input_dim, "Input dimension");
  gen->add_option("--k", spec.k_true, "Class count");
  gen->add_option("--separation", spec.separation, "Centroid distance in noise units");
  gen->add_option("--noise-std", spec.noise_std, "Noise scale");
  gen->add_option("--seed", spec.seed, "Random seed");
  gen->add_option("--out", gen_out, "Output container path")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_config, train_out, train_resume;
  std::uint64_t train_seed = 0;
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "JSON config file");
  auto* seed_opt = train->add_option("--seed", train_seed, "Run seed");
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--resume", train_resume, "Checkpoint to resume from");
  train->add_option("--set", train_sets, "Config override key=value (repeatable)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data;
  std::uint64_t eval_seed = 1;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
  eval->add_option("--data", eval_data, "Dataset container path")->required();
  eval->add_option("--seed", eval_seed, "Seed for the agreement diagnostic");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Score stored predictions");
  std::string pred_path, truth_path;
  metrics->add_option("pred", pred_path, "Predictions container")->required();
  metrics->add_option("truth", truth_path, "Ground-truth container")->required();

  // sinkhorn
  auto* sink = app.add_subcommand("sinkhorn", "Balance a stored score matrix");
  std::string sink_in, sink_out;
  double sink_eps = 0.05;
  int sink_iters = 3;
  sink->add_option("--in", sink_in, "Container with a 'scores' array")->required();
  sink->add_option("--eps", sink_eps, "Entropy scale");
  sink->add_option("--iters", sink_iters, "Balancing rounds");
  sink->add_option("--out", sink_out, "Optional output container for q");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(spec, gen_out);
    if (train->parsed())
      return cmd_train(train_config, seed_opt->count() > 0, train_seed, train_out,
                       train_resume, train_sets);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_seed);
    if (metrics->parsed()) return cmd_metrics(pred_path, truth_path);
    if (sink->parsed()) return cmd_sinkhorn(sink_in, sink_eps, sink_iters, sink_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
