#include "imcs/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "json.hpp"

#include "imcs/kernels.hpp"
#include "imcs/rng.hpp"
#include "imcs/selflabel.hpp"

namespace imcs {

namespace {

constexpr std::uint64_t kTagData = 0xd4;
constexpr std::uint64_t kTagSplit = 0x51;
constexpr std::uint64_t kTagInit = 0x17;
constexpr std::uint64_t kTagEpoch = 0xe9;
constexpr std::uint64_t kTagViewSeed = 0x76;
constexpr std::uint64_t kTagAgree = 0xa6;

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) out(r, c) = src(idx[r], c);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& src,
                               const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = src[idx[r]];
  return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

}  // namespace

StepGraph framework_step(Graph& g, const std::vector<Matrix>& views,
                         const BoundModel& model, const TrainConfig& cfg) {
  if (views.size() < 2)
    throw ConfigError("framework_step: need at least 2 views");
  if (views.size() < cfg.views.n_high)
    throw ConfigError("framework_step: fewer views than n_high");

  StepGraph sg;
  sg.bundle.n_high = cfg.views.n_high;
  for (std::size_t v = 0; v < views.size(); ++v) {
    Tensor x = g.constant(views[v]);
    Tensor z = encoder_forward(g, x, model);
    Tensor feat = project_embed(g, z, model);
    sg.bundle.codes.push_back(
        compute_codes(g, feat, model.prototypes, cfg.tau, static_cast<int>(v)));
    // The clustering head reads the embedding through a gradient stop: its
    // loss tunes the head only, never the encoder.
    ClassifierOut clf = classifier_forward(g, g.detach(z), model);
    sg.bundle.posteriors.push_back(clf.posterior);
    sg.bundle.logits.push_back(clf.logits);
  }
  for (std::size_t t = 0; t < sg.bundle.n_high; ++t)
    sg.bundle.targets.push_back(sinkhorn_targets(sg.bundle.codes[t].sim.value(),
                                                 cfg.epsilon, cfg.sinkhorn_iters));
  sg.loss = total_loss(g, sg.bundle, cfg.beta, cfg.alpha, cfg.logit_threshold);
  return sg;
}

std::vector<int> predict_labels(const ModelParams& params, const Matrix& features,
                                int threads) {
  kernels::set_threads(threads);
  Graph g;
  BoundModel model = bind_model(g, params, false);
  Tensor z = encoder_forward(g, g.constant(features), model);
  ClassifierOut clf = classifier_forward(g, z, model);
  return argmax_rows(clf.posterior.value());
}

EvalResult evaluate_model(const ModelParams& params, const Matrix& features,
                          const std::vector<int>& labels, const ViewConfig& views,
                          double tau, std::uint64_t seed, int threads) {
  if (features.rows() != labels.size())
    throw DimensionError("evaluate_model: one label per feature row required");
  EvalResult r;
  r.pred = predict_labels(params, features, threads);
  r.acc = clustering_accuracy(r.pred, labels);
  r.nmi_score = nmi(r.pred, labels);
  r.ari_score = ari(r.pred, labels);

  // Agreement diagnostic on a small probe: two independent full-size views
  // per sample, codes compared across the same/different samples.
  const std::size_t probe = std::min<std::size_t>(32, features.rows());
  if (probe >= 2) {
    ViewConfig probe_cfg = views;
    probe_cfg.n_high = 2;
    probe_cfg.n_low = 0;
    std::vector<std::size_t> ids(probe);
    for (std::size_t i = 0; i < probe; ++i) ids[i] = i;
    Matrix rows = gather_rows(features, ids);
    ViewSetBatch vb = make_views(rows, ids, probe_cfg, mix_seed(seed, kTagAgree));

    Graph g;
    BoundModel model = bind_model(g, params, false);
    std::vector<Matrix> codes;
    for (int v = 0; v < 2; ++v) {
      Tensor z = encoder_forward(g, g.constant(vb.views[v]), model);
      Tensor feat = project_embed(g, z, model);
      codes.push_back(compute_codes(g, feat, model.prototypes, tau, v).u.value());
    }
    const std::size_t kp = codes[0].cols();
    double same = 0, cross = 0;
    std::size_t cross_n = 0;
    for (std::size_t i = 0; i < probe; ++i) {
      std::span<const double> a(codes[0].data() + i * kp, kp);
      for (std::size_t j = 0; j < probe; ++j) {
        std::span<const double> b(codes[1].data() + j * kp, kp);
        const double d = jsd(a, b);
        if (i == j) {
          same += d;
        } else {
          cross += d;
          ++cross_n;
        }
      }
    }
    r.jsd_same = same / static_cast<double>(probe);
    r.jsd_cross = cross / static_cast<double>(cross_n);
  }
  return r;
}

Trainer::Trainer(TrainConfig cfg, Dataset data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  const std::size_t n = data_.features.rows();
  if (data_.labels.size() != n)
    throw DimensionError("trainer: one label per sample required");

  // Deterministic split: shuffle indices, carve off the validation tail.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(cfg_.seed, kTagSplit));
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(
      std::llround(cfg_.val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n)
    throw ConfigError("trainer: val_fraction leaves an empty split");
  val_idx_.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  train_idx_.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (train_idx_.size() < cfg_.batch_size)
    throw ConfigError("trainer: batch_size exceeds the training split");

  sched_ = cfg_.schedule();
  params_ = ModelParams::init(cfg_.model_dims(data_.features.cols()),
                              mix_seed(cfg_.seed, kTagInit));
  adam_ = AdamState::for_params(params_, cfg_.adam);
}

Trainer Trainer::from_config(const TrainConfig& cfg) {
  Dataset data;
  if (!cfg.dataset_path.empty()) {
    data = load_dataset(cfg.dataset_path);
  } else {
    DatasetSpec spec = cfg.synthetic;
    spec.seed = mix_seed(cfg.seed, kTagData);
    data = gen_synthetic(spec);
  }
  Trainer t(cfg, std::move(data));
  if (!cfg.resume_from.empty()) t.resume(cfg.resume_from);
  return t;
}

void Trainer::start_epoch() {
  epoch_batches_ = batches(train_idx_.size(), cfg_.batch_size,
                           mix_seed(cfg_.seed, kTagEpoch, static_cast<std::uint64_t>(epoch_)));
  epoch_prepared_ = true;
}

void Trainer::finish_epoch(double lr) {
  const auto nb = static_cast<double>(epoch_batches_.size());
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.swap = sum_swap_ / nb;
  rec.cluster = sum_cluster_ / nb;
  rec.penalty = sum_penalty_ / nb;
  rec.total = sum_total_ / nb;
  rec.lr = lr;
  rec.wall_ms = epoch_ms_;
  records_.push_back(std::move(rec));
  sum_swap_ = sum_cluster_ = sum_penalty_ = sum_total_ = 0;
  epoch_ms_ = 0;
  ++epoch_;
  batch_index_ = 0;
  epoch_prepared_ = false;
}

bool Trainer::step() {
  if (epoch_ >= static_cast<std::int64_t>(cfg_.epochs)) return false;
  if (!epoch_prepared_) start_epoch();
  const auto t0 = std::chrono::steady_clock::now();
  kernels::set_threads(cfg_.threads);

  const auto& local = epoch_batches_[static_cast<std::size_t>(batch_index_)];
  std::vector<std::size_t> ids(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) ids[i] = train_idx_[local[i]];
  Matrix rows = gather_rows(data_.features, ids);
  ViewSetBatch vb = make_views(
      rows, ids, cfg_.views,
      mix_seed(cfg_.seed, kTagViewSeed, static_cast<std::uint64_t>(epoch_),
               static_cast<std::uint64_t>(batch_index_)));

  double lr = 0;
  try {
    Graph g;
    BoundModel model = bind_model(g, params_, true);
    StepGraph sg = framework_step(g, vb.views, model, cfg_);
    g.backward(sg.loss.total);

    lr = lr_at(iteration_, epoch_, sched_);
    adam_.begin_step();
    auto list = params_.entries();
    const std::size_t proto = params_.prototype_entry();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const double wd = i == proto ? 0.0 : cfg_.weight_decay;
      adam_.update(i, *list[i].second, model.leaves[i].grad(), lr, wd);
    }
    normalize_prototypes(params_.prototypes);

    const LossReport rep = sg.loss.report();
    sum_swap_ += rep.swap;
    sum_cluster_ += rep.cluster;
    sum_penalty_ += rep.penalty;
    sum_total_ += rep.total;
  } catch (const NumericalError& e) {
    throw NumericalError("epoch " + std::to_string(epoch_) + " batch " +
                         std::to_string(batch_index_) + ": " + e.what());
  }

  ++iteration_;
  ++batch_index_;
  epoch_ms_ += wall_ms_since(t0);
  if (batch_index_ == static_cast<std::int64_t>(epoch_batches_.size()))
    finish_epoch(lr);
  return true;
}

EvalResult Trainer::evaluate_validation() {
  return evaluate_model(params_, gather_rows(data_.features, val_idx_),
                        gather_labels(data_.labels, val_idx_), cfg_.views, cfg_.tau,
                        mix_seed(cfg_.seed, kTagAgree, static_cast<std::uint64_t>(epoch_)),
                        cfg_.threads);
}

void Trainer::run() {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.output_dir);
  const fs::path out(cfg_.output_dir);
  {
    std::ofstream cfg_out(out / "config.json", std::ios::trunc);
    cfg_out << config_to_json_text(cfg_) << "\n";
  }
  const bool fresh = iteration_ == 0;
  std::ofstream jsonl(out / "metrics.jsonl",
                      fresh ? std::ios::trunc : std::ios::app);
  std::ofstream csv(out / "summary.csv", fresh ? std::ios::trunc : std::ios::app);
  if (!jsonl || !csv)
    throw IoError(cfg_.output_dir + ": cannot open log files");
  if (fresh)
    csv << "epoch,swap,cluster,penalty,total,lr,wall_ms,acc,nmi,ari,jsd_same,jsd_cross\n";

  std::size_t logged = records_.size();
  while (step()) {
    if (records_.size() == logged) continue;
    EpochRecord& rec = records_.back();
    const bool eval_now =
        (rec.epoch + 1) % static_cast<std::int64_t>(cfg_.eval_every) == 0 ||
        rec.epoch + 1 == static_cast<std::int64_t>(cfg_.epochs);
    if (eval_now) rec.eval = evaluate_validation();

    nlohmann::json line{{"epoch", rec.epoch}, {"swap", rec.swap},
                        {"cluster", rec.cluster}, {"penalty", rec.penalty},
                        {"total", rec.total},     {"lr", rec.lr},
                        {"wall_ms", rec.wall_ms}};
    csv << rec.epoch << "," << rec.swap << "," << rec.cluster << ","
        << rec.penalty << "," << rec.total << "," << rec.lr << "," << rec.wall_ms;
    if (rec.eval) {
      line["acc"] = rec.eval->acc;
      line["nmi"] = rec.eval->nmi_score;
      line["ari"] = rec.eval->ari_score;
      line["jsd_same"] = rec.eval->jsd_same;
      line["jsd_cross"] = rec.eval->jsd_cross;
      csv << "," << rec.eval->acc << "," << rec.eval->nmi_score << ","
          << rec.eval->ari_score << "," << rec.eval->jsd_same << ","
          << rec.eval->jsd_cross;
    } else {
      csv << ",,,,,";
    }
    jsonl << line.dump() << "\n";
    csv << "\n";
    jsonl.flush();
    csv.flush();
    if (eval_now) save((out / "checkpoint.bin").string());
    logged = records_.size();
  }
  save((out / "checkpoint.bin").string());
}

void Trainer::save(const std::string& path) const {
  CheckpointMeta meta;
  meta.epoch = epoch_;
  meta.iteration = iteration_;
  meta.batch_index = batch_index_;
  meta.arch = arch_hash(params_.dims());
  save_checkpoint(path, params_, adam_, meta);
}

void Trainer::resume(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  const ModelDims expect = cfg_.model_dims(data_.features.cols());
  if (!(ck.dims == expect))
    throw ConfigError(path + ": checkpoint architecture does not match config");
  params_ = std::move(ck.params);
  adam_ = std::move(ck.adam);
  epoch_ = ck.meta.epoch;
  iteration_ = ck.meta.iteration;
  batch_index_ = ck.meta.batch_index;
  epoch_prepared_ = false;
  if (batch_index_ > 0) {
    start_epoch();
    if (batch_index_ >= static_cast<std::int64_t>(epoch_batches_.size()))
      throw ConfigError(path + ": checkpoint batch index out of range");
  }
}

}  // namespace imcs
