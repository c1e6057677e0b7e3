#include "imcs/network.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "imcs/container.hpp"
#include "imcs/rng.hpp"

namespace imcs {

namespace {

ModelParams shaped(const ModelDims& d) {
  ModelParams p;
  std::size_t in = d.input_dim;
  for (std::size_t h : d.encoder_hidden) {
    p.encoder.push_back({Matrix(in, h), Matrix(1, h)});
    in = h;
  }
  p.encoder.push_back({Matrix(in, d.embedding_dim), Matrix(1, d.embedding_dim)});
  p.projection = {Matrix(d.embedding_dim, d.projection_dim), Matrix(1, d.projection_dim)};
  p.prototypes = Matrix(d.k_prime, d.projection_dim);
  p.classifier.push_back(
      {Matrix(d.embedding_dim, d.classifier_hidden), Matrix(1, d.classifier_hidden)});
  p.classifier.push_back(
      {Matrix(d.classifier_hidden, d.classifier_hidden), Matrix(1, d.classifier_hidden)});
  p.classifier.push_back({Matrix(d.classifier_hidden, d.k), Matrix(1, d.k)});
  return p;
}

void fill_gaussian(Matrix& m, Rng& rng, double std_dev) {
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_normal() * std_dev;
}

Tensor linear_stack(Graph& g, Tensor h, const std::vector<BoundLinear>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = g.add_rowvec(g.matmul(h, layers[i].w), layers[i].b);
    if (i + 1 < layers.size()) h = g.relu(h);
  }
  return h;
}

}  // namespace

void ModelDims::validate() const {
  if (input_dim == 0 || embedding_dim == 0 || projection_dim == 0 ||
      classifier_hidden == 0)
    throw ConfigError("model dims: layer widths must be >= 1");
  for (std::size_t h : encoder_hidden)
    if (h == 0) throw ConfigError("model dims: encoder hidden width must be >= 1");
  if (k < 2) throw ConfigError("model dims: k must be >= 2");
  if (k_prime < 2) throw ConfigError("model dims: k_prime must be >= 2");
}

std::uint64_t arch_hash(const ModelDims& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mixin = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  mixin(d.input_dim);
  mixin(d.encoder_hidden.size());
  for (std::size_t v : d.encoder_hidden) mixin(v);
  mixin(d.embedding_dim);
  mixin(d.projection_dim);
  mixin(d.k_prime);
  mixin(d.classifier_hidden);
  mixin(d.k);
  return h;
}

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  ModelParams p = shaped(dims);
  auto list = p.entries();
  for (std::size_t i = 0; i < list.size(); ++i) {
    Matrix& m = *list[i].second;
    Rng rng(mix_seed(seed, 0x706172616dULL, i));
    const std::string& name = list[i].first;
    if (name.find(".b") != std::string::npos) continue;  // biases start at 0
    if (name == "prototypes") {
      fill_gaussian(m, rng, 1.0);
      normalize_prototypes(m);
      continue;
    }
    // Fan-in scaled init: ReLU-feeding layers get the factor-2 variant.
    const bool feeds_relu =
        (name.starts_with("encoder.w") && name != "encoder.w" + std::to_string(p.encoder.size() - 1)) ||
        (name.starts_with("classifier.w") && name != "classifier.w" + std::to_string(p.classifier.size() - 1));
    const double fan_in = static_cast<double>(m.rows());
    fill_gaussian(m, rng, std::sqrt((feeds_relu ? 2.0 : 1.0) / fan_in));
  }
  return p;
}

ModelDims ModelParams::dims() const {
  ModelDims d;
  d.input_dim = encoder.front().w.rows();
  d.encoder_hidden.clear();
  for (std::size_t i = 0; i + 1 < encoder.size(); ++i)
    d.encoder_hidden.push_back(encoder[i].w.cols());
  d.embedding_dim = encoder.back().w.cols();
  d.projection_dim = projection.w.cols();
  d.k_prime = prototypes.rows();
  d.classifier_hidden = classifier.front().w.cols();
  d.k = classifier.back().w.cols();
  return d;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::entries() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    out.emplace_back("encoder.w" + std::to_string(i), &encoder[i].w);
    out.emplace_back("encoder.b" + std::to_string(i), &encoder[i].b);
  }
  out.emplace_back("projection.w", &projection.w);
  out.emplace_back("projection.b", &projection.b);
  out.emplace_back("prototypes", &prototypes);
  for (std::size_t i = 0; i < classifier.size(); ++i) {
    out.emplace_back("classifier.w" + std::to_string(i), &classifier[i].w);
    out.emplace_back("classifier.b" + std::to_string(i), &classifier[i].b);
  }
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::entries() const {
  auto mutable_list = const_cast<ModelParams*>(this)->entries();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, m] : mutable_list) out.emplace_back(std::move(name), m);
  return out;
}

void normalize_prototypes(Matrix& prototypes) {
  for (std::size_t i = 0; i < prototypes.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < prototypes.cols(); ++j)
      s += prototypes(i, j) * prototypes(i, j);
    const double norm = std::sqrt(s);
    if (norm < 1e-12)
      throw DegenerateRowError("normalize_prototypes: prototype " +
                               std::to_string(i) + " has near-zero norm");
    for (std::size_t j = 0; j < prototypes.cols(); ++j) prototypes(i, j) /= norm;
  }
}

BoundModel bind_model(Graph& g, const ModelParams& params, bool trainable) {
  BoundModel b;
  auto list = params.entries();
  b.leaves.reserve(list.size());
  for (auto& [name, m] : list) b.leaves.push_back(g.leaf(*m, trainable));
  std::size_t i = 0;
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    b.encoder.push_back({b.leaves[i], b.leaves[i + 1]});
    i += 2;
  }
  b.projection = {b.leaves[i], b.leaves[i + 1]};
  i += 2;
  b.prototypes = b.leaves[i++];
  for (std::size_t l = 0; l < params.classifier.size(); ++l) {
    b.classifier.push_back({b.leaves[i], b.leaves[i + 1]});
    i += 2;
  }
  return b;
}

Tensor encoder_forward(Graph& g, Tensor x, const BoundModel& model) {
  return linear_stack(g, x, model.encoder);
}

Tensor project_embed(Graph& g, Tensor z, const BoundModel& model) {
  Tensor p = g.add_rowvec(g.matmul(z, model.projection.w), model.projection.b);
  return g.l2_normalize_rows(p);
}

ClassifierOut classifier_forward(Graph& g, Tensor z, const BoundModel& model) {
  ClassifierOut out;
  out.logits = linear_stack(g, z, model.classifier);
  out.posterior = g.softmax_rows(out.logits, 1.0);
  return out;
}

AdamState AdamState::for_params(const ModelParams& params, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  for (auto& [name, m] : params.entries())
    s.slots.push_back({Matrix(m->rows(), m->cols()), Matrix(m->rows(), m->cols())});
  return s;
}

void AdamState::update(std::size_t slot, Matrix& param, const Matrix& grad,
                       double lr, double weight_decay) {
  if (slot >= slots.size())
    throw ParameterError("adam: slot index out of range");
  if (step < 1)
    throw ParameterError("adam: begin_step() must run before updates");
  AdamSlot& s = slots[slot];
  if (!param.same_shape(grad) || !param.same_shape(s.m))
    throw DimensionError("adam: parameter/gradient/moment shapes disagree");

  // Decoupled decay: shrink the parameter directly, keep moments clean.
  if (weight_decay != 0.0)
    for (std::size_t i = 0; i < param.size(); ++i)
      param.data()[i] -= lr * weight_decay * param.data()[i];

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i];
    s.m.data()[i] = cfg.beta1 * s.m.data()[i] + (1.0 - cfg.beta1) * g;
    s.v.data()[i] = cfg.beta2 * s.v.data()[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = s.m.data()[i] / bc1;
    const double vhat = s.v.data()[i] / bc2;
    param.data()[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  if (!param.all_finite())
    throw NumericalError("adam: parameters became non-finite");
}

double lr_at(std::int64_t iteration, std::int64_t epoch, const LrSchedule& s) {
  if (iteration < 0 || epoch < 0)
    throw ParameterError("lr_at: iteration and epoch must be >= 0");
  if (!(s.base_lr > 0.0)) throw ParameterError("lr_at: base_lr must be positive");
  if (s.warmup_iters > 0 && iteration < s.warmup_iters)
    return s.base_lr * static_cast<double>(iteration + 1) /
           static_cast<double>(s.warmup_iters);
  double lr = s.base_lr;
  for (std::int64_t e : s.decay_epochs)
    if (epoch >= e) lr *= s.decay_factor;
  return lr;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const AdamState& adam, const CheckpointMeta& meta) {
  const ModelDims d = params.dims();
  std::vector<NamedArray> arrays;

  Matrix dims_row(1, 7 + d.encoder_hidden.size());
  std::size_t j = 0;
  dims_row(0, j++) = static_cast<double>(d.input_dim);
  dims_row(0, j++) = static_cast<double>(d.embedding_dim);
  dims_row(0, j++) = static_cast<double>(d.projection_dim);
  dims_row(0, j++) = static_cast<double>(d.k_prime);
  dims_row(0, j++) = static_cast<double>(d.classifier_hidden);
  dims_row(0, j++) = static_cast<double>(d.k);
  dims_row(0, j++) = static_cast<double>(d.encoder_hidden.size());
  for (std::size_t h : d.encoder_hidden) dims_row(0, j++) = static_cast<double>(h);
  arrays.push_back({"dims", std::move(dims_row)});

  Matrix meta_row(1, 4);
  meta_row(0, 0) = static_cast<double>(meta.epoch);
  meta_row(0, 1) = static_cast<double>(meta.iteration);
  meta_row(0, 2) = static_cast<double>(meta.batch_index);
  meta_row(0, 3) = std::bit_cast<double>(arch_hash(d));
  arrays.push_back({"meta", std::move(meta_row)});

  Matrix adam_row(1, 4);
  adam_row(0, 0) = static_cast<double>(adam.step);
  adam_row(0, 1) = adam.cfg.beta1;
  adam_row(0, 2) = adam.cfg.beta2;
  adam_row(0, 3) = adam.cfg.eps;
  arrays.push_back({"adam.meta", std::move(adam_row)});

  auto list = params.entries();
  if (adam.slots.size() != list.size())
    throw ParameterError("save_checkpoint: optimizer state does not match parameters");
  for (std::size_t i = 0; i < list.size(); ++i) {
    arrays.push_back({list[i].first, *list[i].second});
    arrays.push_back({"adam.m." + list[i].first, adam.slots[i].m});
    arrays.push_back({"adam.v." + list[i].first, adam.slots[i].v});
  }
  write_container(path, arrays);
}

Checkpoint load_checkpoint(const std::string& path) {
  auto arrays = read_container(path);
  std::map<std::string, Matrix> by_name;
  for (auto& a : arrays) by_name.emplace(std::move(a.name), std::move(a.data));

  auto fetch = [&](const std::string& name) -> const Matrix& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw IoError(path + ": checkpoint missing array '" + name + "'");
    return it->second;
  };

  const Matrix& dims_row = fetch("dims");
  if (dims_row.rows() != 1 || dims_row.cols() < 7)
    throw IoError(path + ": malformed dims array");
  ModelDims d;
  d.input_dim = static_cast<std::size_t>(dims_row(0, 0));
  d.embedding_dim = static_cast<std::size_t>(dims_row(0, 1));
  d.projection_dim = static_cast<std::size_t>(dims_row(0, 2));
  d.k_prime = static_cast<std::size_t>(dims_row(0, 3));
  d.classifier_hidden = static_cast<std::size_t>(dims_row(0, 4));
  d.k = static_cast<std::size_t>(dims_row(0, 5));
  const auto n_hidden = static_cast<std::size_t>(dims_row(0, 6));
  if (dims_row.cols() != 7 + n_hidden)
    throw IoError(path + ": malformed dims array");
  d.encoder_hidden.clear();
  for (std::size_t i = 0; i < n_hidden; ++i)
    d.encoder_hidden.push_back(static_cast<std::size_t>(dims_row(0, 7 + i)));
  d.validate();

  Checkpoint ck;
  ck.dims = d;
  ck.params = shaped(d);

  const Matrix& meta_row = fetch("meta");
  if (meta_row.rows() != 1 || meta_row.cols() != 4)
    throw IoError(path + ": malformed meta array");
  ck.meta.epoch = static_cast<std::int64_t>(meta_row(0, 0));
  ck.meta.iteration = static_cast<std::int64_t>(meta_row(0, 1));
  ck.meta.batch_index = static_cast<std::int64_t>(meta_row(0, 2));
  ck.meta.arch = std::bit_cast<std::uint64_t>(meta_row(0, 3));
  if (ck.meta.arch != arch_hash(d))
    throw IoError(path + ": architecture fingerprint mismatch");

  const Matrix& adam_row = fetch("adam.meta");
  if (adam_row.rows() != 1 || adam_row.cols() != 4)
    throw IoError(path + ": malformed adam.meta array");
  ck.adam.cfg.beta1 = adam_row(0, 1);
  ck.adam.cfg.beta2 = adam_row(0, 2);
  ck.adam.cfg.eps = adam_row(0, 3);
  ck.adam.step = static_cast<std::int64_t>(adam_row(0, 0));

  auto list = ck.params.entries();
  for (auto& [name, m] : list) {
    const Matrix& stored = fetch(name);
    const Matrix& am = fetch("adam.m." + name);
    const Matrix& av = fetch("adam.v." + name);
    if (!stored.same_shape(*m) || !am.same_shape(*m) || !av.same_shape(*m))
      throw IoError(path + ": array '" + name + "' has unexpected shape");
    *m = stored;
    ck.adam.slots.push_back({am, av});
  }
  return ck;
}

}  // namespace imcs
