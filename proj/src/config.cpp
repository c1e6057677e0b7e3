#include "imcs/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "imcs/errors.hpp"

namespace imcs {

namespace {

using nlohmann::json;

json to_json(const TrainConfig& c) {
  return json{
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"model",
       {{"k", c.k},
        {"k_prime", c.k_prime},
        {"encoder_hidden", c.encoder_hidden},
        {"embedding_dim", c.embedding_dim},
        {"projection_dim", c.projection_dim},
        {"classifier_hidden", c.classifier_hidden}}},
      {"objective",
       {{"tau", c.tau},
        {"epsilon", c.epsilon},
        {"sinkhorn_iters", c.sinkhorn_iters},
        {"beta", c.beta},
        {"alpha", c.alpha},
        {"logit_threshold", c.logit_threshold}}},
      {"optimizer",
       {{"base_lr", c.base_lr},
        {"warmup_iters", c.warmup_iters},
        {"decay_milestones", c.decay_milestones},
        {"decay_factor", c.decay_factor},
        {"weight_decay", c.weight_decay},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"eps", c.adam.eps}}},
      {"views",
       {{"n_high", c.views.n_high},
        {"n_low", c.views.n_low},
        {"high_keep", c.views.high_keep},
        {"low_keep", c.views.low_keep},
        {"jitter_std", c.views.jitter_std},
        {"mask_prob", c.views.mask_prob}}},
      {"data",
       {{"path", c.dataset_path},
        {"n", c.synthetic.n},
        {"input_dim", c.synthetic.input_dim},
        {"k_true", c.synthetic.k_true},
        {"separation", c.synthetic.separation},
        {"noise_std", c.synthetic.noise_std},
        {"val_fraction", c.val_fraction}}},
      {"run",
       {{"eval_every", c.eval_every},
        {"threads", c.threads},
        {"output_dir", c.output_dir}}}};
}

TrainConfig from_json(const json& j) {
  TrainConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  const json& m = j.at("model");
  c.k = m.at("k").get<std::size_t>();
  c.k_prime = m.at("k_prime").get<std::size_t>();
  c.encoder_hidden = m.at("encoder_hidden").get<std::vector<std::size_t>>();
  c.embedding_dim = m.at("embedding_dim").get<std::size_t>();
  c.projection_dim = m.at("projection_dim").get<std::size_t>();
  c.classifier_hidden = m.at("classifier_hidden").get<std::size_t>();
  const json& o = j.at("objective");
  c.tau = o.at("tau").get<double>();
  c.epsilon = o.at("epsilon").get<double>();
  c.sinkhorn_iters = o.at("sinkhorn_iters").get<int>();
  c.beta = o.at("beta").get<double>();
  c.alpha = o.at("alpha").get<double>();
  c.logit_threshold = o.at("logit_threshold").get<double>();
  const json& p = j.at("optimizer");
  c.base_lr = p.at("base_lr").get<double>();
  c.warmup_iters = p.at("warmup_iters").get<std::int64_t>();
  c.decay_milestones = p.at("decay_milestones").get<std::vector<double>>();
  c.decay_factor = p.at("decay_factor").get<double>();
  c.weight_decay = p.at("weight_decay").get<double>();
  c.adam.beta1 = p.at("beta1").get<double>();
  c.adam.beta2 = p.at("beta2").get<double>();
  c.adam.eps = p.at("eps").get<double>();
  const json& v = j.at("views");
  c.views.n_high = v.at("n_high").get<std::size_t>();
  c.views.n_low = v.at("n_low").get<std::size_t>();
  c.views.high_keep = v.at("high_keep").get<double>();
  c.views.low_keep = v.at("low_keep").get<double>();
  c.views.jitter_std = v.at("jitter_std").get<double>();
  c.views.mask_prob = v.at("mask_prob").get<double>();
  const json& d = j.at("data");
  c.dataset_path = d.at("path").get<std::string>();
  c.synthetic.n = d.at("n").get<std::size_t>();
  c.synthetic.input_dim = d.at("input_dim").get<std::size_t>();
  c.synthetic.k_true = d.at("k_true").get<std::size_t>();
  c.synthetic.separation = d.at("separation").get<double>();
  c.synthetic.noise_std = d.at("noise_std").get<double>();
  c.val_fraction = d.at("val_fraction").get<double>();
  const json& r = j.at("run");
  c.eval_every = r.at("eval_every").get<std::size_t>();
  c.threads = r.at("threads").get<int>();
  c.output_dir = r.at("output_dir").get<std::string>();
  return c;
}

// Merge `user` into `base`, insisting every user key already exists in the
// defaults with a compatible type. Flags typos instead of ignoring them.
void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object())
    throw ConfigError("config: expected an object at '" +
                      (prefix.empty() ? std::string("<root>") : prefix) + "'");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_checked(slot, value, path);
      continue;
    }
    const bool both_numeric = slot.is_number() && value.is_number();
    const bool both_array = slot.is_array() && value.is_array();
    const bool both_string = slot.is_string() && value.is_string();
    if (!both_numeric && !both_array && !both_string)
      throw ConfigError("config: wrong value type for '" + path + "'");
    slot = value;
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("config: batch_size must be >= 2");
  if (k < 2) throw ConfigError("config: model.k must be >= 2");
  if (k_prime < k) throw ConfigError("config: model.k_prime must be >= model.k");
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ConfigError("config: objective.tau must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("config: objective.epsilon must be positive");
  if (sinkhorn_iters < 1)
    throw ConfigError("config: objective.sinkhorn_iters must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ConfigError("config: objective.beta must be >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ConfigError("config: objective.alpha must be >= 0");
  if (!(logit_threshold > 0.0) || !std::isfinite(logit_threshold))
    throw ConfigError("config: objective.logit_threshold must be positive");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr))
    throw ConfigError("config: optimizer.base_lr must be positive");
  if (warmup_iters < 0)
    throw ConfigError("config: optimizer.warmup_iters must be >= 0");
  for (double f : decay_milestones)
    if (!(f > 0.0) || !(f < 1.0))
      throw ConfigError("config: optimizer.decay_milestones must lie in (0, 1)");
  if (!(decay_factor > 0.0) || decay_factor > 1.0)
    throw ConfigError("config: optimizer.decay_factor must be in (0, 1]");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
    throw ConfigError("config: optimizer.weight_decay must be >= 0");
  views.validate();
  if (dataset_path.empty()) synthetic.validate();
  if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
    throw ConfigError("config: data.val_fraction must be in (0, 1)");
  if (eval_every < 1) throw ConfigError("config: run.eval_every must be >= 1");
  if (threads < 1) throw ConfigError("config: run.threads must be >= 1");
  ModelDims dims = model_dims(dataset_path.empty() ? synthetic.input_dim : 1);
  dims.validate();
}

ModelDims TrainConfig::model_dims(std::size_t input_dim) const {
  ModelDims d;
  d.input_dim = input_dim;
  d.encoder_hidden = encoder_hidden;
  d.embedding_dim = embedding_dim;
  d.projection_dim = projection_dim;
  d.k_prime = k_prime;
  d.classifier_hidden = classifier_hidden;
  d.k = k;
  return d;
}

LrSchedule TrainConfig::schedule() const {
  LrSchedule s;
  s.base_lr = base_lr;
  s.warmup_iters = warmup_iters;
  s.decay_factor = decay_factor;
  for (double f : decay_milestones)
    s.decay_epochs.push_back(
        static_cast<std::int64_t>(std::floor(f * static_cast<double>(epochs))));
  return s;
}

TrainConfig config_from_json_text(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  json merged = to_json(TrainConfig{});
  merge_checked(merged, user, "");
  TrainConfig c = from_json(merged);
  c.validate();
  return c;
}

TrainConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const TrainConfig& cfg) {
  return to_json(cfg).dump(2);
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must look like section.key=value, got '" +
                      assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // unquoted strings (paths etc.)
  }

  json patch = value;
  for (auto it = key.rbegin(); it != key.rend();) {
    auto dot = std::find(it, key.rend(), '.');
    const std::string part(dot.base(), it.base());
    patch = json{{part, patch}};
    if (dot == key.rend()) break;
    it = std::next(dot);
  }

  json merged = to_json(cfg);
  merge_checked(merged, patch, "");
  TrainConfig next = from_json(merged);
  next.resume_from = cfg.resume_from;
  next.validate();
  cfg = next;
}

}  // namespace imcs
