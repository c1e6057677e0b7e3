#include "imcs/dataviews.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "imcs/container.hpp"
#include "imcs/errors.hpp"
#include "imcs/rng.hpp"

namespace imcs {

namespace {

// Seed-derivation tags; distinct per purpose so streams never collide.
constexpr std::uint64_t kTagCentroids = 0xc3;
constexpr std::uint64_t kTagSamples = 0x5a;
constexpr std::uint64_t kTagViews = 0x7e;
constexpr std::uint64_t kTagBatches = 0xb1;

// k unit directions with pairwise distance >= min_dist (on the unit sphere).
// Redraws the whole set until it fits; after too many failures the best set
// seen so far wins, so very crowded requests still terminate.
Matrix spread_directions(std::size_t k, std::size_t dim, double min_dist, Rng& rng) {
  Matrix best;
  double best_sep = -1.0;
  for (int attempt = 0; attempt < 200; ++attempt) {
    Matrix dirs(k, dim);
    for (std::size_t i = 0; i < k; ++i) {
      double norm = 0.0;
      while (norm < 1e-6) {
        norm = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          dirs(i, j) = rng.next_normal();
          norm += dirs(i, j) * dirs(i, j);
        }
        norm = std::sqrt(norm);
      }
      for (std::size_t j = 0; j < dim; ++j) dirs(i, j) /= norm;
    }
    double sep = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double diff = dirs(a, j) - dirs(b, j);
          d2 += diff * diff;
        }
        sep = std::min(sep, std::sqrt(d2));
      }
    if (sep > best_sep) {
      best_sep = sep;
      best = std::move(dirs);
    }
    if (best_sep >= min_dist) break;
  }
  return best;
}

}  // namespace

void DatasetSpec::validate() const {
  if (k_true < 2) throw ConfigError("dataset: k_true must be >= 2");
  if (n < k_true) throw ConfigError("dataset: n must be >= k_true");
  if (input_dim == 0) throw ConfigError("dataset: input_dim must be >= 1");
  if (!(separation > 0.0) || !std::isfinite(separation))
    throw ConfigError("dataset: separation must be positive and finite");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std))
    throw ConfigError("dataset: noise_std must be positive and finite");
}

Dataset gen_synthetic(const DatasetSpec& spec) {
  spec.validate();
  const double radius = spec.separation * spec.noise_std;

  Rng dir_rng(mix_seed(spec.seed, kTagCentroids));
  // Unit directions at least one radius apart keep the scaled centroids at
  // least `separation` noise units apart.
  Matrix centroids = spread_directions(spec.k_true, spec.input_dim, 1.0, dir_rng);
  for (std::size_t i = 0; i < centroids.size(); ++i) centroids.data()[i] *= radius;

  Dataset out;
  out.features = Matrix(spec.n, spec.input_dim);
  out.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int c = static_cast<int>(i % spec.k_true);
    out.labels[i] = c;
    Rng rng(mix_seed(spec.seed, kTagSamples, i));
    for (std::size_t j = 0; j < spec.input_dim; ++j)
      out.features(i, j) =
          centroids(static_cast<std::size_t>(c), j) + spec.noise_std * rng.next_normal();
  }
  return out;
}

void ViewConfig::validate() const {
  if (n_high < 2) throw ConfigError("views: need at least 2 full-size views");
  if (!(high_keep > 0.0) || high_keep > 1.0)
    throw ConfigError("views: high_keep must be in (0, 1]");
  if (!(low_keep > 0.0) || low_keep > 1.0)
    throw ConfigError("views: low_keep must be in (0, 1]");
  if (n_low > 0 && low_keep >= high_keep)
    throw ConfigError("views: low_keep must be smaller than high_keep");
  if (!(jitter_std >= 0.0) || !std::isfinite(jitter_std))
    throw ConfigError("views: jitter_std must be >= 0 and finite");
  if (!(mask_prob >= 0.0) || mask_prob >= 1.0)
    throw ConfigError("views: mask_prob must be in [0, 1)");
}

ViewSetBatch make_views(const Matrix& rows, const std::vector<std::size_t>& sample_ids,
                        const ViewConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (rows.rows() != sample_ids.size())
    throw DimensionError("make_views: one sample id per row required");
  if (rows.rows() == 0) throw DimensionError("make_views: batch is empty");
  const std::size_t m = rows.rows(), d = rows.cols();
  const std::size_t v_total = cfg.total_views();

  ViewSetBatch out;
  out.sample_ids = sample_ids;
  out.seed = seed;
  out.views.assign(v_total, Matrix(m, d));
  for (std::size_t v = 0; v < v_total; ++v) {
    const double keep = v < cfg.n_high ? cfg.high_keep : cfg.low_keep;
    const auto window =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(
                                    keep * static_cast<double>(d))),
                                1, d);
    const double gain = 1.0 / keep;
    Matrix& view = out.views[v];
    for (std::size_t r = 0; r < m; ++r) {
      Rng rng(mix_seed(seed, kTagViews, sample_ids[r], v));
      const std::size_t offset = rng.next_index(d - window + 1);
      for (std::size_t c = offset; c < offset + window; ++c)
        view(r, c) = rows(r, c) * gain;
      if (cfg.jitter_std > 0.0)
        for (std::size_t c = offset; c < offset + window; ++c)
          view(r, c) += cfg.jitter_std * rng.next_normal();
      if (cfg.mask_prob > 0.0)
        for (std::size_t c = offset; c < offset + window; ++c)
          if (rng.next_double() < cfg.mask_prob) view(r, c) = 0.0;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ParameterError("batches: batch_size must be >= 1");
  if (batch_size > n) throw ParameterError("batches: batch_size exceeds sample count");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(epoch_seed, kTagBatches));
  rng.shuffle(order);
  const std::size_t count = n / batch_size;
  std::vector<std::vector<std::size_t>> out(count);
  for (std::size_t b = 0; b < count; ++b)
    out[b].assign(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                  order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
  return out;
}

void save_dataset(const std::string& path, const Dataset& data) {
  if (data.features.rows() != data.labels.size())
    throw DimensionError("save_dataset: one label per feature row required");
  Matrix labels(1, data.labels.size());
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    labels(0, i) = static_cast<double>(data.labels[i]);
  write_container(path, {{"features", data.features}, {"labels", std::move(labels)}});
}

Dataset load_dataset(const std::string& path) {
  auto arrays = read_container(path);
  const Matrix* features = nullptr;
  const Matrix* labels = nullptr;
  for (const auto& a : arrays) {
    if (a.name == "features") features = &a.data;
    if (a.name == "labels") labels = &a.data;
  }
  if (!features || !labels)
    throw IoError(path + ": dataset needs 'features' and 'labels' arrays");
  if (labels->rows() != 1 || labels->cols() != features->rows())
    throw IoError(path + ": labels must be 1 x n with n = feature rows");
  Dataset out;
  out.features = *features;
  out.labels.resize(labels->cols());
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const double v = (*labels)(0, i);
    if (v < 0.0 || v != std::floor(v))
      throw IoError(path + ": labels must be non-negative integers");
    out.labels[i] = static_cast<int>(v);
  }
  return out;
}

}  // namespace imcs
