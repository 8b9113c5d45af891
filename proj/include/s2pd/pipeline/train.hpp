#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "s2pd/io/checkpoint.hpp"
#include "s2pd/io/config.hpp"
#include "s2pd/models/batch.hpp"
#include "s2pd/models/regressor.hpp"
#include "s2pd/models/vae.hpp"
#include "s2pd/scene/dataset.hpp"

namespace s2pd::pipeline {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-stage epoch defaults: VAE1 sees the large synthetic set, VAE2 adapts
/// on the tiny paired set, the regressors converge quickly. All overridable.
constexpr int kDefaultEpochsVae1 = 50;
constexpr int kDefaultEpochsVae2 = 200;
constexpr int kDefaultEpochsCnn = 30;
constexpr int kDefaultEpochsBaseline = 500;

struct TrainConfig {
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta = 1e-3;  // KL weight; unweighted KL would collapse the latent at this image size
  int latent_dim = 32;
  uint64_t seed = 1;
  int resolution = 32;
  double region_w_mm = scene::kDefaultRegionWmm;
  double region_h_mm = scene::kDefaultRegionHmm;
  double grid_large_mm = 50.0;
  double grid_small_mm = 5.0;
  bool vae2_keep_kl = true;
  bool cnn_sampled_z = false;

  void validate() const {
    // epochs of zero is legal: it yields the untrained initialization
    if (epochs < 0 || batch_size <= 0 || learning_rate <= 0 || beta < 0 || latent_dim <= 0 ||
        resolution <= 0 || region_w_mm <= 0 || region_h_mm <= 0 || grid_large_mm <= 0 ||
        grid_small_mm <= 0)
      throw std::invalid_argument("TrainConfig fields must be positive");
  }
  models::VaeConfig vae_config() const { return {resolution, latent_dim}; }
};

inline int default_epochs(io::StageTag stage) {
  switch (stage) {
    case io::StageTag::vae1: return kDefaultEpochsVae1;
    case io::StageTag::vae2: return kDefaultEpochsVae2;
    case io::StageTag::cnn: return kDefaultEpochsCnn;
    case io::StageTag::baseline: return kDefaultEpochsBaseline;
  }
  return 1;
}

inline TrainConfig train_config_from_run(const io::RunConfig& rc, io::StageTag stage) {
  TrainConfig c;
  c.epochs = rc.epochs > 0 ? rc.epochs : default_epochs(stage);
  c.batch_size = rc.batch_size;
  c.learning_rate = rc.learning_rate;
  c.beta = rc.beta;
  c.latent_dim = rc.latent_dim;
  c.seed = rc.seed;
  c.resolution = rc.resolution;
  c.region_w_mm = rc.placement_region_mm[0];
  c.region_h_mm = rc.placement_region_mm[1];
  c.grid_large_mm = rc.grid_spacing_large_mm;
  c.grid_small_mm = rc.grid_spacing_small_mm;
  c.vae2_keep_kl = rc.vae2_keep_kl;
  c.cnn_sampled_z = rc.cnn_sampled_z;
  c.validate();
  return c;
}

struct StageResult {
  io::Checkpoint checkpoint;
  std::vector<double> loss_curve;  // mean training loss per epoch
  double final_loss = 0.0;
  double final_recon_mse = 0.0;  // VAE stages: deterministic decode(mu) MSE over the dataset
};

namespace detail {

inline void check_finite_loss(double loss, const char* stage, int epoch, int batch) {
  if (!std::isfinite(loss))
    throw TrainingError(std::string(stage) + " diverged: non-finite loss at epoch " +
                        std::to_string(epoch) + ", batch " + std::to_string(batch) +
                        "; aborting instead of clamping");
}

inline std::vector<std::vector<size_t>> epoch_batches(size_t n, int batch_size, nd::Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  nd::shuffle(idx, rng);
  std::vector<std::vector<size_t>> batches;
  for (size_t at = 0; at < n; at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(n, at + static_cast<size_t>(batch_size));
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(at),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// Mean pixel MSE of decode(encode_mu(input_i)) against target_i over a
/// whole dataset, evaluated in batches.
inline double dataset_recon_mse(models::VaeNet& net, const scene::LabeledDataset& inputs,
                                const scene::LabeledDataset& targets, int batch_size) {
  double total = 0.0;
  int64_t count = 0;
  for (size_t at = 0; at < inputs.size(); at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(inputs.size(), at + static_cast<size_t>(batch_size));
    std::vector<size_t> idx(end - at);
    std::iota(idx.begin(), idx.end(), at);
    nd::Tensor x = models::batch_from_dataset(inputs, idx);
    nd::Tensor t = models::batch_from_dataset(targets, idx);
    nd::Tensor recon = net.reconstruct(x);
    for (size_t i = 0; i < recon.data.size(); ++i) {
      const double d = recon.data[i] - t.data[i];
      total += d * d;
    }
    count += recon.size();
  }
  return total / static_cast<double>(count);
}

/// Sampling-noise schedule. A freshly initialized VAE on these images sits
/// on a long plateau: the object covers a few percent of the pixels, so the
/// mean image is a strong local optimum and reparameterization noise prunes
/// the latent pathway before the encoder-decoder coupling can form. Cold
/// starts therefore anneal eps: the first stretch trains deterministically
/// (eps scaled to zero), then the noise ramps in. The KL term stays at full
/// weight throughout; it is what keeps the latent scale pinned to the prior
/// while the noise arrives. Warm starts (VAE2 inherits an ignited encoder)
/// train with full sampling from the first step.
struct VaeSchedule {
  double warmup_frac = 0.4;  // eps = 0 until here
  double ramp_frac = 0.3;    // then eps ramps linearly to 1 over this fraction

  double eps_scale_at(int epoch, int total_epochs) const {
    if (warmup_frac <= 0.0) return 1.0;
    const double w = warmup_frac * total_epochs;
    const double r = std::max(1.0, ramp_frac * total_epochs);
    if (epoch < w) return 0.0;
    return std::min(1.0, (epoch - w) / r);
  }
  static VaeSchedule cold_start() { return {0.4, 0.3}; }
  static VaeSchedule warm_start() { return {0.0, 0.0}; }
};

/// Shared VAE optimization loop: input_i is encoded, a sampled z is decoded,
/// and the reconstruction is pulled toward target_i.
inline StageResult train_vae_impl(models::VaeNet& net, const scene::LabeledDataset& inputs,
                                  const scene::LabeledDataset& targets, const TrainConfig& cfg,
                                  bool with_kl, const VaeSchedule& schedule,
                                  const char* stage_name, io::StageTag stage) {
  const std::vector<nd::LayerParams*> layers = net.all_layers();
  nd::AdamState adam = nd::AdamState::for_layers(layers, cfg.learning_rate);
  nd::Rng base(cfg.seed);
  nd::Rng shuffle_rng = base.fork(0x5f1e);
  nd::Rng eps_rng = base.fork(0xe9);

  StageResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double s = schedule.eps_scale_at(epoch, cfg.epochs);
    const double beta = with_kl ? cfg.beta : 0.0;
    double epoch_loss = 0.0;
    size_t seen = 0;
    int batch_no = 0;
    for (const auto& batch : epoch_batches(inputs.size(), cfg.batch_size, shuffle_rng)) {
      nd::Tensor x = models::batch_from_dataset(inputs, batch);
      nd::Tensor target = models::batch_from_dataset(targets, batch);
      nd::Tensor eps = nd::Tensor::zeros({static_cast<int>(batch.size()), cfg.latent_dim});
      for (auto& v : eps.data) v = s * eps_rng.normal();

      nd::Tape t;
      nd::Var xv = t.leaf(std::move(x));
      auto [mu, logvar] = net.encode(t, xv);
      nd::Var z = models::reparameterize(t, mu, logvar, t.leaf(std::move(eps)));
      nd::Var recon = net.decode(t, z);
      nd::Var loss = models::elbo_loss(t, recon, t.leaf(std::move(target)), mu, logvar, beta);
      const double lv = t.value(loss).data[0];
      check_finite_loss(lv, stage_name, epoch, batch_no);
      t.backward(loss);
      for (auto* lp : layers)
        if (!lp->frozen()) lp->harvest_grads(t);
      nd::adam_step(layers, adam);

      epoch_loss += lv * static_cast<double>(batch.size());
      seen += batch.size();
      ++batch_no;
    }
    res.loss_curve.push_back(epoch_loss / static_cast<double>(seen));
  }
  res.final_loss = res.loss_curve.empty() ? 0.0 : res.loss_curve.back();
  res.final_recon_mse = dataset_recon_mse(net, inputs, targets, cfg.batch_size);
  res.checkpoint = net.to_checkpoint(stage, cfg.seed);
  return res;
}

}  // namespace detail

/// Stage A-1: VAE1 learns synthetic image -> same synthetic image.
inline StageResult train_vae1(const scene::LabeledDataset& synthetic, const TrainConfig& cfg) {
  cfg.validate();
  synthetic.validate();
  if (synthetic.domain != scene::DomainKind::canonical)
    throw std::invalid_argument("train_vae1 expects a canonical-domain dataset");
  nd::Rng init_rng = nd::Rng(cfg.seed).fork(0x1417);
  models::VaeNet net(cfg.vae_config(), init_rng);
  return detail::train_vae_impl(net, synthetic, synthetic, cfg, /*with_kl=*/true,
                                detail::VaeSchedule::cold_start(), "vae1", io::StageTag::vae1);
}

/// Stage A-2: VAE2 starts from VAE1's weights, the decoder is frozen, and
/// only the encoder adapts to map real images onto the paired synthetic
/// targets. Decoder drift is a hard failure, not a warning.
inline StageResult train_vae2(const scene::LabeledDataset& real,
                              const scene::LabeledDataset& synth_pairs,
                              const io::Checkpoint& vae1, const TrainConfig& cfg) {
  cfg.validate();
  scene::require_paired(real, synth_pairs);
  models::VaeNet net = models::VaeNet::from_checkpoint(vae1, cfg.vae_config());
  const std::vector<uint8_t> decoder_before = net.decoder_bytes();
  net.freeze_decoder();

  StageResult res = detail::train_vae_impl(net, real, synth_pairs, cfg, cfg.vae2_keep_kl,
                                           detail::VaeSchedule::warm_start(), "vae2",
                                           io::StageTag::vae2);
  if (net.decoder_bytes() != decoder_before)
    throw TrainingError("vae2 decoder drift detected at save time: freeze violation");
  return res;
}

namespace detail {

/// Deterministic VAE1 outputs for every dataset image: decode(encode_mu(x)).
inline std::vector<nd::Tensor> reconstruct_all(models::VaeNet& net,
                                               const scene::LabeledDataset& ds, int batch_size) {
  std::vector<nd::Tensor> out;
  out.reserve((ds.size() + batch_size - 1) / static_cast<size_t>(batch_size));
  for (size_t at = 0; at < ds.size(); at += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(ds.size(), at + static_cast<size_t>(batch_size));
    std::vector<size_t> idx(end - at);
    std::iota(idx.begin(), idx.end(), at);
    out.push_back(net.reconstruct(models::batch_from_dataset(ds, idx)));
  }
  return out;
}

/// One optimization epoch of the regressor over prepacked [1,4,H,W] rows.
inline double regressor_epoch(models::CnnRegressor& cnn,
                              const std::vector<nd::Tensor>& input_rows,
                              const std::vector<std::array<double, 2>>& labels_norm,
                              const TrainConfig& cfg, nd::AdamState& adam, nd::Rng& shuffle_rng,
                              const char* stage_name, int epoch) {
  const std::vector<nd::LayerParams*> layers = cnn.layers();
  double epoch_loss = 0.0;
  size_t seen = 0;
  int batch_no = 0;
  const size_t row_len = input_rows[0].data.size();
  for (const auto& batch : epoch_batches(input_rows.size(), cfg.batch_size, shuffle_rng)) {
    nd::Tensor x = nd::Tensor::zeros({static_cast<int>(batch.size()), 4, cfg.resolution,
                                      cfg.resolution});
    nd::Tensor y = nd::Tensor::zeros({static_cast<int>(batch.size()), 2});
    for (size_t i = 0; i < batch.size(); ++i) {
      std::copy(input_rows[batch[i]].data.begin(), input_rows[batch[i]].data.end(),
                x.data.begin() + static_cast<std::ptrdiff_t>(i * row_len));
      y.data[i * 2 + 0] = labels_norm[batch[i]][0];
      y.data[i * 2 + 1] = labels_norm[batch[i]][1];
    }
    nd::Tape t;
    nd::Var pred = cnn.predict(t, t.leaf(std::move(x)));
    nd::Var diff = t.sub(pred, t.leaf(std::move(y)));
    nd::Var loss =
        t.scale(t.sum(t.mul(diff, diff)), 1.0 / static_cast<double>(2 * batch.size()));
    const double lv = t.value(loss).data[0];
    check_finite_loss(lv, stage_name, epoch, batch_no);
    t.backward(loss);
    for (auto* lp : layers) lp->harvest_grads(t);
    nd::adam_step(layers, adam);
    epoch_loss += lv * static_cast<double>(batch.size());
    seen += batch.size();
    ++batch_no;
  }
  return epoch_loss / static_cast<double>(seen);
}

inline StageResult train_regressor_impl(models::CnnRegressor& cnn,
                                        const std::vector<nd::Tensor>& input_rows,
                                        const std::vector<std::array<double, 2>>& labels_norm,
                                        const TrainConfig& cfg, const char* stage_name,
                                        io::StageTag stage) {
  nd::AdamState adam = nd::AdamState::for_layers(cnn.layers(), cfg.learning_rate);
  nd::Rng shuffle_rng = nd::Rng(cfg.seed).fork(0xc44);
  StageResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    res.loss_curve.push_back(regressor_epoch(cnn, input_rows, labels_norm, cfg, adam,
                                             shuffle_rng, stage_name, epoch));
  res.final_loss = res.loss_curve.empty() ? 0.0 : res.loss_curve.back();
  res.checkpoint = cnn.to_checkpoint(stage, cfg.seed);
  return res;
}

/// Split [N,4,H,W] reconstruction batches into per-image rows.
inline std::vector<nd::Tensor> split_rows(const std::vector<nd::Tensor>& batches) {
  std::vector<nd::Tensor> rows;
  for (const auto& b : batches) {
    const int n = b.shape[0];
    const size_t row_len = b.data.size() / static_cast<size_t>(n);
    for (int i = 0; i < n; ++i) {
      nd::Tensor row({1, b.shape[1], b.shape[2], b.shape[3]},
                     std::vector<double>(b.data.begin() + static_cast<std::ptrdiff_t>(i * row_len),
                                         b.data.begin() +
                                             static_cast<std::ptrdiff_t>((i + 1) * row_len)));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace detail

/// Stage B: the regressor is trained on VAE1 *outputs* of the synthetic set,
/// not on the synthetic images directly, so that it lives in the common
/// pseudo-synthetic image space shared with VAE2.
inline StageResult train_cnn(const io::Checkpoint& vae1, const scene::LabeledDataset& synthetic,
                             const TrainConfig& cfg) {
  cfg.validate();
  synthetic.validate();
  if (synthetic.domain != scene::DomainKind::canonical)
    throw std::invalid_argument("train_cnn expects the canonical-domain dataset");
  models::VaeNet vae = models::VaeNet::from_checkpoint(vae1, cfg.vae_config());

  std::vector<std::array<double, 2>> labels_norm(synthetic.size());
  for (size_t i = 0; i < synthetic.size(); ++i)
    labels_norm[i] = {synthetic.labels_mm[i][0] / cfg.region_w_mm,
                      synthetic.labels_mm[i][1] / cfg.region_h_mm};

  nd::Rng init_rng = nd::Rng(cfg.seed).fork(0xc11);
  models::CnnRegressor cnn(cfg.resolution, init_rng);

  if (!cfg.cnn_sampled_z) {
    auto rows = detail::split_rows(detail::reconstruct_all(vae, synthetic, 64));
    return detail::train_regressor_impl(cnn, rows, labels_norm, cfg, "cnn", io::StageTag::cnn);
  }

  // Ablation mode: resample z every epoch and decode fresh training inputs.
  nd::AdamState adam = nd::AdamState::for_layers(cnn.layers(), cfg.learning_rate);
  nd::Rng shuffle_rng = nd::Rng(cfg.seed).fork(0xc44);
  nd::Rng eps_rng = nd::Rng(cfg.seed).fork(0xe9);
  StageResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<nd::Tensor> rows;
    for (size_t at = 0; at < synthetic.size(); at += 64) {
      const size_t end = std::min(synthetic.size(), at + 64);
      std::vector<size_t> idx(end - at);
      std::iota(idx.begin(), idx.end(), at);
      nd::Tape t;
      auto [mu, logvar] = vae.encode(t, t.leaf(models::batch_from_dataset(synthetic, idx)));
      nd::Tensor eps = nd::Tensor::zeros({static_cast<int>(idx.size()), cfg.latent_dim});
      for (auto& v : eps.data) v = eps_rng.normal();
      nd::Var z = models::reparameterize(t, mu, logvar, t.leaf(std::move(eps)));
      auto batch_rows = detail::split_rows({t.value(vae.decode(t, z))});
      for (auto& r : batch_rows) rows.push_back(std::move(r));
    }
    res.loss_curve.push_back(detail::regressor_epoch(cnn, rows, labels_norm, cfg, adam,
                                                     shuffle_rng, "cnn", epoch));
  }
  res.final_loss = res.loss_curve.empty() ? 0.0 : res.loss_curve.back();
  res.checkpoint = cnn.to_checkpoint(io::StageTag::cnn, cfg.seed);
  return res;
}

/// Experiment (a): a plain CNN regressor on the small raw real set, no VAEs.
inline StageResult train_baseline(const scene::LabeledDataset& real_small,
                                  const TrainConfig& cfg) {
  cfg.validate();
  real_small.validate();
  std::vector<std::array<double, 2>> labels_norm(real_small.size());
  std::vector<nd::Tensor> rows;
  rows.reserve(real_small.size());
  for (size_t i = 0; i < real_small.size(); ++i) {
    labels_norm[i] = {real_small.labels_mm[i][0] / cfg.region_w_mm,
                      real_small.labels_mm[i][1] / cfg.region_h_mm};
    rows.push_back(models::batch_from_dataset(real_small, {i}));
  }
  nd::Rng init_rng = nd::Rng(cfg.seed).fork(0xba5e);
  models::CnnRegressor cnn(cfg.resolution, init_rng);
  return detail::train_regressor_impl(cnn, rows, labels_norm, cfg, "baseline",
                                      io::StageTag::baseline);
}

/// Test-time path, Fig-2 step C: real image -> VAE2 -> pseudo-synthetic
/// image -> CNN -> position in workspace millimeters.
inline std::array<double, 2> infer(const io::Checkpoint& vae2, const io::Checkpoint& cnn,
                                   const scene::ImageRGBD& image, const TrainConfig& cfg) {
  if (image.width != cfg.resolution || image.height != cfg.resolution)
    throw nd::ShapeError("infer: image is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + ", networks expect " +
                         std::to_string(cfg.resolution) + "x" + std::to_string(cfg.resolution));
  models::VaeNet vnet = models::VaeNet::from_checkpoint(vae2, cfg.vae_config());
  models::CnnRegressor cnet = models::CnnRegressor::from_checkpoint(cnn, cfg.resolution);
  nd::Tensor pseudo = vnet.reconstruct(models::single_image_batch(image));
  nd::Tensor pred = cnet.predict_positions(pseudo);
  return {pred.data[0] * cfg.region_w_mm, pred.data[1] * cfg.region_h_mm};
}

/// Batched variant used by the experiment harness; loads the networks once.
class InferenceEngine {
 public:
  InferenceEngine(const io::Checkpoint& vae2, const io::Checkpoint& cnn, const TrainConfig& cfg)
      : cfg_(cfg),
        vae_(models::VaeNet::from_checkpoint(vae2, cfg.vae_config())),
        cnn_(models::CnnRegressor::from_checkpoint(cnn, cfg.resolution)) {}

  /// Baseline engines skip the VAE and feed raw images to the regressor.
  InferenceEngine(const io::Checkpoint& baseline_cnn, const TrainConfig& cfg)
      : cfg_(cfg), cnn_(models::CnnRegressor::from_checkpoint(baseline_cnn, cfg.resolution)) {}

  std::array<double, 2> predict_mm(const scene::ImageRGBD& image) {
    if (image.width != cfg_.resolution || image.height != cfg_.resolution)
      throw nd::ShapeError("predict_mm: image resolution mismatch");
    nd::Tensor x = models::single_image_batch(image);
    if (vae_) x = vae_->reconstruct(x);
    nd::Tensor pred = cnn_.predict_positions(x);
    return {pred.data[0] * cfg_.region_w_mm, pred.data[1] * cfg_.region_h_mm};
  }

  /// The pseudo-synthetic image the regressor sees, for gap measurements.
  scene::ImageRGBD pseudo_synthetic(const scene::ImageRGBD& image) {
    if (!vae_) throw std::logic_error("baseline engine has no VAE");
    return models::images_from_batch(vae_->reconstruct(models::single_image_batch(image)))[0];
  }

 private:
  TrainConfig cfg_;
  std::optional<models::VaeNet> vae_;
  models::CnnRegressor cnn_;
};

}  // namespace s2pd::pipeline
