// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cevc/metrics.hpp"
#include "cevc/ops.hpp"
#include "cevc/quantizer.hpp"

namespace cevc {

void TrainConfig::validate(const NetworkConfig& net) const {
  if (!(lr > 0) || !std::isfinite(lr)) fail(ErrorKind::kContract, "learning rate must be > 0");
  if (batch < 1 || epochs < 1 || steps_per_epoch < 0) {
    fail(ErrorKind::kContract, "batch and epochs must be >= 1");
  }
  if (!(lambda >= 0) || !(target_bpp >= 0) || !(ablation_weight >= 0)) {
    fail(ErrorKind::kContract, "lambda, R_a and ablation weight must be >= 0");
  }
  if (crop < 1 || crop % net.downscale() != 0) {
    fail(ErrorKind::kGeometry, "crop " + std::to_string(crop) + " is not divisible by " +
                                   std::to_string(net.downscale()));
  }
}

AdamOptimizer::AdamOptimizer(ParamStore& params, double lr, double beta1, double beta2,
                             double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, p] : params_.entries()) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
  }
}

void AdamOptimizer::step(double grad_scale) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto& entries = params_.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor p = entries[k].second;  // shares storage
    if (!p.has_grad()) continue;
    auto values = p.mutable_data();
    const auto g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = g[i] * grad_scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      values[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    p.zero_grad();
  }
}

namespace {

Tensor crop_at(const Tensor& frame, std::int64_t top, std::int64_t left, std::int64_t size) {
  const auto H = frame.dim(2), W = frame.dim(3);
  if (top == 0 && left == 0 && H == size && W == size) return frame;
  std::vector<double> out(static_cast<std::size_t>(3 * size * size));
  const auto src = frame.data();
  for (std::int64_t c = 0; c < 3; ++c) {
    for (std::int64_t y = 0; y < size; ++y) {
      for (std::int64_t x = 0; x < size; ++x) {
        out[(c * size + y) * size + x] = src[(c * H + top + y) * W + left + x];
      }
    }
  }
  return Tensor::from_data({1, 3, size, size}, std::move(out));
}

struct Sample {
  std::size_t clip;
  std::size_t frame;
};

void check_clips(const std::vector<Video>& clips, const char* what) {
  for (std::size_t c = 0; c < clips.size(); ++c) {
    if (clips[c].empty()) fail(ErrorKind::kContract, std::string(what) + " clip is empty", c);
    const Shape g = clips[c].front().shape();
    if (g.size() != 4 || g[0] != 1 || g[1] != 3) {
      fail(ErrorKind::kDimension, std::string(what) + " frames must be [1,3,H,W]", c);
    }
    for (const auto& f : clips[c]) {
      if (f.shape() != g) fail(ErrorKind::kGeometry, std::string(what) + " clip geometry varies", c);
    }
  }
}

}  // namespace

LossSummary evaluate_loss(const Model& model, const std::vector<Video>& clips, double lambda,
                          double target_bpp, Distortion metric) {
  NoGradGuard no_grad;
  const auto& cfg = model.config();
  LossSummary sum;
  std::size_t count = 0;
  for (const auto& clip : clips) {
    Tensor y_prev;
    for (const auto& frame : clip) {
      const Tensor padded = pad_replicate(frame, cfg.downscale());
      const Tensor y = dequantize(quantize(model.image_encode(padded), cfg.L));
      if (!y_prev.defined()) y_prev = Tensor::zeros(y.shape());
      const Tensor z = dequantize(quantize(model.hyper_encode(y, y_prev), cfg.L));
      const RdLoss loss = rd_loss(model, padded, y, z, y_prev, lambda, target_bpp, metric);
      sum.distortion += loss.distortion.item();
      sum.bpp += loss.bpp.item();
      sum.total += loss.total.item();
      ++count;
      y_prev = y;
    }
  }
  if (count > 0) {
    sum.distortion /= static_cast<double>(count);
    sum.bpp /= static_cast<double>(count);
    sum.total /= static_cast<double>(count);
  }
  return sum;
}

TrainResult train(Model& model, const TrainConfig& config, const std::vector<Video>& train_clips,
                  const std::vector<Video>& val_clips, const EpochCallback& on_epoch) {
  const auto& cfg = model.config();
  config.validate(cfg);
  check_clips(train_clips, "training");
  check_clips(val_clips, "validation");
  if (train_clips.empty()) fail(ErrorKind::kContract, "no training clips");

  std::vector<Sample> samples;
  for (std::size_t c = 0; c < train_clips.size(); ++c) {
    const Tensor& f = train_clips[c].front();
    if (f.dim(2) < config.crop || f.dim(3) < config.crop) {
      fail(ErrorKind::kGeometry, "training clip smaller than the crop", c);
    }
    for (std::size_t t = 0; t < train_clips[c].size(); ++t) samples.push_back({c, t});
  }

  model.params().set_trainable(true);
  model.params().zero_grad();
  AdamOptimizer adam(model.params(), config.lr);
  std::mt19937_64 order_rng(config.seed);
  NoiseRng noise(config.seed, 1);
  const std::int64_t crop = config.crop;
  const double pixels = static_cast<double>(crop * crop);

  TrainResult result;
  std::unique_ptr<Model> best;
  const std::size_t per_epoch =
      config.steps_per_epoch > 0
          ? static_cast<std::size_t>(config.steps_per_epoch)
          : (samples.size() + static_cast<std::size_t>(config.batch) - 1) / config.batch;
  std::size_t cursor = samples.size();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t step = 0; step < per_epoch; ++step) {
      for (int b = 0; b < config.batch; ++b) {
        if (cursor == samples.size()) {
          std::shuffle(samples.begin(), samples.end(), order_rng);
          cursor = 0;
        }
        const Sample s = samples[cursor++];
        const Video& clip = train_clips[s.clip];
        const auto H = clip[s.frame].dim(2), W = clip[s.frame].dim(3);
        const auto top = static_cast<std::int64_t>(order_rng() % (H - crop + 1));
        const auto left = static_cast<std::int64_t>(order_rng() % (W - crop + 1));
        const Tensor x = crop_at(clip[s.frame], top, left, crop);

        Tape tape;
        Tensor y_prev;
        RdLoss loss;
        Tensor objective;
        try {
          ++result.samples;
          if (s.frame == 0) {
            y_prev = Tensor::zeros({1, cfg.N, crop >> cfg.num_down, crop >> cfg.num_down});
          } else {
            NoGradGuard no_grad;
            ++result.conditioned_samples;
            y_prev = dequantize(
                quantize(model.image_encode(crop_at(clip[s.frame - 1], top, left, crop)), cfg.L));
          }
          const Tensor y = model.image_encode(x);
          const Tensor y_noisy = noise_quantize(y, noise);
          const Tensor z_noisy = noise_quantize(model.hyper_encode(y_noisy, y_prev), noise);
          loss = rd_loss(model, x, y_noisy, z_noisy, y_prev, config.lambda, config.target_bpp,
                         config.metric);
          objective = loss.total;
          if (cfg.factorized_y_ablation && config.ablation_weight > 0) {
            const Tensor ablation = factorized_y_rate(model, y_noisy.detach());
            objective = ops::add(objective,
                                 ops::mul_scalar(ablation, config.ablation_weight / pixels));
          }
          if (!std::isfinite(objective.item())) fail(ErrorKind::kNumeric, "non-finite loss");
          tape.backward(objective);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kNumeric) throw;
          fail(ErrorKind::kNumeric, "training diverged at epoch " + std::to_string(epoch) +
                                        " step " + std::to_string(step) + ": " + e.what());
        }
        log.train_distortion += loss.distortion.item();
        log.train_bpp += loss.bpp.item();
        log.train_total += loss.total.item();
        ++seen;
      }
      adam.step(1.0 / config.batch);
      for (const auto& [name, p] : model.params().entries()) {
        for (double v : p.data()) {
          if (!std::isfinite(v)) {
            fail(ErrorKind::kNumeric, "non-finite parameter " + name + " at epoch " +
                                          std::to_string(epoch) + " step " + std::to_string(step));
          }
        }
      }
    }
    log.steps = adam.steps();
    log.train_distortion /= static_cast<double>(seen);
    log.train_bpp /= static_cast<double>(seen);
    log.train_total /= static_cast<double>(seen);
    const LossSummary val = evaluate_loss(model, val_clips.empty() ? train_clips : val_clips,
                                          config.lambda, config.target_bpp, config.metric);
    log.val_distortion = val.distortion;
    log.val_bpp = val.bpp;
    log.val_total = val.total;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(val.total)) {
      fail(ErrorKind::kNumeric, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    if (!best || val.total < result.best_val_total) {
      best = model.clone();
      result.best_epoch = epoch;
      result.best_val_total = val.total;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  // Restore the best epoch's weights.
  const auto& dst = model.params().entries();
  const auto& src = best->params().entries();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    Tensor p = dst[k].second;
    std::copy(src[k].second.data().begin(), src[k].second.data().end(), p.mutable_data().begin());
  }
  model.params().zero_grad();
  model.params().set_trainable(false);
  model.snap_to_float();
  model.training_info = {config.seed, config.lambda,
                         static_cast<std::uint64_t>(result.best_epoch) * per_epoch};
  return result;
}

RateGradientProbe probe_rate_gradient(Model& model, const Tensor& frame, double lambda,
                                      double target_bpp, std::uint64_t seed) {
  const auto& cfg = model.config();
  model.params().set_trainable(true);
  model.params().zero_grad();
  NoiseRng noise(seed);
  RateGradientProbe probe;
  {
    Tape tape;
    const Tensor x = pad_replicate(frame, cfg.downscale());
    const Tensor y_noisy = noise_quantize(model.image_encode(x), noise);
    const Tensor y_prev = Tensor::zeros(y_noisy.shape());
    const Tensor z_noisy = noise_quantize(model.hyper_encode(y_noisy, y_prev), noise);
    const RdLoss loss = rd_loss(model, x, y_noisy, z_noisy, y_prev, lambda, target_bpp);
    probe.bpp = loss.bpp.item();
    tape.backward(ops::mul_scalar(rate_clamp(loss.bpp, target_bpp), lambda));
  }
  double sq = 0;
  for (const auto& [name, p] : model.params().entries()) {
    for (double g : p.grad()) sq += g * g;
  }
  probe.rate_grad_norm = std::sqrt(sq);
  model.params().zero_grad();
  model.params().set_trainable(false);
  return probe;
}

std::vector<RdPoint> rd_sweep(const std::vector<SweepEntry>& models, const Video& video,
                              const SweepOptions& opts) {
  if (models.empty()) fail(ErrorKind::kContract, "rd_sweep needs at least one checkpoint");
  if (video.empty()) fail(ErrorKind::kContract, "rd_sweep needs a nonempty video");
  std::vector<RdPoint> rows;
  auto measure = [&](const SweepEntry& entry, bool il) {
    EncodeOptions eo;
    eo.internal_learning = il;
    eo.learning = opts.learning;
    eo.threads = opts.threads;
    const EncodeResult enc = encode_video(*entry.model, video, eo);
    RdPoint p;
    p.label = entry.label;
    p.lambda = entry.model->training_info.lambda;
    p.internal_learning = il;
    p.bpp = enc.bpp();
    for (std::size_t i = 0; i < video.size(); ++i) {
      p.mse += metrics::mse(enc.reconstructions[i], video[i]);
      p.msssim += metrics::msssim(enc.reconstructions[i], video[i]);
    }
    p.mse /= static_cast<double>(video.size());
    p.msssim /= static_cast<double>(video.size());
    p.psnr = metrics::psnr_from_mse(p.mse);
    p.log_msssim = metrics::log_scale(p.msssim);
    rows.push_back(p);
  };
  for (const auto& entry : models) {
    if (entry.model == nullptr) fail(ErrorKind::kContract, "rd_sweep: null model");
    measure(entry, false);
    if (opts.include_internal_learning) measure(entry, true);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  return rows;
}

std::string rd_csv(const std::vector<RdPoint>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "label,lambda,internal_learning,bpp,mse,psnr,msssim,log_msssim\n";
  for (const auto& r : rows) {
    os << r.label << ',' << r.lambda << ',' << (r.internal_learning ? 1 : 0) << ',' << r.bpp << ','
       << r.mse << ',' << r.psnr << ',' << r.msssim << ',' << r.log_msssim << '\n';
  }
  return os.str();
}

std::string rd_json(const std::vector<RdPoint>& rows, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["points"] = nlohmann::json::array();
  for (const auto& r : rows) {
    // JSON has no infinity; lossless points carry a null PSNR.
    const nlohmann::json psnr = std::isfinite(r.psnr) ? nlohmann::json(r.psnr) : nlohmann::json();
    j["points"].push_back({{"label", r.label},
                           {"lambda", r.lambda},
                           {"internal_learning", r.internal_learning},
                           {"bpp", r.bpp},
                           {"mse", r.mse},
                           {"psnr", psnr},
                           {"msssim", r.msssim},
                           {"log_msssim", r.log_msssim}});
  }
  return j.dump(2) + "\n";
}

}  // namespace cevc
