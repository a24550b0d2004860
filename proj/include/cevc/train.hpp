// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cevc/codec.hpp"
#include "cevc/model.hpp"
#include "cevc/video.hpp"

namespace cevc {

struct TrainConfig {
  double lambda = 0.01;
  double target_bpp = 0.0;  // R_a; the rate term is max(bpp, R_a)
  double lr = 1e-4;
  int batch = 4;
  int crop = 64;
  int epochs = 30;
  // Caps the optimizer steps per epoch (0 = one pass over every sample).
  int steps_per_epoch = 0;
  std::uint64_t seed = 1;
  Distortion metric = Distortion::kMse;
  // Weight of the ablation y-prior's own rate term. The term sees a
  // detached y, so it only moves that prior.
  double ablation_weight = 1.0;

  void validate(const NetworkConfig& net) const;
};

/// Averages of the deterministic (rounded-latent) loss over a clip set.
struct EpochLog {
  int epoch = 0;
  std::uint64_t steps = 0;  // cumulative optimizer steps
  double train_distortion = 0, train_bpp = 0, train_total = 0;
  double val_distortion = 0, val_bpp = 0, val_total = 0;
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_total = 0;
  std::uint64_t samples = 0;
  // Samples whose context was the previous frame's latent (not zeros).
  std::uint64_t conditioned_samples = 0;
};

struct LossSummary {
  double distortion = 0, bpp = 0, total = 0;
};

// Loss with hard-rounded y and z, each frame conditioned on the previous
// frame's rounded latent. Frames are padded as the codec pads them.
LossSummary evaluate_loss(const Model& model, const std::vector<Video>& clips, double lambda,
                          double target_bpp, Distortion metric);

class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  // Applies accumulated gradients scaled by grad_scale, then clears them.
  void step(double grad_scale = 1.0);
  void set_lr(double lr) { lr_ = lr; }
  std::uint64_t steps() const { return t_; }

 private:
  ParamStore& params_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains in place on pairs of adjacent frames (frame 0 of each clip is
/// paired with a zero context). Deterministic given config.seed. On return
/// the model holds the weights of the best validation epoch, snapped to
/// float, with training disabled. NaN or inf loss raises kNumeric naming
/// the epoch and step.
TrainResult train(Model& model, const TrainConfig& config, const std::vector<Video>& train_clips,
                  const std::vector<Video>& val_clips, const EpochCallback& on_epoch = {});

// Gradients of the clamped rate term for one sample, exposed so callers can
// see the clamp switch the rate gradient off.
struct RateGradientProbe {
  double bpp = 0;
  double rate_grad_norm = 0;  // ||d(lambda * max(bpp, R_a)) / d(params)||
};
RateGradientProbe probe_rate_gradient(Model& model, const Tensor& frame, double lambda,
                                      double target_bpp, std::uint64_t seed);

/// One row of a rate-distortion sweep.
struct RdPoint {
  std::string label;
  double lambda = 0;
  bool internal_learning = false;
  double bpp = 0;  // from payload bytes
  double mse = 0, psnr = 0, msssim = 0, log_msssim = 0;
};

struct SweepOptions {
  bool include_internal_learning = false;
  InternalLearningOptions learning;
  int threads = 0;
};

struct SweepEntry {
  std::string label;
  const Model* model = nullptr;
};

// Rows sorted by bpp ascending.
std::vector<RdPoint> rd_sweep(const std::vector<SweepEntry>& models, const Video& video,
                              const SweepOptions& opts = {});
std::string rd_csv(const std::vector<RdPoint>& rows);
std::string rd_json(const std::vector<RdPoint>& rows, std::uint64_t seed);

}  // namespace cevc
