// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cevc/bitstream.hpp"
#include "cevc/model.hpp"
#include "cevc/quantizer.hpp"
#include "cevc/range_coder.hpp"

namespace cevc {

enum class Distortion { kMse, kMsssim };

// Replicate-pads [1,C,H,W] on the bottom/right up to multiples of `multiple`.
Tensor pad_replicate(const Tensor& frame, std::int64_t multiple);
Tensor crop(const Tensor& frame, std::int64_t height, std::int64_t width);

/// Coding tables that depend on the weights only (never on the frame).
class CodingContext {
 public:
  explicit CodingContext(const Model& model);
  const CdfTable& z_table(std::int64_t channel) const { return z_tables_.at(channel); }
  const CdfTable& y_factorized_table(std::int64_t channel) const {
    return y_tables_.at(channel);
  }

 private:
  std::vector<CdfTable> z_tables_;
  std::vector<CdfTable> y_tables_;
};

struct FrameStats {
  std::uint64_t z_bytes = 0;
  std::uint64_t y_bytes = 0;
  // -sum log2 of the coded symbols' probabilities under the quantized
  // tables and under the unquantized model.
  double z_table_bits = 0.0, y_table_bits = 0.0;
  double z_model_bits = 0.0, y_model_bits = 0.0;
  std::int64_t clamped = 0;  // latent elements clamped to [-L, L]
  double mse = 0.0;          // encoder-side reconstruction, unpadded
  bool internal_learning = false;
  bool fell_back = false;         // internal learning hit a non-finite value
  std::vector<double> objective;  // internal-learning objective per step
};

struct FrameCodes {
  LatentCode y;
  HyperCode z;  // empty shape when y is coded under the factorized prior
  FrameRecord record;
  FrameStats stats;
};

// Quantized latents of one padded frame; y_prev conditions z.
LatentCode encode_latent(const Model& model, const Tensor& padded_frame, std::int64_t frame = -1);
HyperCode encode_hyper(const Model& model, const LatentCode& y, const LatentCode& y_prev);

// Entropy codes given integer codes.
FrameCodes code_frame(const Model& model, const CodingContext& ctx, LatentCode y, HyperCode z,
                      const LatentCode& y_prev, bool factorized_y);

// Full per-frame encoder: analysis, hyper analysis, entropy coding.
FrameCodes encode_frame(const Model& model, const CodingContext& ctx, const Tensor& padded_frame,
                        const LatentCode& y_prev, bool factorized_y = false);

struct DecodedFrame {
  LatentCode y;
  Tensor reconstruction;  // padded, clamped to [0,1]
};

// Latent only: the sequential part of decoding.
// The decoded hyper code is stored through z_out when given.
LatentCode decode_latent(const Model& model, const CodingContext& ctx, const FrameRecord& record,
                         const LatentCode& y_prev, const Shape& y_shape, bool factorized_y,
                         std::int64_t frame = -1, HyperCode* z_out = nullptr);
DecodedFrame decode_frame(const Model& model, const CodingContext& ctx, const FrameRecord& record,
                          const LatentCode& y_prev, const Shape& y_shape, bool factorized_y,
                          std::int64_t frame = -1);

// Clamped reconstruction of a latent, still padded.
Tensor reconstruct(const Model& model, const LatentCode& y);

struct InternalLearningOptions {
  int steps = 10;
  double lr = 0.05;  // for the per-frame total objective below
  double momentum = 0.9;
  double lambda = 0.01;
  Distortion metric = Distortion::kMse;
  // Fraction of the steps after which the learning rate is halved.
  double decay_at = 0.8;
};

struct InternalLearningResult {
  LatentCode y;
  HyperCode z;
  std::vector<double> objective;  // steps + 1 values, before each step and at the end
  bool fell_back = false;
};

// Optimizes continuous surrogates of (y, z) for one frame with the model
// frozen, then quantizes. height/width select the unpadded region the
// distortion is measured on.
InternalLearningResult internal_learn_frame(const Model& model, const Tensor& padded_frame,
                                            const LatentCode& y_prev,
                                            const InternalLearningOptions& opts,
                                            std::int64_t height, std::int64_t width);

// The objective optimized above, evaluated at continuous (y, z):
// height*width*distortion + lambda*bits, i.e. the training loss scaled to the
// whole frame. Rate uses noise-free interval masses at the given positions.
Tensor internal_learning_objective(const Model& model, const Tensor& padded_frame,
                                   const Tensor& y, const Tensor& z, const Tensor& y_prev,
                                   double lambda, Distortion metric, std::int64_t height,
                                   std::int64_t width);

struct EncodeOptions {
  bool internal_learning = false;
  InternalLearningOptions learning;
  bool factorized_y = false;  // unconditional ablation
  int threads = 0;            // 0 = default_threads()
};

struct EncodeResult {
  Bitstream bitstream;
  std::vector<FrameStats> stats;
  std::vector<LatentCode> latents;
  std::vector<Tensor> reconstructions;  // unpadded, clamped
  double bpp() const { return bitstream.bpp(); }
};

// frames: [1,3,H,W] each, values in [0,1], identical geometry.
EncodeResult encode_video(const Model& model, const std::vector<Tensor>& frames,
                          const EncodeOptions& opts = {});

struct DecodeResult {
  std::vector<LatentCode> latents;
  std::vector<HyperCode> hyper;  // empty shapes for factorized-y streams
  std::vector<Tensor> frames;  // unpadded, clamped
};

DecodeResult decode_video(const Model& model, const Bitstream& stream, int threads = 0);

// Per-frame bit accounting of a stream: payload sizes next to the ideal
// code lengths under the quantized tables and the unquantized model. The
// records are re-encoded from the decoded codes and must match byte for
// byte (kCorruption otherwise).
std::vector<FrameStats> account_bits(const Model& model, const Bitstream& stream,
                                     int threads = 0);

struct RdLoss {
  Tensor distortion;  // mean squared error per pixel and channel (or 1 - MS-SSIM)
  Tensor rate_bits;   // y and z
  Tensor bpp;
  Tensor total;       // distortion + lambda * max(bpp, R_a)
};

// Training objective at noise-quantized latents. y_prev is the (hard
// quantized) latent of the previous frame, or zeros.
RdLoss rd_loss(const Model& model, const Tensor& x, const Tensor& y_noisy, const Tensor& z_noisy,
               const Tensor& y_prev, double lambda, double target_bpp,
               Distortion metric = Distortion::kMse);

// Bits of y under the factorized ablation prior.
Tensor factorized_y_rate(const Model& model, const Tensor& y);

}  // namespace cevc
