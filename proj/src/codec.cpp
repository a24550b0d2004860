// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/codec.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cevc/metrics.hpp"
#include "cevc/ops.hpp"
#include "cevc/parallel.hpp"

namespace cevc {

namespace {

double symbol_bits(double p) { return -std::log2(std::max(p, kMinMass)); }

Shape hyper_shape(const NetworkConfig& cfg, const Shape& y_shape) {
  return {1, cfg.Nz, (y_shape[2] + 3) / 4, (y_shape[3] + 3) / 4};
}

Shape latent_shape(const NetworkConfig& cfg, std::int64_t padded_h, std::int64_t padded_w) {
  return {1, cfg.N, padded_h / cfg.downscale(), padded_w / cfg.downscale()};
}

// Sequence of one table per element, computed on demand from the model.
class GmmTableSource {
 public:
  GmmTableSource(const GmmParams& params, int L) : params_(params), L_(L) {}
  const CdfTable& operator()(std::size_t element) {
    pmf_ = gmm_pmf(params_, static_cast<std::int64_t>(element), L_);
    table_ = quantize_cdf(pmf_);
    return table_;
  }
  const DiscretePmf& pmf() const { return pmf_; }

 private:
  const GmmParams& params_;
  int L_;
  DiscretePmf pmf_;
  CdfTable table_;
};

}  // namespace

Tensor pad_replicate(const Tensor& frame, std::int64_t multiple) {
  if (frame.rank() != 4) fail(ErrorKind::kDimension, "pad_replicate expects [B,C,H,W]");
  const auto BC = frame.dim(0) * frame.dim(1), H = frame.dim(2), W = frame.dim(3);
  const auto Hp = (H + multiple - 1) / multiple * multiple;
  const auto Wp = (W + multiple - 1) / multiple * multiple;
  if (Hp == H && Wp == W) return frame;
  std::vector<double> out(static_cast<std::size_t>(BC * Hp * Wp));
  const auto src = frame.data();
  for (std::int64_t p = 0; p < BC; ++p) {
    for (std::int64_t r = 0; r < Hp; ++r) {
      const auto sr = std::min(r, H - 1);
      for (std::int64_t c = 0; c < Wp; ++c) {
        out[(p * Hp + r) * Wp + c] = src[(p * H + sr) * W + std::min(c, W - 1)];
      }
    }
  }
  return Tensor::from_data({frame.dim(0), frame.dim(1), Hp, Wp}, std::move(out));
}

Tensor crop(const Tensor& frame, std::int64_t height, std::int64_t width) {
  if (frame.dim(2) == height && frame.dim(3) == width) return frame;
  return ops::crop_spatial(frame, height, width);
}

CodingContext::CodingContext(const Model& model) {
  const auto& cfg = model.config();
  for (int c = 0; c < cfg.Nz; ++c) z_tables_.push_back(quantize_cdf(model.z_prior().pmf(c, cfg.L)));
  if (cfg.factorized_y_ablation) {
    for (int c = 0; c < cfg.N; ++c) {
      y_tables_.push_back(quantize_cdf(model.y_prior().pmf(c, cfg.L)));
    }
  }
}

LatentCode encode_latent(const Model& model, const Tensor& padded_frame, std::int64_t frame) {
  NoGradGuard no_grad;
  return quantize(model.image_encode(padded_frame), model.config().L, frame);
}

HyperCode encode_hyper(const Model& model, const LatentCode& y, const LatentCode& y_prev) {
  NoGradGuard no_grad;
  return quantize(model.hyper_encode(dequantize(y), dequantize(y_prev)), model.config().L,
                  y.origin);
}

FrameCodes code_frame(const Model& model, const CodingContext& ctx, LatentCode y, HyperCode z,
                      const LatentCode& y_prev, bool factorized_y) {
  NoGradGuard no_grad;
  const auto& cfg = model.config();
  FrameCodes out;
  out.stats.clamped = y.clamped + z.clamped;
  if (factorized_y) {
    RangeEncoder enc;
    const auto plane = static_cast<std::size_t>(y.plane());
    for (std::size_t e = 0; e < y.symbols.size(); ++e) {
      const auto c = static_cast<int>(e / plane);
      const CdfTable& t = ctx.y_factorized_table(c);
      enc.encode(y.symbols[e], t);
      out.stats.y_table_bits -= std::log2(t.prob(y.symbols[e]));
    }
    out.record.y = enc.finish();
    out.record.z = RangeEncoder().finish();
    // Unquantized model bits for the factorized path.
    for (int c = 0; c < cfg.N; ++c) {
      const DiscretePmf pmf = model.y_prior().pmf(c, cfg.L);
      for (std::size_t i = 0; i < plane; ++i) {
        out.stats.y_model_bits += symbol_bits(pmf.prob(y.symbols[c * plane + i]));
      }
    }
  } else {
    const auto zplane = static_cast<std::size_t>(z.plane());
    RangeEncoder zenc;
    for (std::size_t e = 0; e < z.symbols.size(); ++e) {
      const CdfTable& t = ctx.z_table(static_cast<std::int64_t>(e / zplane));
      zenc.encode(z.symbols[e], t);
      out.stats.z_table_bits -= std::log2(t.prob(z.symbols[e]));
    }
    out.record.z = zenc.finish();
    for (int c = 0; c < cfg.Nz; ++c) {
      const DiscretePmf pmf = model.z_prior().pmf(c, cfg.L);
      for (std::size_t i = 0; i < zplane; ++i) {
        out.stats.z_model_bits += symbol_bits(pmf.prob(z.symbols[c * zplane + i]));
      }
    }

    const GmmParams params = model.hyper_decode(dequantize(z), dequantize(y_prev));
    GmmTableSource tables(params, cfg.L);
    RangeEncoder yenc;
    for (std::size_t e = 0; e < y.symbols.size(); ++e) {
      const CdfTable& t = tables(e);
      yenc.encode(y.symbols[e], t);
      out.stats.y_table_bits -= std::log2(t.prob(y.symbols[e]));
      out.stats.y_model_bits += symbol_bits(tables.pmf().prob(y.symbols[e]));
    }
    out.record.y = yenc.finish();
  }
  out.stats.z_bytes = out.record.z.bytes.size();
  out.stats.y_bytes = out.record.y.bytes.size();
  out.y = std::move(y);
  out.z = std::move(z);
  return out;
}

FrameCodes encode_frame(const Model& model, const CodingContext& ctx, const Tensor& padded_frame,
                        const LatentCode& y_prev, bool factorized_y) {
  LatentCode y = encode_latent(model, padded_frame, y_prev.origin + 1);
  HyperCode z;
  if (!factorized_y) z = encode_hyper(model, y, y_prev);
  return code_frame(model, ctx, std::move(y), std::move(z), y_prev, factorized_y);
}

LatentCode decode_latent(const Model& model, const CodingContext& ctx, const FrameRecord& record,
                         const LatentCode& y_prev, const Shape& y_shape, bool factorized_y,
                         std::int64_t frame, HyperCode* z_out) {
  NoGradGuard no_grad;
  const auto& cfg = model.config();
  LatentCode y;
  y.shape = y_shape;
  y.origin = frame;
  const auto n = static_cast<std::size_t>(numel_of(y_shape));
  const auto plane = static_cast<std::size_t>(y_shape[2] * y_shape[3]);
  try {
    if (factorized_y) {
      y.symbols = rc_decode(
          record.y, [&](std::size_t e) -> const CdfTable& { return ctx.y_factorized_table(e / plane); },
          n);
      return y;
    }
    HyperCode z;
    z.shape = hyper_shape(cfg, y_shape);
    const auto zplane = static_cast<std::size_t>(z.shape[2] * z.shape[3]);
    z.symbols = rc_decode(
        record.z, [&](std::size_t e) -> const CdfTable& { return ctx.z_table(e / zplane); },
        static_cast<std::size_t>(numel_of(z.shape)));
    const GmmParams params = model.hyper_decode(dequantize(z), dequantize(y_prev));
    GmmTableSource tables(params, cfg.L);
    y.symbols = rc_decode(record.y, tables, n);
    if (z_out != nullptr) *z_out = std::move(z);
  } catch (const Error& e) {
    fail(e.kind(), "frame " + std::to_string(frame) + ": " + e.what(), frame);
  }
  return y;
}

Tensor reconstruct(const Model& model, const LatentCode& y) {
  NoGradGuard no_grad;
  return ops::clamp(model.image_decode(dequantize(y)), 0.0, 1.0);
}

DecodedFrame decode_frame(const Model& model, const CodingContext& ctx, const FrameRecord& record,
                          const LatentCode& y_prev, const Shape& y_shape, bool factorized_y,
                          std::int64_t frame) {
  DecodedFrame out;
  out.y = decode_latent(model, ctx, record, y_prev, y_shape, factorized_y, frame);
  out.reconstruction = reconstruct(model, out.y);
  return out;
}

Tensor internal_learning_objective(const Model& model, const Tensor& padded_frame,
                                   const Tensor& y, const Tensor& z, const Tensor& y_prev,
                                   double lambda, Distortion metric, std::int64_t height,
                                   std::int64_t width) {
  const Tensor x_hat = ops::clamp(model.image_decode(y), 0.0, 1.0);
  const Tensor a = crop(x_hat, height, width);
  const Tensor b = crop(padded_frame, height, width);
  const Tensor distortion =
      metric == Distortion::kMse ? ops::mse(a, b) : metrics::msssim_distortion(a, b);
  const GmmParams params = model.hyper_decode(z, y_prev);
  const Tensor bits = ops::add(rate_nll(gmm_interval_mass(y, params)),
                               rate_nll(model.z_prior().interval_mass(z)));
  // Per-frame totals rather than per-pixel means: the gradient reaching each
  // latent element then does not shrink with the frame area, so one step
  // size serves every resolution.
  const double pixels = static_cast<double>(height * width);
  return ops::add(ops::mul_scalar(distortion, pixels), ops::mul_scalar(bits, lambda));
}

InternalLearningResult internal_learn_frame(const Model& model, const Tensor& padded_frame,
                                            const LatentCode& y_prev,
                                            const InternalLearningOptions& opts,
                                            std::int64_t height, std::int64_t width) {
  const auto& cfg = model.config();
  InternalLearningResult out;
  // Start from the encoder's outputs: continuous y, and z analysed from the
  // quantized y exactly as the base encoder does.
  Tensor y0, z0;
  {
    NoGradGuard no_grad;
    y0 = model.image_encode(padded_frame);
    z0 = model.hyper_encode(dequantize(quantize(y0, cfg.L)), dequantize(y_prev));
  }
  const Tensor y_prev_t = dequantize(y_prev);
  const auto digest_before = model.weight_digest();

  Tensor y = y0.detach(), z = z0.detach();
  std::vector<double> vy(static_cast<std::size_t>(y.numel()), 0.0);
  std::vector<double> vz(static_cast<std::size_t>(z.numel()), 0.0);
  const int decay_step = static_cast<int>(std::ceil(opts.decay_at * opts.steps));
  try {
    for (int step = 0; step <= opts.steps; ++step) {
      y.set_requires_grad(true);
      z.set_requires_grad(true);
      y.zero_grad();
      z.zero_grad();
      Tape tape;
      const Tensor obj = internal_learning_objective(model, padded_frame, y, z, y_prev_t,
                                                     opts.lambda, opts.metric, height, width);
      out.objective.push_back(obj.item());
      if (step == opts.steps) break;
      tape.backward(obj);
      const double lr = step >= decay_step ? 0.5 * opts.lr : opts.lr;
      auto nesterov = [&](Tensor& p, std::vector<double>& v) {
        auto values = p.mutable_data();
        const auto g = p.grad();
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (!std::isfinite(g[i])) fail(ErrorKind::kNumeric, "non-finite gradient");
          v[i] = opts.momentum * v[i] + g[i];
          values[i] -= lr * (g[i] + opts.momentum * v[i]);
        }
      };
      nesterov(y, vy);
      nesterov(z, vz);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    out.fell_back = true;
    y = y0;
    z = z0;
  }
  if (model.weight_digest() != digest_before) {
    fail(ErrorKind::kContract, "internal learning modified model weights");
  }
  out.y = quantize(y, cfg.L, y_prev.origin + 1);
  out.z = quantize(z, cfg.L, y_prev.origin + 1);
  return out;
}

EncodeResult encode_video(const Model& model, const std::vector<Tensor>& frames,
                          const EncodeOptions& opts) {
  const auto& cfg = model.config();
  if (frames.empty()) fail(ErrorKind::kContract, "encode_video: no frames");
  const Shape geometry = frames.front().shape();
  if (geometry.size() != 4 || geometry[0] != 1 || geometry[1] != 3) {
    fail(ErrorKind::kDimension, "frames must be [1,3,H,W], got " + shape_str(geometry));
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].shape() != geometry) {
      fail(ErrorKind::kGeometry, "frame " + std::to_string(i) + " geometry differs", i);
    }
  }
  const auto H = geometry[2], W = geometry[3];
  if (H > 65535 || W > 65535) fail(ErrorKind::kGeometry, "frame too large for the container");
  if (opts.factorized_y && !cfg.factorized_y_ablation) {
    fail(ErrorKind::kContract, "model has no factorized y prior");
  }
  const auto m = cfg.downscale();
  const int threads = opts.threads > 0 ? opts.threads : default_threads();
  const std::size_t n = frames.size();

  EncodeResult out;
  auto& h = out.bitstream.header;
  h.model_hash = model.hash();
  h.frame_count = static_cast<std::uint32_t>(n);
  h.height = static_cast<std::uint16_t>(H);
  h.width = static_cast<std::uint16_t>(W);
  h.pad_h = static_cast<std::uint8_t>((m - H % m) % m);
  h.pad_w = static_cast<std::uint8_t>((m - W % m) % m);
  h.N = static_cast<std::uint16_t>(cfg.N);
  h.Nz = static_cast<std::uint16_t>(cfg.Nz);
  h.num_down = static_cast<std::uint8_t>(cfg.num_down);
  h.L = static_cast<std::uint16_t>(cfg.L);
  h.K = static_cast<std::uint8_t>(cfg.K);
  h.flags = static_cast<std::uint8_t>((opts.internal_learning ? kFlagInternalLearning : 0) |
                                      (opts.factorized_y ? kFlagFactorizedY : 0));

  const CodingContext ctx(model);
  std::vector<Tensor> padded(n);
  parallel_for(n, threads, [&](std::size_t i) { padded[i] = pad_replicate(frames[i], m); });
  const Shape y_shape = latent_shape(cfg, padded[0].dim(2), padded[0].dim(3));
  const LatentCode zero = zero_code(y_shape);

  std::vector<FrameCodes> codes(n);
  if (opts.internal_learning && !opts.factorized_y) {
    // Each frame conditions on the previous frame's optimized code.
    for (std::size_t i = 0; i < n; ++i) {
      const LatentCode& prev = i == 0 ? zero : codes[i - 1].y;
      InternalLearningResult il =
          internal_learn_frame(model, padded[i], prev, opts.learning, H, W);
      codes[i] = code_frame(model, ctx, std::move(il.y), std::move(il.z), prev, false);
      codes[i].stats.internal_learning = true;
      codes[i].stats.fell_back = il.fell_back;
      codes[i].stats.objective = std::move(il.objective);
    }
  } else {
    std::vector<LatentCode> ys(n);
    parallel_for(n, threads, [&](std::size_t i) {
      ys[i] = encode_latent(model, padded[i], static_cast<std::int64_t>(i));
    });
    parallel_for(n, threads, [&](std::size_t i) {
      const LatentCode& prev = i == 0 ? zero : ys[i - 1];
      HyperCode z;
      if (!opts.factorized_y) z = encode_hyper(model, ys[i], prev);
      codes[i] = code_frame(model, ctx, ys[i], std::move(z), prev, opts.factorized_y);
    });
  }

  out.stats.resize(n);
  out.reconstructions.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const Tensor rec = crop(reconstruct(model, codes[i].y), H, W);
    codes[i].stats.mse = metrics::mse(rec, frames[i]);
    out.reconstructions[i] = rec;
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.bitstream.frames.push_back(std::move(codes[i].record));
    out.latents.push_back(std::move(codes[i].y));
    out.stats[i] = std::move(codes[i].stats);
  }
  return out;
}

DecodeResult decode_video(const Model& model, const Bitstream& stream, int threads) {
  const auto& h = stream.header;
  check_compatible(h, model);
  if (stream.frames.size() != h.frame_count) {
    fail(ErrorKind::kFormat, "bitstream holds " + std::to_string(stream.frames.size()) +
                                 " records, header says " + std::to_string(h.frame_count));
  }
  if (threads <= 0) threads = default_threads();
  const auto& cfg = model.config();
  const bool factorized = (h.flags & kFlagFactorizedY) != 0;
  const Shape y_shape = latent_shape(cfg, h.height + h.pad_h, h.width + h.pad_w);
  const CodingContext ctx(model);
  const std::size_t n = h.frame_count;

  DecodeResult out;
  out.latents.resize(n);
  out.hyper.resize(n);
  const LatentCode zero = zero_code(y_shape);
  for (std::size_t i = 0; i < n; ++i) {
    const LatentCode& prev = i == 0 ? zero : out.latents[i - 1];
    out.latents[i] = decode_latent(model, ctx, stream.frames[i], prev, y_shape, factorized,
                                   static_cast<std::int64_t>(i), &out.hyper[i]);
  }
  out.frames.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out.frames[i] = crop(reconstruct(model, out.latents[i]), h.height, h.width);
  });
  return out;
}

std::vector<FrameStats> account_bits(const Model& model, const Bitstream& stream, int threads) {
  const DecodeResult dec = decode_video(model, stream, threads);
  const bool factorized = (stream.header.flags & kFlagFactorizedY) != 0;
  const CodingContext ctx(model);
  const std::size_t n = dec.latents.size();
  std::vector<FrameStats> stats(n);
  if (n == 0) return stats;
  const LatentCode zero = zero_code(dec.latents.front().shape);
  parallel_for(n, threads > 0 ? threads : default_threads(), [&](std::size_t i) {
    FrameCodes codes = code_frame(model, ctx, dec.latents[i], dec.hyper[i],
                                  i == 0 ? zero : dec.latents[i - 1], factorized);
    const FrameRecord& rec = stream.frames[i];
    if (codes.record.y.bytes != rec.y.bytes || codes.record.z.bytes != rec.z.bytes) {
      fail(ErrorKind::kCorruption,
           "frame " + std::to_string(i) + " does not re-encode to its stored payload", i);
    }
    stats[i] = std::move(codes.stats);
  });
  return stats;
}

Tensor factorized_y_rate(const Model& model, const Tensor& y) {
  return rate_nll(model.y_prior().interval_mass(y));
}

RdLoss rd_loss(const Model& model, const Tensor& x, const Tensor& y_noisy, const Tensor& z_noisy,
               const Tensor& y_prev, double lambda, double target_bpp, Distortion metric) {
  RdLoss out;
  const Tensor x_hat = model.image_decode(y_noisy);
  out.distortion = metric == Distortion::kMse ? ops::mse(x_hat, x)
                                              : metrics::msssim_distortion(x_hat, x);
  const GmmParams params = model.hyper_decode(z_noisy, y_prev);
  out.rate_bits = ops::add(rate_nll(gmm_interval_mass(y_noisy, params)),
                           rate_nll(model.z_prior().interval_mass(z_noisy)));
  out.bpp = ops::mul_scalar(out.rate_bits, 1.0 / static_cast<double>(x.dim(2) * x.dim(3)));
  out.total = ops::add(out.distortion,
                       ops::mul_scalar(rate_clamp(out.bpp, target_bpp), lambda));
  return out;
}

}  // namespace cevc
