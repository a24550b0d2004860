// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/cevc.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "cevc/bitstream.hpp"
#include "cevc/codec.hpp"
#include "cevc/metrics.hpp"
#include "cevc/model.hpp"
#include "cevc/train.hpp"
#include "cevc/video.hpp"

struct cevc_model {
  std::unique_ptr<cevc::Model> model;
};
struct cevc_video {
  cevc::Video frames;
};
struct cevc_encoding {
  cevc::EncodeResult result;
  std::vector<std::uint8_t> bytes;
};
struct cevc_decoding {
  cevc::DecodeResult result;
};
struct cevc_bitstream {
  cevc::Bitstream stream;
};

namespace {

thread_local std::string g_error;
thread_local std::int64_t g_error_index = -1;

cevc_status status_of(cevc::ErrorKind kind) {
  using cevc::ErrorKind;
  switch (kind) {
    case ErrorKind::kDimension: return CEVC_ERR_DIMENSION;
    case ErrorKind::kDomain: return CEVC_ERR_DOMAIN;
    case ErrorKind::kContract: return CEVC_ERR_CONTRACT;
    case ErrorKind::kGeometry: return CEVC_ERR_GEOMETRY;
    case ErrorKind::kCapacity: return CEVC_ERR_CAPACITY;
    case ErrorKind::kCorruption: return CEVC_ERR_CORRUPTION;
    case ErrorKind::kDesync: return CEVC_ERR_DESYNC;
    case ErrorKind::kFormat: return CEVC_ERR_FORMAT;
    case ErrorKind::kNumeric: return CEVC_ERR_NUMERIC;
    case ErrorKind::kIo: return CEVC_ERR_IO;
  }
  return CEVC_ERR_INTERNAL;
}

cevc_status set_error(cevc_status status, std::string message, std::int64_t index = -1) {
  g_error = std::move(message);
  g_error_index = index;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
cevc_status guarded(Fn&& fn) {
  try {
    g_error.clear();
    g_error_index = -1;
    fn();
    return CEVC_OK;
  } catch (const cevc::Error& e) {
    return set_error(status_of(e.kind()), e.what(), e.index());
  } catch (const std::bad_alloc&) {
    return set_error(CEVC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CEVC_ERR_INTERNAL, e.what());
  }
}

#define CEVC_REQUIRE(cond)                                                           \
  do {                                                                               \
    if (!(cond)) return set_error(CEVC_ERR_INVALID_ARGUMENT, "invalid argument: " #cond); \
  } while (0)

cevc::Distortion metric_of(cevc_metric m) {
  return m == CEVC_METRIC_MSSSIM ? cevc::Distortion::kMsssim : cevc::Distortion::kMse;
}

bool valid_metric(cevc_metric m) { return m == CEVC_METRIC_MSE || m == CEVC_METRIC_MSSSIM; }

cevc::NetworkConfig to_net(const cevc_model_config& c) {
  cevc::NetworkConfig n;
  n.N = c.N;
  n.M = c.M;
  n.K = c.K;
  n.Nz = c.Nz;
  n.num_down = c.num_down;
  n.L = c.L;
  n.sigma_min = c.sigma_min;
  n.factorized_y_ablation = c.factorized_y_ablation != 0;
  return n;
}

cevc_frame_stats to_c(const cevc::FrameStats& s) {
  cevc_frame_stats o{};
  o.z_bytes = s.z_bytes;
  o.y_bytes = s.y_bytes;
  o.z_table_bits = s.z_table_bits;
  o.y_table_bits = s.y_table_bits;
  o.z_model_bits = s.z_model_bits;
  o.y_model_bits = s.y_model_bits;
  o.clamped = s.clamped;
  o.mse = s.mse;
  o.internal_learning = s.internal_learning ? 1 : 0;
  o.fell_back = s.fell_back ? 1 : 0;
  o.objective_count = s.objective.size();
  return o;
}

cevc_status copy_latent(const cevc::LatentCode& y, int32_t* out, size_t capacity,
                        size_t* count) {
  if (count != nullptr) *count = y.symbols.size();
  if (out == nullptr) return CEVC_OK;
  if (capacity < y.symbols.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "latent buffer too small");
  }
  std::copy(y.symbols.begin(), y.symbols.end(), out);
  return CEVC_OK;
}

}  // namespace

extern "C" {

const char* cevc_status_string(cevc_status status) {
  switch (status) {
    case CEVC_OK: return "ok";
    case CEVC_ERR_DIMENSION: return "dimension error";
    case CEVC_ERR_DOMAIN: return "domain error";
    case CEVC_ERR_CONTRACT: return "contract violation";
    case CEVC_ERR_GEOMETRY: return "geometry error";
    case CEVC_ERR_CAPACITY: return "capacity error";
    case CEVC_ERR_CORRUPTION: return "corruption";
    case CEVC_ERR_DESYNC: return "decoder desync";
    case CEVC_ERR_FORMAT: return "format error";
    case CEVC_ERR_NUMERIC: return "numeric failure";
    case CEVC_ERR_IO: return "i/o error";
    case CEVC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CEVC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cevc_last_error(void) { return g_error.c_str(); }
int64_t cevc_last_error_index(void) { return g_error_index; }
const char* cevc_version(void) { return "1.0.0"; }

void cevc_model_config_default(cevc_model_config* config) {
  if (config == nullptr) return;
  const cevc::NetworkConfig n;
  *config = {n.N, n.M, n.K, n.Nz, n.num_down, n.L, n.sigma_min, n.factorized_y_ablation ? 1 : 0};
}

cevc_status cevc_model_create(const cevc_model_config* config, uint64_t seed, cevc_model** out) {
  CEVC_REQUIRE(config != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<cevc_model>();
    m->model = std::make_unique<cevc::Model>(to_net(*config), seed);
    *out = m.release();
  });
}

cevc_status cevc_model_load(const char* path, cevc_model** out) {
  CEVC_REQUIRE(path != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<cevc_model>();
    m->model = cevc::Model::load(path);
    *out = m.release();
  });
}

cevc_status cevc_model_save(const cevc_model* model, const char* path) {
  CEVC_REQUIRE(model != nullptr && path != nullptr);
  return guarded([&] { model->model->save(path); });
}

void cevc_model_free(cevc_model* model) { delete model; }

cevc_status cevc_model_get_config(const cevc_model* model, cevc_model_config* out) {
  CEVC_REQUIRE(model != nullptr && out != nullptr);
  const auto& n = model->model->config();
  *out = {n.N, n.M, n.K, n.Nz, n.num_down, n.L, n.sigma_min, n.factorized_y_ablation ? 1 : 0};
  return CEVC_OK;
}

cevc_status cevc_model_hash(const cevc_model* model, uint8_t out[8]) {
  CEVC_REQUIRE(model != nullptr && out != nullptr);
  return guarded([&] {
    const auto h = model->model->hash();
    std::copy(h.begin(), h.end(), out);
  });
}

cevc_status cevc_model_training_info(const cevc_model* model, uint64_t* seed, double* lambda,
                                     uint64_t* steps) {
  CEVC_REQUIRE(model != nullptr);
  const auto& t = model->model->training_info;
  if (seed != nullptr) *seed = t.seed;
  if (lambda != nullptr) *lambda = t.lambda;
  if (steps != nullptr) *steps = t.steps;
  return CEVC_OK;
}

cevc_status cevc_model_parameter_count(const cevc_model* model, uint64_t* out) {
  CEVC_REQUIRE(model != nullptr && out != nullptr);
  *out = model->model->params().count();
  return CEVC_OK;
}

void cevc_synthetic_spec_default(cevc_synthetic_spec* spec) {
  if (spec == nullptr) return;
  const cevc::SyntheticVideoSpec s;
  *spec = {s.seed, s.frames, s.height, s.width, s.num_objects, s.max_velocity};
}

cevc_status cevc_video_synthetic(const cevc_synthetic_spec* spec, cevc_video** out) {
  CEVC_REQUIRE(spec != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    cevc::SyntheticVideoSpec s;
    s.seed = spec->seed;
    s.frames = spec->frames;
    s.height = spec->height;
    s.width = spec->width;
    s.num_objects = spec->num_objects;
    s.max_velocity = spec->max_velocity;
    auto v = std::make_unique<cevc_video>();
    v->frames = cevc::generate_synthetic_video(s);
    *out = v.release();
  });
}

cevc_status cevc_video_create(uint32_t frames, uint32_t height, uint32_t width,
                              cevc_video** out) {
  CEVC_REQUIRE(out != nullptr && height > 0 && width > 0);
  *out = nullptr;
  return guarded([&] {
    auto v = std::make_unique<cevc_video>();
    for (uint32_t i = 0; i < frames; ++i) {
      v->frames.push_back(cevc::Tensor::zeros({1, 3, height, width}));
    }
    *out = v.release();
  });
}

cevc_status cevc_video_read_raw(const char* path, cevc_video** out) {
  CEVC_REQUIRE(path != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto v = std::make_unique<cevc_video>();
    v->frames = cevc::read_raw_video(path);
    *out = v.release();
  });
}

cevc_status cevc_video_write_raw(const cevc_video* video, const char* path) {
  CEVC_REQUIRE(video != nullptr && path != nullptr);
  return guarded([&] { cevc::write_raw_video(path, video->frames); });
}

void cevc_video_free(cevc_video* video) { delete video; }

cevc_status cevc_video_info(const cevc_video* video, uint32_t* frames, uint32_t* height,
                            uint32_t* width) {
  CEVC_REQUIRE(video != nullptr);
  const bool empty = video->frames.empty();
  if (frames != nullptr) *frames = static_cast<uint32_t>(video->frames.size());
  if (height != nullptr) *height = empty ? 0 : static_cast<uint32_t>(video->frames[0].dim(2));
  if (width != nullptr) *width = empty ? 0 : static_cast<uint32_t>(video->frames[0].dim(3));
  return CEVC_OK;
}

cevc_status cevc_video_get_frame(const cevc_video* video, uint32_t index, double* out) {
  CEVC_REQUIRE(video != nullptr && out != nullptr);
  if (index >= video->frames.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range", index);
  }
  const auto d = video->frames[index].data();
  std::copy(d.begin(), d.end(), out);
  return CEVC_OK;
}

cevc_status cevc_video_set_frame(cevc_video* video, uint32_t index, const double* data) {
  CEVC_REQUIRE(video != nullptr && data != nullptr);
  if (index >= video->frames.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range", index);
  }
  const auto& f = video->frames[index];
  // Frames may be shared with other handles; replace instead of writing.
  video->frames[index] = cevc::Tensor::from_data(
      f.shape(), std::vector<double>(data, data + f.numel()));
  return CEVC_OK;
}

cevc_status cevc_video_quantize_8bit(cevc_video* video) {
  CEVC_REQUIRE(video != nullptr);
  return guarded([&] { video->frames = cevc::quantize_to_8bit(video->frames); });
}

cevc_status cevc_frame_metrics(const cevc_video* a, const cevc_video* b, uint32_t index,
                               double* mse, double* psnr, double* msssim) {
  CEVC_REQUIRE(a != nullptr && b != nullptr);
  if (index >= a->frames.size() || index >= b->frames.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range", index);
  }
  return guarded([&] {
    const auto& x = a->frames[index];
    const auto& y = b->frames[index];
    const double m = cevc::metrics::mse(x, y);
    if (mse != nullptr) *mse = m;
    if (psnr != nullptr) *psnr = cevc::metrics::psnr_from_mse(m);
    if (msssim != nullptr) *msssim = cevc::metrics::msssim(x, y);
  });
}

void cevc_train_config_default(cevc_train_config* config) {
  if (config == nullptr) return;
  const cevc::TrainConfig t;
  *config = {t.lambda, t.target_bpp, t.lr,      t.batch,          t.crop,
             t.epochs, t.steps_per_epoch, t.seed, CEVC_METRIC_MSE, t.ablation_weight};
}

cevc_status cevc_train(cevc_model* model, const cevc_train_config* config,
                       const cevc_video* const* train_clips, size_t train_count,
                       const cevc_video* const* val_clips, size_t val_count,
                       cevc_epoch_callback callback, void* user, int* best_epoch) {
  CEVC_REQUIRE(model != nullptr && config != nullptr && valid_metric(config->metric));
  CEVC_REQUIRE(train_clips != nullptr || train_count == 0);
  CEVC_REQUIRE(val_clips != nullptr || val_count == 0);
  for (size_t i = 0; i < train_count; ++i) CEVC_REQUIRE(train_clips[i] != nullptr);
  for (size_t i = 0; i < val_count; ++i) CEVC_REQUIRE(val_clips[i] != nullptr);
  return guarded([&] {
    cevc::TrainConfig t;
    t.lambda = config->lambda;
    t.target_bpp = config->target_bpp;
    t.lr = config->lr;
    t.batch = config->batch;
    t.crop = config->crop;
    t.epochs = config->epochs;
    t.steps_per_epoch = config->steps_per_epoch;
    t.seed = config->seed;
    t.metric = metric_of(config->metric);
    t.ablation_weight = config->ablation_weight;
    std::vector<cevc::Video> tr, va;
    for (size_t i = 0; i < train_count; ++i) tr.push_back(train_clips[i]->frames);
    for (size_t i = 0; i < val_count; ++i) va.push_back(val_clips[i]->frames);
    cevc::EpochCallback cb;
    if (callback != nullptr) {
      cb = [&](const cevc::EpochLog& l) {
        const cevc_epoch_log c{l.epoch,          l.steps,        l.train_distortion,
                               l.train_bpp,      l.train_total,  l.val_distortion,
                               l.val_bpp,        l.val_total,    l.seconds};
        callback(&c, user);
      };
    }
    const auto result = cevc::train(*model->model, t, tr, va, cb);
    if (best_epoch != nullptr) *best_epoch = result.best_epoch;
  });
}

void cevc_encode_options_default(cevc_encode_options* options) {
  if (options == nullptr) return;
  const cevc::EncodeOptions e;
  *options = {e.internal_learning ? 1 : 0,
              e.learning.steps,
              e.learning.lr,
              e.learning.momentum,
              e.learning.lambda,
              CEVC_METRIC_MSE,
              e.learning.decay_at,
              e.factorized_y ? 1 : 0,
              e.threads};
}

cevc_status cevc_encode(const cevc_model* model, const cevc_video* video,
                        const cevc_encode_options* options, cevc_encoding** out) {
  CEVC_REQUIRE(model != nullptr && video != nullptr && options != nullptr && out != nullptr);
  CEVC_REQUIRE(valid_metric(options->metric));
  *out = nullptr;
  return guarded([&] {
    cevc::EncodeOptions e;
    e.internal_learning = options->internal_learning != 0;
    e.learning.steps = options->steps;
    e.learning.lr = options->lr;
    e.learning.momentum = options->momentum;
    e.learning.lambda = options->lambda;
    e.learning.metric = metric_of(options->metric);
    e.learning.decay_at = options->decay_at;
    e.factorized_y = options->factorized_y != 0;
    e.threads = options->threads;
    auto enc = std::make_unique<cevc_encoding>();
    enc->result = cevc::encode_video(*model->model, video->frames, e);
    enc->bytes = enc->result.bitstream.serialize();
    *out = enc.release();
  });
}

void cevc_encoding_free(cevc_encoding* encoding) { delete encoding; }

cevc_status cevc_encoding_bytes(const cevc_encoding* encoding, const uint8_t** data,
                                size_t* size) {
  CEVC_REQUIRE(encoding != nullptr && data != nullptr && size != nullptr);
  *data = encoding->bytes.data();
  *size = encoding->bytes.size();
  return CEVC_OK;
}

cevc_status cevc_encoding_bpp(const cevc_encoding* encoding, double* out) {
  CEVC_REQUIRE(encoding != nullptr && out != nullptr);
  *out = encoding->result.bpp();
  return CEVC_OK;
}

cevc_status cevc_encoding_frame_stats(const cevc_encoding* encoding, size_t index,
                                      cevc_frame_stats* out) {
  CEVC_REQUIRE(encoding != nullptr && out != nullptr);
  if (index >= encoding->result.stats.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range",
                     static_cast<std::int64_t>(index));
  }
  *out = to_c(encoding->result.stats[index]);
  return CEVC_OK;
}

cevc_status cevc_encoding_objective(const cevc_encoding* encoding, size_t index, double* out,
                                    size_t capacity) {
  CEVC_REQUIRE(encoding != nullptr && out != nullptr);
  if (index >= encoding->result.stats.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range",
                     static_cast<std::int64_t>(index));
  }
  const auto& obj = encoding->result.stats[index].objective;
  if (capacity < obj.size()) return set_error(CEVC_ERR_INVALID_ARGUMENT, "buffer too small");
  std::copy(obj.begin(), obj.end(), out);
  return CEVC_OK;
}

cevc_status cevc_encoding_reconstruction(const cevc_encoding* encoding, cevc_video** out) {
  CEVC_REQUIRE(encoding != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto v = std::make_unique<cevc_video>();
    v->frames = encoding->result.reconstructions;
    *out = v.release();
  });
}

cevc_status cevc_encoding_latent(const cevc_encoding* encoding, size_t index, int32_t* out,
                                 size_t capacity, size_t* count) {
  CEVC_REQUIRE(encoding != nullptr);
  if (index >= encoding->result.latents.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range",
                     static_cast<std::int64_t>(index));
  }
  return copy_latent(encoding->result.latents[index], out, capacity, count);
}

cevc_status cevc_decode(const cevc_model* model, const uint8_t* data, size_t size, int threads,
                        cevc_decoding** out) {
  CEVC_REQUIRE(model != nullptr && out != nullptr && (data != nullptr || size == 0));
  *out = nullptr;
  return guarded([&] {
    const cevc::Bitstream stream = cevc::Bitstream::parse(std::vector<uint8_t>(data, data + size));
    auto dec = std::make_unique<cevc_decoding>();
    dec->result = cevc::decode_video(*model->model, stream, threads);
    *out = dec.release();
  });
}

void cevc_decoding_free(cevc_decoding* decoding) { delete decoding; }

cevc_status cevc_decoding_video(const cevc_decoding* decoding, cevc_video** out) {
  CEVC_REQUIRE(decoding != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] {
    auto v = std::make_unique<cevc_video>();
    v->frames = decoding->result.frames;
    *out = v.release();
  });
}

cevc_status cevc_decoding_latent(const cevc_decoding* decoding, size_t index, int32_t* out,
                                 size_t capacity, size_t* count) {
  CEVC_REQUIRE(decoding != nullptr);
  if (index >= decoding->result.latents.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range",
                     static_cast<std::int64_t>(index));
  }
  return copy_latent(decoding->result.latents[index], out, capacity, count);
}

cevc_status cevc_bitstream_parse(const uint8_t* data, size_t size, cevc_bitstream** out) {
  CEVC_REQUIRE(out != nullptr && (data != nullptr || size == 0));
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<cevc_bitstream>();
    s->stream = cevc::Bitstream::parse(std::vector<uint8_t>(data, data + size));
    *out = s.release();
  });
}

void cevc_bitstream_free(cevc_bitstream* stream) { delete stream; }

cevc_status cevc_bitstream_header(const cevc_bitstream* stream, cevc_header* out) {
  CEVC_REQUIRE(stream != nullptr && out != nullptr);
  const auto& h = stream->stream.header;
  *out = {};
  out->version = h.version;
  std::copy(h.model_hash.begin(), h.model_hash.end(), out->model_hash);
  out->frame_count = h.frame_count;
  out->height = h.height;
  out->width = h.width;
  out->pad_h = h.pad_h;
  out->pad_w = h.pad_w;
  out->N = h.N;
  out->Nz = h.Nz;
  out->num_down = h.num_down;
  out->L = h.L;
  out->K = h.K;
  out->flags = h.flags;
  return CEVC_OK;
}

cevc_status cevc_bitstream_record(const cevc_bitstream* stream, size_t index,
                                  cevc_record_info* out) {
  CEVC_REQUIRE(stream != nullptr && out != nullptr);
  if (index >= stream->stream.frames.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "frame index out of range",
                     static_cast<std::int64_t>(index));
  }
  const auto& r = stream->stream.frames[index];
  *out = {r.z.bytes.size(), r.y.bytes.size(), r.z.checksum, r.y.checksum};
  return CEVC_OK;
}

cevc_status cevc_bitstream_bpp(const cevc_bitstream* stream, double* out) {
  CEVC_REQUIRE(stream != nullptr && out != nullptr);
  return guarded([&] { *out = stream->stream.bpp(); });
}

cevc_status cevc_bitstream_account(const cevc_bitstream* stream, const cevc_model* model,
                                   int threads, cevc_frame_stats* out, size_t capacity) {
  CEVC_REQUIRE(stream != nullptr && model != nullptr && out != nullptr);
  if (capacity < stream->stream.frames.size()) {
    return set_error(CEVC_ERR_INVALID_ARGUMENT, "stats buffer too small");
  }
  return guarded([&] {
    const auto stats = cevc::account_bits(*model->model, stream->stream, threads);
    for (std::size_t i = 0; i < stats.size(); ++i) out[i] = to_c(stats[i]);
  });
}

}  // extern "C"
