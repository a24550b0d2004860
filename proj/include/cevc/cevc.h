/* Copyright 2026 The CEVC Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* C interface of the codec library. All objects are opaque handles owned by
 * the caller and released with the matching *_free function. Every fallible
 * call returns a cevc_status; on failure cevc_last_error() holds a message
 * for the calling thread and cevc_last_error_index() the frame or symbol
 * index it refers to (-1 when none). */

#ifndef CEVC_CEVC_H_
#define CEVC_CEVC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CEVC_API __declspec(dllexport)
#else
#define CEVC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cevc_status {
  CEVC_OK = 0,
  CEVC_ERR_DIMENSION = 1,
  CEVC_ERR_DOMAIN = 2,
  CEVC_ERR_CONTRACT = 3,
  CEVC_ERR_GEOMETRY = 4,
  CEVC_ERR_CAPACITY = 5,
  CEVC_ERR_CORRUPTION = 6,
  CEVC_ERR_DESYNC = 7,
  CEVC_ERR_FORMAT = 8,
  CEVC_ERR_NUMERIC = 9,
  CEVC_ERR_IO = 10,
  CEVC_ERR_INVALID_ARGUMENT = 11, /* null handle or pointer, bad enum */
  CEVC_ERR_INTERNAL = 12
} cevc_status;

typedef enum cevc_metric { CEVC_METRIC_MSE = 0, CEVC_METRIC_MSSSIM = 1 } cevc_metric;

typedef struct cevc_model cevc_model;
typedef struct cevc_video cevc_video;
typedef struct cevc_encoding cevc_encoding;
typedef struct cevc_decoding cevc_decoding;
typedef struct cevc_bitstream cevc_bitstream;

CEVC_API const char* cevc_status_string(cevc_status status);
CEVC_API const char* cevc_last_error(void);
CEVC_API int64_t cevc_last_error_index(void);
CEVC_API const char* cevc_version(void);

/* ---- models ---- */

typedef struct cevc_model_config {
  int N;
  int M;
  int K;
  int Nz;
  int num_down;
  int L;
  double sigma_min;
  int factorized_y_ablation; /* nonzero: also hold the unconditional y prior */
} cevc_model_config;

CEVC_API void cevc_model_config_default(cevc_model_config* config);
CEVC_API cevc_status cevc_model_create(const cevc_model_config* config, uint64_t seed,
                                       cevc_model** out);
CEVC_API cevc_status cevc_model_load(const char* path, cevc_model** out);
CEVC_API cevc_status cevc_model_save(const cevc_model* model, const char* path);
CEVC_API void cevc_model_free(cevc_model* model);
CEVC_API cevc_status cevc_model_get_config(const cevc_model* model, cevc_model_config* out);
CEVC_API cevc_status cevc_model_hash(const cevc_model* model, uint8_t out[8]);
CEVC_API cevc_status cevc_model_training_info(const cevc_model* model, uint64_t* seed,
                                              double* lambda, uint64_t* steps);
CEVC_API cevc_status cevc_model_parameter_count(const cevc_model* model, uint64_t* out);

/* ---- videos: frames of 3 planar channels, values in [0,1] ---- */

typedef struct cevc_synthetic_spec {
  uint64_t seed;
  int frames;
  int height;
  int width;
  int num_objects;
  int max_velocity;
} cevc_synthetic_spec;

CEVC_API void cevc_synthetic_spec_default(cevc_synthetic_spec* spec);
CEVC_API cevc_status cevc_video_synthetic(const cevc_synthetic_spec* spec, cevc_video** out);
CEVC_API cevc_status cevc_video_create(uint32_t frames, uint32_t height, uint32_t width,
                                       cevc_video** out);
CEVC_API cevc_status cevc_video_read_raw(const char* path, cevc_video** out);
CEVC_API cevc_status cevc_video_write_raw(const cevc_video* video, const char* path);
CEVC_API void cevc_video_free(cevc_video* video);
CEVC_API cevc_status cevc_video_info(const cevc_video* video, uint32_t* frames,
                                     uint32_t* height, uint32_t* width);
/* Copies frame `index` (3*height*width values, channel-major). */
CEVC_API cevc_status cevc_video_get_frame(const cevc_video* video, uint32_t index, double* out);
CEVC_API cevc_status cevc_video_set_frame(cevc_video* video, uint32_t index,
                                          const double* data);
/* Rounds every value to the 8-bit grid of the raw format. */
CEVC_API cevc_status cevc_video_quantize_8bit(cevc_video* video);

/* ---- metrics ---- */

CEVC_API cevc_status cevc_frame_metrics(const cevc_video* a, const cevc_video* b,
                                        uint32_t index, double* mse, double* psnr,
                                        double* msssim);

/* ---- training ---- */

typedef struct cevc_train_config {
  double lambda;
  double target_bpp;
  double lr;
  int batch;
  int crop;
  int epochs;
  int steps_per_epoch; /* 0 = one pass over all samples */
  uint64_t seed;
  cevc_metric metric;
  double ablation_weight;
} cevc_train_config;

typedef struct cevc_epoch_log {
  int epoch;
  uint64_t steps;
  double train_distortion, train_bpp, train_total;
  double val_distortion, val_bpp, val_total;
  double seconds;
} cevc_epoch_log;

typedef void (*cevc_epoch_callback)(const cevc_epoch_log* log, void* user);

CEVC_API void cevc_train_config_default(cevc_train_config* config);
/* Trains in place; the model ends up holding the best validation epoch. */
CEVC_API cevc_status cevc_train(cevc_model* model, const cevc_train_config* config,
                                const cevc_video* const* train_clips, size_t train_count,
                                const cevc_video* const* val_clips, size_t val_count,
                                cevc_epoch_callback callback, void* user, int* best_epoch);

/* ---- encoding ---- */

typedef struct cevc_encode_options {
  int internal_learning;
  int steps;
  double lr;
  double momentum;
  double lambda;
  cevc_metric metric;
  double decay_at;
  int factorized_y;
  int threads; /* 0 = CEVC_THREADS or hardware concurrency */
} cevc_encode_options;

typedef struct cevc_frame_stats {
  uint64_t z_bytes;
  uint64_t y_bytes;
  double z_table_bits, y_table_bits;
  double z_model_bits, y_model_bits;
  int64_t clamped;
  double mse;
  int internal_learning;
  int fell_back;
  size_t objective_count;
} cevc_frame_stats;

CEVC_API void cevc_encode_options_default(cevc_encode_options* options);
CEVC_API cevc_status cevc_encode(const cevc_model* model, const cevc_video* video,
                                 const cevc_encode_options* options, cevc_encoding** out);
CEVC_API void cevc_encoding_free(cevc_encoding* encoding);
/* Serialized bitstream; valid until the encoding is freed. */
CEVC_API cevc_status cevc_encoding_bytes(const cevc_encoding* encoding, const uint8_t** data,
                                         size_t* size);
CEVC_API cevc_status cevc_encoding_bpp(const cevc_encoding* encoding, double* out);
CEVC_API cevc_status cevc_encoding_frame_stats(const cevc_encoding* encoding, size_t index,
                                               cevc_frame_stats* out);
/* Internal-learning objective trace of a frame (objective_count values). */
CEVC_API cevc_status cevc_encoding_objective(const cevc_encoding* encoding, size_t index,
                                             double* out, size_t capacity);
CEVC_API cevc_status cevc_encoding_reconstruction(const cevc_encoding* encoding,
                                                  cevc_video** out);
/* Integer latent of a frame. count receives the element count; out may be
 * null to query it. */
CEVC_API cevc_status cevc_encoding_latent(const cevc_encoding* encoding, size_t index,
                                          int32_t* out, size_t capacity, size_t* count);

/* ---- decoding ---- */

CEVC_API cevc_status cevc_decode(const cevc_model* model, const uint8_t* data, size_t size,
                                 int threads, cevc_decoding** out);
CEVC_API void cevc_decoding_free(cevc_decoding* decoding);
CEVC_API cevc_status cevc_decoding_video(const cevc_decoding* decoding, cevc_video** out);
CEVC_API cevc_status cevc_decoding_latent(const cevc_decoding* decoding, size_t index,
                                          int32_t* out, size_t capacity, size_t* count);

/* ---- bitstream inspection ---- */

typedef struct cevc_header {
  uint16_t version;
  uint8_t model_hash[8];
  uint32_t frame_count;
  uint16_t height, width;
  uint8_t pad_h, pad_w;
  uint16_t N, Nz;
  uint8_t num_down;
  uint16_t L;
  uint8_t K;
  uint8_t flags;
} cevc_header;

typedef struct cevc_record_info {
  uint64_t z_bytes;
  uint64_t y_bytes;
  uint32_t z_crc;
  uint32_t y_crc;
} cevc_record_info;

CEVC_API cevc_status cevc_bitstream_parse(const uint8_t* data, size_t size,
                                          cevc_bitstream** out);
CEVC_API void cevc_bitstream_free(cevc_bitstream* stream);
CEVC_API cevc_status cevc_bitstream_header(const cevc_bitstream* stream, cevc_header* out);
CEVC_API cevc_status cevc_bitstream_record(const cevc_bitstream* stream, size_t index,
                                           cevc_record_info* out);
CEVC_API cevc_status cevc_bitstream_bpp(const cevc_bitstream* stream, double* out);
/* Decodes with `model` and fills one entry per frame with payload sizes and
 * ideal code lengths. */
CEVC_API cevc_status cevc_bitstream_account(const cevc_bitstream* stream,
                                            const cevc_model* model, int threads,
                                            cevc_frame_stats* out, size_t capacity);

#ifdef __cplusplus
}
#endif

#endif /* CEVC_CEVC_H_ */
