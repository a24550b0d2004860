// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cevc/cevc.h"
#include "doctest.h"

namespace {

cevc_model_config tiny() {
  cevc_model_config c;
  cevc_model_config_default(&c);
  c.N = 8;
  c.M = 6;
  c.K = 2;
  c.Nz = 4;
  c.num_down = 2;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cevc_capi_" + name)).string();
}

cevc_video* synthetic(uint64_t seed, int frames, int h, int w) {
  cevc_synthetic_spec spec;
  cevc_synthetic_spec_default(&spec);
  spec.seed = seed;
  spec.frames = frames;
  spec.height = h;
  spec.width = w;
  cevc_video* v = nullptr;
  REQUIRE(cevc_video_synthetic(&spec, &v) == CEVC_OK);
  return v;
}

}  // namespace

TEST_CASE("null arguments are rejected without crashing") {
  cevc_model* m = nullptr;
  CHECK(cevc_model_create(nullptr, 1, &m) == CEVC_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(cevc_last_error()) > 0);
  CHECK(cevc_model_load(nullptr, &m) == CEVC_ERR_INVALID_ARGUMENT);
  CHECK(cevc_encode(nullptr, nullptr, nullptr, nullptr) == CEVC_ERR_INVALID_ARGUMENT);
  cevc_model_free(nullptr);
  cevc_video_free(nullptr);
  cevc_encoding_free(nullptr);
  cevc_decoding_free(nullptr);
  cevc_bitstream_free(nullptr);
  CHECK(std::string(cevc_status_string(CEVC_ERR_DESYNC)) == "decoder desync");
}

TEST_CASE("library errors map to status codes") {
  cevc_model* m = nullptr;
  CHECK(cevc_model_load("/nonexistent/model.ckpt", &m) == CEVC_ERR_IO);
  CHECK(m == nullptr);

  cevc_model_config bad = tiny();
  bad.K = 0;
  CHECK(cevc_model_create(&bad, 1, &m) != CEVC_OK);

  cevc_synthetic_spec spec;
  cevc_synthetic_spec_default(&spec);
  spec.height = 16;
  cevc_video* v = nullptr;
  CHECK(cevc_video_synthetic(&spec, &v) == CEVC_ERR_GEOMETRY);
}

TEST_CASE("checkpoint save and load preserve the model identity") {
  const cevc_model_config cfg = tiny();
  cevc_model* m = nullptr;
  REQUIRE(cevc_model_create(&cfg, 5, &m) == CEVC_OK);
  const std::string path = temp_path("m.ckpt");
  REQUIRE(cevc_model_save(m, path.c_str()) == CEVC_OK);
  cevc_model* loaded = nullptr;
  REQUIRE(cevc_model_load(path.c_str(), &loaded) == CEVC_OK);
  uint8_t h1[8], h2[8];
  REQUIRE(cevc_model_hash(m, h1) == CEVC_OK);
  REQUIRE(cevc_model_hash(loaded, h2) == CEVC_OK);
  CHECK(std::memcmp(h1, h2, 8) == 0);
  cevc_model_config back{};
  REQUIRE(cevc_model_get_config(loaded, &back) == CEVC_OK);
  CHECK(back.N == cfg.N);
  CHECK(back.num_down == cfg.num_down);
  uint64_t count = 0;
  REQUIRE(cevc_model_parameter_count(loaded, &count) == CEVC_OK);
  CHECK(count > 0);
  cevc_model_free(m);
  cevc_model_free(loaded);
}

TEST_CASE("encode then decode through the C interface") {
  const cevc_model_config cfg = tiny();
  cevc_model* m = nullptr;
  REQUIRE(cevc_model_create(&cfg, 6, &m) == CEVC_OK);
  cevc_video* video = synthetic(3, 4, 34, 44);

  cevc_encode_options opts;
  cevc_encode_options_default(&opts);
  CHECK(opts.steps == 10);
  CHECK(opts.momentum == 0.9);
  cevc_encoding* enc = nullptr;
  REQUIRE(cevc_encode(m, video, &opts, &enc) == CEVC_OK);
  const uint8_t* bytes = nullptr;
  size_t size = 0;
  REQUIRE(cevc_encoding_bytes(enc, &bytes, &size) == CEVC_OK);
  CHECK(size > 33);
  double bpp = 0;
  REQUIRE(cevc_encoding_bpp(enc, &bpp) == CEVC_OK);
  CHECK(bpp > 0);

  cevc_decoding* dec = nullptr;
  REQUIRE(cevc_decode(m, bytes, size, 2, &dec) == CEVC_OK);
  for (size_t i = 0; i < 4; ++i) {
    size_t n_enc = 0, n_dec = 0;
    REQUIRE(cevc_encoding_latent(enc, i, nullptr, 0, &n_enc) == CEVC_OK);
    REQUIRE(cevc_decoding_latent(dec, i, nullptr, 0, &n_dec) == CEVC_OK);
    REQUIRE(n_enc == n_dec);
    std::vector<int32_t> a(n_enc), b(n_dec);
    REQUIRE(cevc_encoding_latent(enc, i, a.data(), a.size(), &n_enc) == CEVC_OK);
    REQUIRE(cevc_decoding_latent(dec, i, b.data(), b.size(), &n_dec) == CEVC_OK);
    CHECK(a == b);
  }
  cevc_video* recon = nullptr;
  cevc_video* decoded = nullptr;
  REQUIRE(cevc_encoding_reconstruction(enc, &recon) == CEVC_OK);
  REQUIRE(cevc_decoding_video(dec, &decoded) == CEVC_OK);
  uint32_t frames = 0, h = 0, w = 0;
  REQUIRE(cevc_video_info(decoded, &frames, &h, &w) == CEVC_OK);
  CHECK(frames == 4);
  CHECK(h == 34);
  CHECK(w == 44);
  std::vector<double> fa(3 * h * w), fb(3 * h * w);
  for (uint32_t i = 0; i < frames; ++i) {
    REQUIRE(cevc_video_get_frame(recon, i, fa.data()) == CEVC_OK);
    REQUIRE(cevc_video_get_frame(decoded, i, fb.data()) == CEVC_OK);
    CHECK(fa == fb);
  }

  // Bit accounting re-derives the encoder's statistics from the stream.
  cevc_bitstream* stream = nullptr;
  REQUIRE(cevc_bitstream_parse(bytes, size, &stream) == CEVC_OK);
  cevc_header header{};
  REQUIRE(cevc_bitstream_header(stream, &header) == CEVC_OK);
  CHECK(header.frame_count == 4);
  CHECK(header.height == 34);
  CHECK((header.height + header.pad_h) % 4 == 0);
  CHECK((header.width + header.pad_w) % 4 == 0);
  CHECK(header.pad_h > 0);
  std::vector<cevc_frame_stats> acct(4);
  REQUIRE(cevc_bitstream_account(stream, m, 1, acct.data(), acct.size()) == CEVC_OK);
  for (size_t i = 0; i < 4; ++i) {
    cevc_frame_stats s{};
    REQUIRE(cevc_encoding_frame_stats(enc, i, &s) == CEVC_OK);
    cevc_record_info r{};
    REQUIRE(cevc_bitstream_record(stream, i, &r) == CEVC_OK);
    CHECK(r.y_bytes == s.y_bytes);
    CHECK(acct[i].y_bytes == s.y_bytes);
    CHECK(acct[i].y_table_bits == s.y_table_bits);
    CHECK(acct[i].z_model_bits == s.z_model_bits);
  }

  // Truncation is reported with the frame it hit.
  cevc_bitstream* cut = nullptr;
  CHECK(cevc_bitstream_parse(bytes, size - 3, &cut) == CEVC_ERR_FORMAT);
  CHECK(cevc_last_error_index() == 3);
  CHECK(cut == nullptr);

  cevc_bitstream_free(stream);
  cevc_video_free(recon);
  cevc_video_free(decoded);
  cevc_decoding_free(dec);
  cevc_encoding_free(enc);
  cevc_video_free(video);
  cevc_model_free(m);
}

TEST_CASE("internal learning is reported per frame") {
  const cevc_model_config cfg = tiny();
  cevc_model* m = nullptr;
  REQUIRE(cevc_model_create(&cfg, 7, &m) == CEVC_OK);
  cevc_video* video = synthetic(4, 2, 32, 32);
  cevc_encode_options opts;
  cevc_encode_options_default(&opts);
  opts.internal_learning = 1;
  opts.steps = 3;
  cevc_encoding* enc = nullptr;
  REQUIRE(cevc_encode(m, video, &opts, &enc) == CEVC_OK);
  cevc_frame_stats s{};
  REQUIRE(cevc_encoding_frame_stats(enc, 1, &s) == CEVC_OK);
  CHECK(s.internal_learning == 1);
  REQUIRE(s.objective_count == 4);
  std::vector<double> trace(4);
  CHECK(cevc_encoding_objective(enc, 1, trace.data(), 2) == CEVC_ERR_INVALID_ARGUMENT);
  REQUIRE(cevc_encoding_objective(enc, 1, trace.data(), trace.size()) == CEVC_OK);
  CHECK(trace[0] > 0);
  const uint8_t* bytes = nullptr;
  size_t size = 0;
  REQUIRE(cevc_encoding_bytes(enc, &bytes, &size) == CEVC_OK);
  cevc_decoding* dec = nullptr;
  CHECK(cevc_decode(m, bytes, size, 1, &dec) == CEVC_OK);
  cevc_decoding_free(dec);
  cevc_encoding_free(enc);
  cevc_video_free(video);
  cevc_model_free(m);
}

TEST_CASE("raw video and metrics through the C interface") {
  cevc_video* video = synthetic(9, 2, 32, 32);
  REQUIRE(cevc_video_quantize_8bit(video) == CEVC_OK);
  const std::string path = temp_path("v.raw");
  REQUIRE(cevc_video_write_raw(video, path.c_str()) == CEVC_OK);
  cevc_video* back = nullptr;
  REQUIRE(cevc_video_read_raw(path.c_str(), &back) == CEVC_OK);
  double mse = -1, psnr = 0, ms = 0;
  REQUIRE(cevc_frame_metrics(video, back, 1, &mse, &psnr, &ms) == CEVC_OK);
  CHECK(mse == 0.0);
  CHECK(std::isinf(psnr));
  CHECK(ms == 1.0);

  std::vector<double> frame(3 * 32 * 32);
  REQUIRE(cevc_video_get_frame(back, 0, frame.data()) == CEVC_OK);
  for (auto& v : frame) v = std::min(1.0, v + 0.1);
  cevc_video* zeros = nullptr;
  REQUIRE(cevc_video_create(1, 32, 32, &zeros) == CEVC_OK);
  std::vector<double> flat(frame.size(), 0.1);
  REQUIRE(cevc_video_set_frame(zeros, 0, flat.data()) == CEVC_OK);
  cevc_video* base = nullptr;
  REQUIRE(cevc_video_create(1, 32, 32, &base) == CEVC_OK);
  REQUIRE(cevc_frame_metrics(zeros, base, 0, &mse, &psnr, nullptr) == CEVC_OK);
  CHECK(mse == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(psnr == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(cevc_video_get_frame(back, 5, frame.data()) == CEVC_ERR_INVALID_ARGUMENT);
  cevc_video_free(base);
  cevc_video_free(zeros);
  cevc_video_free(back);
  cevc_video_free(video);
}

TEST_CASE("training through the C interface reports every epoch") {
  const cevc_model_config cfg = tiny();
  cevc_model* m = nullptr;
  REQUIRE(cevc_model_create(&cfg, 8, &m) == CEVC_OK);
  cevc_video* clip = synthetic(10, 3, 32, 32);
  cevc_train_config tc;
  cevc_train_config_default(&tc);
  CHECK(tc.batch == 4);
  CHECK(tc.crop == 64);
  CHECK(tc.epochs == 30);
  tc.crop = 32;
  tc.epochs = 2;
  tc.steps_per_epoch = 1;
  tc.batch = 2;
  int epochs_seen = 0;
  auto cb = [](const cevc_epoch_log* l, void* user) {
    ++*static_cast<int*>(user);
    CHECK(l->val_total > 0);
  };
  const cevc_video* clips[] = {clip};
  int best = 0;
  REQUIRE(cevc_train(m, &tc, clips, 1, nullptr, 0, cb, &epochs_seen, &best) == CEVC_OK);
  CHECK(epochs_seen == 2);
  CHECK(best >= 1);
  uint64_t seed = 0;
  double lambda = 0;
  REQUIRE(cevc_model_training_info(m, &seed, &lambda, nullptr) == CEVC_OK);
  CHECK(seed == tc.seed);
  CHECK(lambda == tc.lambda);

  tc.lr = -1;
  CHECK(cevc_train(m, &tc, clips, 1, nullptr, 0, nullptr, nullptr, nullptr) ==
        CEVC_ERR_CONTRACT);
  cevc_video_free(clip);
  cevc_model_free(m);
}
