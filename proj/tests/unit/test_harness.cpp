// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "cevc/train.hpp"
#include "cevc/video.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cevc;
using cevc::testing::temp_path;
using cevc::testing::tiny_config;

namespace {

bool same_video(const Video& a, const Video& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) return false;
    if (!std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin())) return false;
  }
  return true;
}

double at(const Tensor& f, int c, std::int64_t y, std::int64_t x) {
  const auto H = f.dim(2), W = f.dim(3);
  return f.data()[static_cast<std::size_t>((c * H + y) * W + x)];
}

std::vector<Video> small_clips(std::uint64_t seed, int count, int frames) {
  std::vector<Video> clips;
  for (int i = 0; i < count; ++i) {
    SyntheticVideoSpec s;
    s.seed = seed + static_cast<std::uint64_t>(i);
    s.frames = frames;
    s.height = 32;
    s.width = 32;
    s.num_objects = 2;
    s.max_velocity = 2;
    clips.push_back(quantize_to_8bit(generate_synthetic_video(s)));
  }
  return clips;
}

TrainConfig small_train_config() {
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch = 2;
  tc.crop = 32;
  tc.epochs = 2;
  tc.steps_per_epoch = 3;
  tc.seed = 5;
  return tc;
}

}  // namespace

TEST_CASE("synthetic video is reproducible from its seed") {
  SyntheticVideoSpec spec;
  spec.seed = 42;
  spec.frames = 4;
  const Video a = generate_synthetic_video(spec);
  const Video b = generate_synthetic_video(spec);
  CHECK(same_video(a, b));
  spec.seed = 43;
  CHECK_FALSE(same_video(a, generate_synthetic_video(spec)));
  for (const auto& f : a) {
    CHECK(f.shape() == Shape{1, 3, 64, 64});
    for (double v : f.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("static scenes repeat frame for frame") {
  for (const auto& [objects, velocity] : {std::pair{0, 0}, std::pair{0, 3}, std::pair{3, 0}}) {
    SyntheticVideoSpec spec;
    spec.seed = 7;
    spec.frames = 5;
    spec.num_objects = objects;
    spec.max_velocity = velocity;
    const Video v = generate_synthetic_video(spec);
    for (std::size_t t = 1; t < v.size(); ++t) CHECK(same_video({v[0]}, {v[t]}));
  }
}

TEST_CASE("object pixels move by the object velocity with wrap-around") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticVideoSpec spec;
    spec.seed = seed;
    spec.frames = 4;
    spec.height = 48;
    spec.width = 40;
    spec.num_objects = 1;
    spec.max_velocity = 4;
    const Video v = generate_synthetic_video(spec);
    const auto tracks = synthetic_object_tracks(spec);
    REQUIRE(tracks.size() == 1);
    const ObjectTrack o = tracks[0];
    auto wrap = [](std::int64_t a, std::int64_t n) { return ((a % n) + n) % n; };
    for (int t = 0; t + 1 < spec.frames; ++t) {
      for (int ly = 0; ly < o.h; ++ly) {
        for (int lx = 0; lx < o.w; ++lx) {
          const auto y = wrap(o.y0 + o.vy * t + ly, spec.height);
          const auto x = wrap(o.x0 + o.vx * t + lx, spec.width);
          const auto y1 = wrap(y + o.vy, spec.height), x1 = wrap(x + o.vx, spec.width);
          for (int c = 0; c < 3; ++c) REQUIRE(at(v[t + 1], c, y1, x1) == at(v[t], c, y, x));
        }
      }
    }
  }
}

TEST_CASE("synthetic video rejects frames below 32 pixels") {
  SyntheticVideoSpec spec;
  spec.height = 31;
  CHECK_THROWS_AS(generate_synthetic_video(spec), Error);
  try {
    generate_synthetic_video(spec);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kGeometry);
  }
}

TEST_CASE("raw video round trips losslessly on the 8-bit grid") {
  SyntheticVideoSpec spec;
  spec.frames = 3;
  spec.height = 32;
  spec.width = 48;
  const Video v = quantize_to_8bit(generate_synthetic_video(spec));
  const std::string path = temp_path("video.raw");
  write_raw_video(path, v);
  CHECK(same_video(read_raw_video(path), v));

  const auto bytes = encode_raw_video(v);
  REQUIRE(bytes.size() == 16 + 3 * 3 * 32 * 48);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CEVR");
  CHECK(bytes[4] == 3);
  CHECK(bytes[8] == 32);
  CHECK(bytes[12] == 48);
  CHECK(bytes[13] == 0);
  // Frame 0, channel 0, pixel (0,0).
  CHECK(bytes[16] == static_cast<std::uint8_t>(std::lround(at(v[0], 0, 0, 0) * 255)));
}

TEST_CASE("malformed raw video is a format error") {
  SyntheticVideoSpec spec;
  spec.frames = 2;
  spec.height = 32;
  spec.width = 32;
  auto bytes = encode_raw_video(generate_synthetic_video(spec));
  auto expect_format = [](const std::vector<std::uint8_t>& b) {
    try {
      decode_raw_video(b);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
    }
  };
  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  expect_format(truncated);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_format(bad_magic);
  expect_format(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10));
}

TEST_CASE("Adam first step moves each coordinate by lr against the gradient sign") {
  ParamStore store;
  Tensor p = store.add("p", Tensor::from_data({3}, {1.0, -2.0, 0.5}));
  store.set_trainable(true);
  AdamOptimizer adam(store, 0.01);
  {
    Tape tape;
    // loss = sum(p^2 * [1, 3, -2]) -> grad = 2 p * [1, 3, -2] = [2, -12, -2]
    tape.backward(ops::sum(ops::mul(ops::mul(p, p), Tensor::from_data({3}, {1, 3, -2}))));
  }
  adam.step();
  // m = 0.1 g, v = 0.001 g^2; bias-corrected update = lr * g / (|g| + eps/...)
  const std::vector<double> g{2, -12, -2};
  const std::vector<double> start{1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    const double expected = start[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p.data()[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK_FALSE(p.has_grad());

  // Second step from a closed form of the two moment recursions.
  const double p1 = p.data()[0];
  {
    Tape tape;
    tape.backward(ops::sum(ops::mul(ops::mul(p, p), Tensor::from_data({3}, {1, 3, -2}))));
  }
  const double g1 = 2 * p1, g0 = 2.0;
  adam.step();
  const double m = (0.9 * 0.1 * g0 + 0.1 * g1) / (1 - 0.81);
  const double v = (0.999 * 0.001 * g0 * g0 + 0.001 * g1 * g1) / (1 - 0.999 * 0.999);
  CHECK(p.data()[0] == doctest::Approx(p1 - 0.01 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("training config is validated") {
  const NetworkConfig net = tiny_config();
  TrainConfig tc = small_train_config();
  tc.lr = 0;
  CHECK_THROWS_AS(tc.validate(net), Error);
  tc = small_train_config();
  tc.crop = 30;  // not a multiple of 4
  try {
    tc.validate(net);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kGeometry);
  }
  tc = small_train_config();
  CHECK_NOTHROW(tc.validate(net));
}

TEST_CASE("training is deterministic and restores the best epoch") {
  const auto clips = small_clips(100, 3, 3);
  const auto val = small_clips(200, 1, 3);
  const TrainConfig tc = small_train_config();

  Model a(tiny_config(), 11), b(tiny_config(), 11);
  std::vector<EpochLog> logs;
  const TrainResult ra = train(a, tc, clips, val, [&](const EpochLog& l) { logs.push_back(l); });
  const TrainResult rb = train(b, tc, clips, val);
  CHECK(a.weight_digest() == b.weight_digest());
  CHECK(a.serialize() == b.serialize());

  REQUIRE(ra.log.size() == 2);
  CHECK(logs.size() == 2);
  CHECK(ra.log[0].epoch == 1);
  CHECK(ra.log[1].steps == 6);
  CHECK(ra.samples == 12);
  // Two of every three frames have a real predecessor.
  CHECK(ra.conditioned_samples > 0);
  CHECK(ra.conditioned_samples < ra.samples);

  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : ra.log) best = std::min(best, l.val_total);
  CHECK(ra.best_val_total == best);
  CHECK(ra.log[ra.best_epoch - 1].val_total == best);
  // Weights are snapped to float after restoring, so compare loosely.
  const LossSummary now = evaluate_loss(a, val, tc.lambda, tc.target_bpp, tc.metric);
  CHECK(now.total == doctest::Approx(best).epsilon(1e-5));
  CHECK(a.training_info.seed == tc.seed);
  CHECK(a.training_info.lambda == tc.lambda);
  for (const auto& [name, p] : a.params().entries()) {
    CHECK_FALSE(p.requires_grad());
    for (double v : p.data()) REQUIRE(static_cast<double>(static_cast<float>(v)) == v);
  }
}

TEST_CASE("distortion-only training lowers held-out MSE") {
  const auto clips = small_clips(300, 4, 3);
  const auto held_out = small_clips(400, 2, 3);
  TrainConfig tc = small_train_config();
  tc.lambda = 0.0;
  tc.epochs = 20;
  tc.steps_per_epoch = 4;
  Model model(tiny_config(), 12);
  const TrainResult r = train(model, tc, clips, held_out);
  REQUIRE(r.log.size() == 20);
  CHECK(r.log.back().val_distortion < r.log.front().val_distortion);
  CHECK(evaluate_loss(model, held_out, 0.0, 0.0, Distortion::kMse).distortion <
        r.log.front().val_distortion);
}

TEST_CASE("non-finite loss aborts with the epoch and step") {
  auto clips = small_clips(500, 1, 2);
  std::vector<double> poisoned(clips[0][1].data().begin(), clips[0][1].data().end());
  poisoned[17] = std::numeric_limits<double>::quiet_NaN();
  clips[0][1] = Tensor::from_data(clips[0][1].shape(), std::move(poisoned));
  clips[0][0] = clips[0][1];
  Model model(tiny_config(), 13);
  try {
    train(model, small_train_config(), clips, {});
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("step 0") != std::string::npos);
  }
}

TEST_CASE("rate clamp switches the rate gradient off above the achieved rate") {
  Model model(tiny_config(), 14);
  const auto clip = small_clips(600, 1, 1);
  const RateGradientProbe active = probe_rate_gradient(model, clip[0][0], 0.05, 0.0, 1);
  CHECK(active.bpp > 0);
  CHECK(active.rate_grad_norm > 0);
  const RateGradientProbe clamped =
      probe_rate_gradient(model, clip[0][0], 0.05, active.bpp * 10 + 1, 1);
  CHECK(clamped.bpp == active.bpp);
  CHECK(clamped.rate_grad_norm == 0.0);
}

TEST_CASE("rd sweep rows are sorted by coded bpp") {
  const auto video = small_clips(700, 1, 3)[0];
  Model a(tiny_config(), 15), b(tiny_config(), 16);
  a.training_info.lambda = 0.01;
  b.training_info.lambda = 0.1;

  const auto one = rd_sweep({{"a", &a}}, video);
  REQUIRE(one.size() == 1);
  CHECK(one[0].label == "a");
  CHECK(one[0].bpp > 0);
  CHECK(one[0].msssim >= 0.0);
  CHECK(one[0].msssim <= 1.0);
  CHECK(one[0].psnr == doctest::Approx(-10 * std::log10(one[0].mse)));

  SweepOptions opts;
  opts.include_internal_learning = true;
  opts.learning.steps = 2;
  const auto rows = rd_sweep({{"a", &a}, {"b", &b}}, video, opts);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].bpp <= rows[i].bpp);

  const std::string csv = rd_csv(rows);
  CHECK(csv.rfind("label,lambda,internal_learning,bpp,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  const auto j = nlohmann::json::parse(rd_json(rows, 99));
  CHECK(j["seed"] == 99);
  REQUIRE(j["points"].size() == 4);
  CHECK(j["points"][0]["bpp"].get<double>() == rows[0].bpp);

  CHECK_THROWS_AS(rd_sweep({}, video), Error);
}
