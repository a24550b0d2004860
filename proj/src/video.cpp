// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/video.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "bytes.hpp"

namespace cevc {

namespace {

constexpr char kRawMagic[4] = {'C', 'E', 'V', 'R'};

// Portable uniform draw in [0,1).
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

struct Wave {
  double fy, fx, phase, amp;
};

// Sum of oriented sinusoids per channel around a base colour.
struct Texture {
  double base[3];
  std::vector<Wave> waves[3];

  static Texture random(std::mt19937_64& rng, int count, double max_freq, double amp) {
    Texture t;
    for (int c = 0; c < 3; ++c) {
      t.base[c] = uniform(rng, 0.2, 0.8);
      for (int k = 0; k < count; ++k) {
        t.waves[c].push_back({uniform(rng, -max_freq, max_freq), uniform(rng, -max_freq, max_freq),
                              uniform(rng, 0, 2 * std::numbers::pi), uniform(rng, 0.3, 1.0) * amp});
      }
    }
    return t;
  }

  double at(int c, double y, double x) const {
    double v = base[c];
    for (const auto& w : waves[c]) v += w.amp * std::sin(w.fy * y + w.fx * x + w.phase);
    return std::clamp(v, 0.0, 1.0);
  }
};

struct Object {
  ObjectTrack track;
  Texture texture;
};

std::int64_t wrap(std::int64_t v, std::int64_t n) { return ((v % n) + n) % n; }

struct Scene {
  Texture background;
  std::vector<Object> objects;
};

Scene make_scene(const SyntheticVideoSpec& spec) {
  if (spec.height < 32 || spec.width < 32) {
    fail(ErrorKind::kGeometry, "synthetic video needs H, W >= 32");
  }
  if (spec.frames < 1 || spec.num_objects < 0 || spec.max_velocity < 0) {
    fail(ErrorKind::kContract, "synthetic video: invalid frame/object/velocity counts");
  }
  std::mt19937_64 rng(spec.seed);
  const int H = spec.height, W = spec.width;
  Scene scene;
  scene.background = Texture::random(rng, 3, 0.35, 0.12);
  for (int k = 0; k < spec.num_objects; ++k) {
    Object o;
    o.track.h = uniform_int(rng, H / 6, H / 3);
    o.track.w = uniform_int(rng, W / 6, W / 3);
    o.track.y0 = uniform_int(rng, 0, H - 1);
    o.track.x0 = uniform_int(rng, 0, W - 1);
    o.track.vy = uniform_int(rng, -spec.max_velocity, spec.max_velocity);
    o.track.vx = uniform_int(rng, -spec.max_velocity, spec.max_velocity);
    o.texture = Texture::random(rng, 2, 0.8, 0.2);
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

}  // namespace

std::vector<ObjectTrack> synthetic_object_tracks(const SyntheticVideoSpec& spec) {
  std::vector<ObjectTrack> tracks;
  for (const auto& o : make_scene(spec).objects) tracks.push_back(o.track);
  return tracks;
}

Video generate_synthetic_video(const SyntheticVideoSpec& spec) {
  const Scene scene = make_scene(spec);
  const int H = spec.height, W = spec.width;
  Video video;
  const auto plane = static_cast<std::size_t>(H) * W;
  for (int t = 0; t < spec.frames; ++t) {
    std::vector<double> px(3 * plane);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int c = 0; c < 3; ++c) px[c * plane + y * W + x] = scene.background.at(c, y, x);
      }
    }
    for (const auto& [o, texture] : scene.objects) {
      const auto top = wrap(o.y0 + std::int64_t{o.vy} * t, H);
      const auto left = wrap(o.x0 + std::int64_t{o.vx} * t, W);
      for (int ly = 0; ly < o.h; ++ly) {
        for (int lx = 0; lx < o.w; ++lx) {
          const auto y = wrap(top + ly, H), x = wrap(left + lx, W);
          for (int c = 0; c < 3; ++c) px[c * plane + y * W + x] = texture.at(c, ly, lx);
        }
      }
    }
    video.push_back(Tensor::from_data({1, 3, H, W}, std::move(px)));
  }
  return video;
}

Video quantize_to_8bit(const Video& video) {
  Video out;
  for (const auto& f : video) {
    std::vector<double> v(f.data().begin(), f.data().end());
    for (auto& x : v) x = std::round(std::clamp(x, 0.0, 1.0) * 255.0) / 255.0;
    out.push_back(Tensor::from_data(f.shape(), std::move(v)));
  }
  return out;
}

std::vector<std::uint8_t> encode_raw_video(const Video& video) {
  detail::ByteWriter w;
  w.raw(kRawMagic, sizeof kRawMagic);
  const std::uint32_t H = video.empty() ? 0 : static_cast<std::uint32_t>(video[0].dim(2));
  const std::uint32_t W = video.empty() ? 0 : static_cast<std::uint32_t>(video[0].dim(3));
  w.u32(static_cast<std::uint32_t>(video.size()));
  w.u32(H);
  w.u32(W);
  for (std::size_t i = 0; i < video.size(); ++i) {
    const auto& f = video[i];
    if (f.shape() != Shape{1, 3, H, W}) {
      fail(ErrorKind::kGeometry, "raw video frame " + std::to_string(i) + " has shape " +
                                     shape_str(f.shape()), i);
    }
    for (double v : f.data()) {
      w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  return std::move(w.bytes());
}

Video decode_raw_video(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  r.set_context("raw video header");
  if (r.text(4) != std::string(kRawMagic, 4)) fail(ErrorKind::kFormat, "not a raw video (bad magic)");
  const std::uint32_t n = r.u32(), H = r.u32(), W = r.u32();
  if (H == 0 || W == 0 || H > 65535 || W > 65535) {
    fail(ErrorKind::kFormat, "raw video has invalid geometry");
  }
  const std::size_t frame_bytes = 3ull * H * W;
  if (r.remaining() != frame_bytes * n) {
    fail(ErrorKind::kFormat, "raw video holds " + std::to_string(r.remaining()) +
                                 " payload bytes, expected " + std::to_string(frame_bytes * n),
         static_cast<std::int64_t>(r.remaining() / frame_bytes));
  }
  Video video;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto* p = r.take(frame_bytes);
    std::vector<double> v(frame_bytes);
    for (std::size_t k = 0; k < frame_bytes; ++k) v[k] = p[k] / 255.0;
    video.push_back(Tensor::from_data({1, 3, H, W}, std::move(v)));
  }
  return video;
}

void write_raw_video(const std::string& path, const Video& video) {
  detail::write_file(path, encode_raw_video(video));
}

Video read_raw_video(const std::string& path) { return decode_raw_video(detail::read_file(path)); }

}  // namespace cevc
