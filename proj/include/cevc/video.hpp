// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cevc/tensor.hpp"

namespace cevc {

// Frames are [1,3,H,W] with values in [0,1].
using Video = std::vector<Tensor>;

struct SyntheticVideoSpec {
  std::uint64_t seed = 1;
  int frames = 8;
  int height = 64;
  int width = 64;
  int num_objects = 3;
  int max_velocity = 3;  // pixels per frame, per axis
};

// Placement of one moving object: top-left corner at frame 0, size, and
// per-frame displacement.
struct ObjectTrack {
  int y0, x0, h, w, vy, vx;
};

// Static textured background with rigid textured rectangles moving at a
// constant integer velocity, wrapping around the frame edges. Later
// objects occlude earlier ones. kGeometry when H or W < 32.
Video generate_synthetic_video(const SyntheticVideoSpec& spec);
// The object placements generate_synthetic_video(spec) uses, in paint order.
std::vector<ObjectTrack> synthetic_object_tracks(const SyntheticVideoSpec& spec);

// 8-bit planar RGB with a 16-byte header: "CEVR", frames, height, width
// (u32 little-endian each).
void write_raw_video(const std::string& path, const Video& video);
Video read_raw_video(const std::string& path);
std::vector<std::uint8_t> encode_raw_video(const Video& video);
Video decode_raw_video(const std::vector<std::uint8_t>& bytes);

// Rounds to the 8-bit grid the raw format stores.
Video quantize_to_8bit(const Video& video);

}  // namespace cevc
