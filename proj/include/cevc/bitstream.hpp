// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cevc/model.hpp"
#include "cevc/range_coder.hpp"

namespace cevc {

inline constexpr std::uint16_t kBitstreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 33;

enum HeaderFlags : std::uint8_t {
  kFlagInternalLearning = 1u << 0,
  // y coded under the per-channel factorized prior, no hyper payload.
  kFlagFactorizedY = 1u << 1,
};

struct BitstreamHeader {
  std::uint16_t version = kBitstreamVersion;
  ModelHash model_hash{};
  std::uint32_t frame_count = 0;
  std::uint16_t height = 0;  // unpadded
  std::uint16_t width = 0;
  std::uint8_t pad_h = 0;
  std::uint8_t pad_w = 0;
  std::uint16_t N = 0;
  std::uint16_t Nz = 0;
  std::uint8_t num_down = 0;
  std::uint16_t L = 0;
  std::uint8_t K = 0;
  std::uint8_t flags = 0;

  bool operator==(const BitstreamHeader&) const = default;
};

struct FrameRecord {
  Payload z;
  Payload y;
  std::uint64_t payload_bytes() const { return z.bytes.size() + y.bytes.size(); }
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<FrameRecord> frames;

  std::vector<std::uint8_t> serialize() const;
  // kFormat on bad magic/version or truncation (index = frame), kCorruption
  // when a record's CRC does not match its payload.
  static Bitstream parse(const std::vector<std::uint8_t>& bytes);

  std::uint64_t payload_bytes() const;
  // Coded bits per unpadded pixel over all frames.
  double bpp() const;
};

// Refuses (kFormat) a stream produced by a different model or geometry.
void check_compatible(const BitstreamHeader& header, const Model& model);

}  // namespace cevc
