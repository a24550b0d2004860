// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/bitstream.hpp"

#include <cstring>

#include "bytes.hpp"

namespace cevc {

namespace {

constexpr char kMagic[4] = {'C', 'E', 'V', 'C'};

void put_payload(detail::ByteWriter& w, const Payload& p) {
  w.u32(static_cast<std::uint32_t>(p.bytes.size()));
  w.raw(p.bytes.data(), p.bytes.size());
  w.u32(p.checksum);
}

Payload get_payload(detail::ByteReader& r, const char* which, std::int64_t frame) {
  Payload p;
  const std::uint32_t len = r.u32();
  const std::uint8_t* data = r.take(len);
  p.bytes.assign(data, data + len);
  p.checksum = r.u32();
  if (!p.verify()) {
    fail(ErrorKind::kCorruption,
         std::string(which) + " payload CRC mismatch in frame " + std::to_string(frame), frame);
  }
  return p;
}

}  // namespace

std::vector<std::uint8_t> Bitstream::serialize() const {
  detail::ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u16(header.version);
  w.raw(header.model_hash.data(), header.model_hash.size());
  w.u32(header.frame_count);
  w.u16(header.height);
  w.u16(header.width);
  w.u8(header.pad_h);
  w.u8(header.pad_w);
  w.u16(header.N);
  w.u16(header.Nz);
  w.u8(header.num_down);
  w.u16(header.L);
  w.u8(header.K);
  w.u8(header.flags);
  for (const auto& f : frames) {
    put_payload(w, f.z);
    put_payload(w, f.y);
  }
  return std::move(w.bytes());
}

Bitstream Bitstream::parse(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  r.set_context("bitstream header");
  Bitstream b;
  if (r.text(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    fail(ErrorKind::kFormat, "not a CEVC bitstream (bad magic)");
  }
  auto& h = b.header;
  h.version = r.u16();
  if (h.version != kBitstreamVersion) {
    fail(ErrorKind::kFormat, "unsupported bitstream version " + std::to_string(h.version));
  }
  std::memcpy(h.model_hash.data(), r.take(h.model_hash.size()), h.model_hash.size());
  h.frame_count = r.u32();
  h.height = r.u16();
  h.width = r.u16();
  h.pad_h = r.u8();
  h.pad_w = r.u8();
  h.N = r.u16();
  h.Nz = r.u16();
  h.num_down = r.u8();
  h.L = r.u16();
  h.K = r.u8();
  h.flags = r.u8();
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    r.set_context("frame record " + std::to_string(i), i);
    FrameRecord f;
    f.z = get_payload(r, "z", i);
    f.y = get_payload(r, "y", i);
    b.frames.push_back(std::move(f));
  }
  if (r.remaining() != 0) {
    fail(ErrorKind::kFormat, std::to_string(r.remaining()) + " trailing bytes after last frame");
  }
  return b;
}

std::uint64_t Bitstream::payload_bytes() const {
  std::uint64_t total = 0;
  for (const auto& f : frames) total += f.payload_bytes();
  return total;
}

double Bitstream::bpp() const {
  const double pixels = double(header.frame_count) * header.height * header.width;
  return pixels > 0 ? 8.0 * double(payload_bytes()) / pixels : 0.0;
}

void check_compatible(const BitstreamHeader& h, const Model& model) {
  const auto& cfg = model.config();
  if (h.model_hash != model.hash()) {
    fail(ErrorKind::kFormat, "bitstream was produced by a different model (hash mismatch)");
  }
  if (h.N != cfg.N || h.Nz != cfg.Nz || h.num_down != cfg.num_down || h.L != cfg.L ||
      h.K != cfg.K) {
    fail(ErrorKind::kFormat, "bitstream configuration does not match the model");
  }
  const std::int64_t m = cfg.downscale();
  if ((h.height + h.pad_h) % m != 0 || (h.width + h.pad_w) % m != 0 || h.pad_h >= m ||
      h.pad_w >= m) {
    fail(ErrorKind::kFormat, "bitstream padding inconsistent with the model downscale");
  }
  if ((h.flags & kFlagFactorizedY) && !cfg.factorized_y_ablation) {
    fail(ErrorKind::kFormat, "bitstream uses the factorized y prior the model lacks");
  }
}

}  // namespace cevc
