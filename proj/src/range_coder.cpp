// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/range_coder.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cevc/error.hpp"

namespace cevc {

namespace {
constexpr std::uint32_t kRenormBound = 1u << 24;
}

std::uint32_t CdfTable::count(std::int32_t symbol) const {
  const std::int64_t i = std::int64_t{symbol} - offset;
  if (i < 0 || i >= alphabet()) {
    fail(ErrorKind::kContract, "symbol " + std::to_string(symbol) + " outside table");
  }
  return cum[i + 1] - cum[i];
}

CdfTable quantize_cdf(std::span<const double> pmf, std::int32_t offset) {
  const std::size_t n = pmf.size();
  if (n == 0) fail(ErrorKind::kContract, "quantize_cdf: empty alphabet");
  if (n > kCdfTotal) {
    fail(ErrorKind::kCapacity, "quantize_cdf: alphabet of " + std::to_string(n) +
                                   " exceeds " + std::to_string(kCdfTotal) + " counts");
  }
  std::vector<double> p(n);
  double raw_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pmf[i] >= 0.0) || !std::isfinite(pmf[i])) {
      fail(ErrorKind::kDomain, "quantize_cdf: invalid mass at slot " + std::to_string(i));
    }
    raw_total += pmf[i];
    p[i] = std::max(pmf[i], kMinMass);
  }
  if (std::abs(raw_total - 1.0) > 1e-6) {
    fail(ErrorKind::kDomain, "quantize_cdf: pmf sums to " + std::to_string(raw_total));
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);

  std::vector<std::int64_t> c(n);
  std::vector<double> rem(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = p[i] * kCdfTotal / total;
    const double f = std::floor(a);
    c[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(f));
    rem[i] = a - static_cast<double>(c[i]);
    assigned += c[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t diff = std::int64_t{kCdfTotal} - assigned;
  if (diff > 0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; diff > 0; k = (k + 1) % n, --diff) ++c[order[k]];
  } else if (diff < 0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] < rem[b]; });
    for (std::size_t k = 0; diff < 0; k = (k + 1) % n) {
      if (c[order[k]] > 1) {
        --c[order[k]];
        ++diff;
      }
    }
  }
  CdfTable t;
  t.offset = offset;
  t.cum.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + static_cast<std::uint32_t>(c[i]);
  return t;
}

CdfTable quantize_cdf(const DiscretePmf& pmf) { return quantize_cdf(pmf.folded(), -pmf.L); }

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large payloads.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void RangeEncoder::emit_byte() {
  if (low_ >> 32) {
    // Carry into already written bytes.
    std::size_t i = out_.size();
    while (i > 0 && out_[i - 1] == 0xFF) out_[--i] = 0;
    if (i == 0) fail(ErrorKind::kContract, "range coder carry past first byte");
    ++out_[i - 1];
    low_ &= 0xFFFFFFFFu;
  }
  out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
  low_ = (low_ << 8) & 0xFFFFFFFFu;
}

void RangeEncoder::encode(std::int32_t symbol, const CdfTable& table) {
  if (finished_) fail(ErrorKind::kContract, "range encoder used after finish");
  const std::uint32_t freq = table.count(symbol);
  if (freq == 0) fail(ErrorKind::kContract, "symbol " + std::to_string(symbol) + " has zero count");
  const std::uint32_t start = table.cum[static_cast<std::size_t>(symbol - table.offset)];
  const std::uint32_t r = range_ >> kCdfPrecisionBits;
  low_ += std::uint64_t{r} * start;
  range_ = r * freq;
  while (range_ < kRenormBound) {
    emit_byte();
    range_ <<= 8;
  }
  ++count_;
}

Payload RangeEncoder::finish() {
  if (finished_) fail(ErrorKind::kContract, "range encoder finished twice");
  finished_ = true;
  Payload p;
  if (count_ > 0) {
    for (int i = 0; i < 4; ++i) emit_byte();
  }
  p.bytes = std::move(out_);
  p.symbols = count_;
  p.checksum = crc32(p.bytes);
  return p;
}

RangeDecoder::RangeDecoder(const Payload& payload) : bytes_(&payload.bytes) {
  if (!payload.verify()) {
    fail(ErrorKind::kCorruption, "payload checksum mismatch");
  }
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  return pos_ < bytes_->size() ? (*bytes_)[pos_++] : std::uint8_t{0};
}

std::int32_t RangeDecoder::decode(const CdfTable& table) {
  const std::uint32_t r = range_ >> kCdfPrecisionBits;
  const std::uint32_t v = code_ / r;
  if (v >= kCdfTotal) {
    fail(ErrorKind::kDesync, "decoder state outside table at symbol " + std::to_string(index_),
         index_);
  }
  const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), v);
  const auto slot = static_cast<std::size_t>(it - table.cum.begin()) - 1;
  code_ -= r * table.cum[slot];
  range_ = r * (table.cum[slot + 1] - table.cum[slot]);
  while (range_ < kRenormBound) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  ++index_;
  return static_cast<std::int32_t>(slot) + table.offset;
}

Payload rc_encode(std::span<const std::int32_t> symbols,
                  const std::function<const CdfTable&(std::size_t)>& table_for) {
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(symbols[i], table_for(i));
  return enc.finish();
}

std::vector<std::int32_t> rc_decode(const Payload& payload,
                                    const std::function<const CdfTable&(std::size_t)>& table_for,
                                    std::size_t n) {
  RangeDecoder dec(payload);
  std::vector<std::int32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = dec.decode(table_for(i));
  return out;
}

}  // namespace cevc
