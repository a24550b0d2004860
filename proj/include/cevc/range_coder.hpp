// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cevc/entropy_model.hpp"

namespace cevc {

inline constexpr int kCdfPrecisionBits = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfPrecisionBits;

/// Integer cumulative counts for one symbol distribution. Symbol s maps to
/// slot s - offset; slot i owns [cum[i], cum[i+1]).
struct CdfTable {
  std::vector<std::uint32_t> cum;  // size alphabet + 1, cum[0] = 0, back() = 2^16
  std::int32_t offset = 0;         // smallest symbol

  int alphabet() const { return static_cast<int>(cum.size()) - 1; }
  std::uint32_t count(std::int32_t symbol) const;
  double prob(std::int32_t symbol) const { return count(symbol) / double(kCdfTotal); }
  bool operator==(const CdfTable&) const = default;
};

// Largest-remainder apportionment of 2^16 counts, every symbol >= 1.
// Masses are floored at 2^-24 first. kCapacity when the alphabet exceeds 2^16,
// kDomain when the pmf is not normalized within 1e-6.
CdfTable quantize_cdf(std::span<const double> pmf, std::int32_t offset);
// Tails folded into the edge symbols, offset -L.
CdfTable quantize_cdf(const DiscretePmf& pmf);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

struct Payload {
  std::vector<std::uint8_t> bytes;
  std::uint32_t symbols = 0;
  std::uint32_t checksum = 0;  // CRC-32 of bytes

  bool verify() const { return crc32(bytes) == checksum; }
};

class RangeEncoder {
 public:
  void encode(std::int32_t symbol, const CdfTable& table);
  // Flushes the state; the encoder must not be used afterwards.
  Payload finish();

 private:
  void emit_byte();

  std::uint64_t low_ = 0;  // bit 32 holds a pending carry
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t count_ = 0;
  bool finished_ = false;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  // Verifies the checksum up front (kCorruption on mismatch).
  explicit RangeDecoder(const Payload& payload);
  // kDesync naming the symbol index when the state falls outside the table.
  std::int32_t decode(const CdfTable& table);
  std::uint32_t decoded() const { return index_; }

 private:
  std::uint8_t next_byte();

  const std::vector<std::uint8_t>* bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;  // code - low, modulo 2^32
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t index_ = 0;
};

Payload rc_encode(std::span<const std::int32_t> symbols,
                  const std::function<const CdfTable&(std::size_t)>& table_for);
std::vector<std::int32_t> rc_decode(const Payload& payload,
                                    const std::function<const CdfTable&(std::size_t)>& table_for,
                                    std::size_t n);

}  // namespace cevc
