// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cevc/entropy_model.hpp"
#include "cevc/networks.hpp"

namespace cevc {

using ModelHash = std::array<std::uint8_t, 8>;

// Provenance stored alongside the weights. Not part of the model identity
// beyond being hashed with it.
struct TrainingInfo {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::uint64_t steps = 0;
};

/// All learned components of the codec: image encoder/decoder, hyperprior
/// encoder/decoder, the factorized prior over z and (optionally) the
/// factorized prior over y used by the unconditional ablation.
class Model {
 public:
  explicit Model(const NetworkConfig& cfg, std::uint64_t seed = 1);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const NetworkConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Network passes. The encoder-side calls are counted so tests can assert
  // the decoder never runs them.
  Tensor image_encode(const Tensor& x) const;
  Tensor image_decode(const Tensor& y) const;
  Tensor hyper_encode(const Tensor& y, const Tensor& y_prev) const;
  GmmParams hyper_decode(const Tensor& z, const Tensor& y_prev) const;
  const FactorizedPrior& z_prior() const { return z_prior_; }
  // Requires config().factorized_y_ablation.
  const FactorizedPrior& y_prior() const;

  std::uint64_t encoder_calls() const { return encoder_calls_.load(); }
  void reset_call_counters() const {
    encoder_calls_.store(0);
  }

  // Rounds every parameter to the nearest float so the in-memory model is
  // exactly what a checkpoint stores.
  void snap_to_float();

  TrainingInfo training_info;

  // Checkpoint bytes (see docs/formats.md) and the identity derived from
  // their digest.
  std::vector<std::uint8_t> serialize() const;
  static std::unique_ptr<Model> deserialize(const std::vector<std::uint8_t>& bytes);
  ModelHash hash() const;
  void save(const std::string& path) const;
  static std::unique_ptr<Model> load(const std::string& path);
  // Deep copy with exact (double) parameter values.
  std::unique_ptr<Model> clone() const;
  // SHA-256 over every parameter value; used to assert weights are frozen.
  std::array<std::uint8_t, 32> weight_digest() const;

 private:
  NetworkConfig cfg_;
  ParamStore store_;
  ImageEncoder encoder_;
  ImageDecoder decoder_;
  HyperEncoder hyper_encoder_;
  HyperDecoder hyper_decoder_;
  FactorizedPrior z_prior_;
  FactorizedPrior y_prior_;
  mutable std::atomic<std::uint64_t> encoder_calls_{0};
};

}  // namespace cevc
