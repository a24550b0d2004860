// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <fstream>

#include "bytes.hpp"

namespace cevc {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'E', 'V', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kCheckpointVersion = 1;
constexpr std::size_t kDigestSize = 32;

std::array<std::uint8_t, 32> sha256(const std::uint8_t* data, std::size_t n) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data, n, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    fail(ErrorKind::kIo, "SHA-256 computation failed");
  }
  return out;
}

}  // namespace

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::kIo, "error reading " + path);
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "error writing " + path);
}

}  // namespace detail

Model::Model(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Initializer init(store_, seed);
  encoder_ = ImageEncoder(cfg_, init);
  decoder_ = ImageDecoder(cfg_, init);
  hyper_encoder_ = HyperEncoder(cfg_, init);
  hyper_decoder_ = HyperDecoder(cfg_, init);
  z_prior_ = FactorizedPrior(cfg_.Nz, init, "z_prior");
  if (cfg_.factorized_y_ablation) y_prior_ = FactorizedPrior(cfg_.N, init, "y_prior");
}

Tensor Model::image_encode(const Tensor& x) const {
  encoder_calls_.fetch_add(1);
  return encoder_(x);
}

Tensor Model::image_decode(const Tensor& y) const { return decoder_(y); }

Tensor Model::hyper_encode(const Tensor& y, const Tensor& y_prev) const {
  encoder_calls_.fetch_add(1);
  return hyper_encoder_(y, y_prev);
}

GmmParams Model::hyper_decode(const Tensor& z, const Tensor& y_prev) const {
  return hyper_decoder_(z, y_prev);
}

const FactorizedPrior& Model::y_prior() const {
  if (!cfg_.factorized_y_ablation) {
    fail(ErrorKind::kContract, "model was built without the factorized y prior");
  }
  return y_prior_;
}

void Model::snap_to_float() {
  for (auto& [name, t] : store_.entries()) {
    Tensor h = t;
    for (double& v : h.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::vector<std::uint8_t> Model::serialize() const {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u16(kCheckpointVersion);
  w.u16(static_cast<std::uint16_t>(cfg_.N));
  w.u16(static_cast<std::uint16_t>(cfg_.M));
  w.u8(static_cast<std::uint8_t>(cfg_.K));
  w.u16(static_cast<std::uint16_t>(cfg_.Nz));
  w.u8(static_cast<std::uint8_t>(cfg_.num_down));
  w.u16(static_cast<std::uint16_t>(cfg_.L));
  w.f64(cfg_.sigma_min);
  w.u8(cfg_.factorized_y_ablation ? 1 : 0);
  w.u64(training_info.seed);
  w.f64(training_info.lambda);
  w.u64(training_info.steps);
  const auto& entries = store_.entries();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t a = 0; a < t.rank(); ++a) w.u32(static_cast<std::uint32_t>(t.dim(a)));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  const auto digest = sha256(w.bytes().data(), w.size());
  w.raw(digest.data(), digest.size());
  return std::move(w.bytes());
}

std::unique_ptr<Model> Model::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + 2 + kDigestSize) {
    fail(ErrorKind::kFormat, "checkpoint too short");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    fail(ErrorKind::kFormat, "not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - kDigestSize;
  const auto digest = sha256(bytes.data(), body);
  if (std::memcmp(digest.data(), bytes.data() + body, kDigestSize) != 0) {
    fail(ErrorKind::kCorruption, "checkpoint digest mismatch");
  }
  detail::ByteReader r(bytes.data(), body);
  r.set_context("checkpoint");
  r.take(sizeof kCheckpointMagic);
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  NetworkConfig cfg;
  cfg.N = r.u16();
  cfg.M = r.u16();
  cfg.K = r.u8();
  cfg.Nz = r.u16();
  cfg.num_down = r.u8();
  cfg.L = r.u16();
  cfg.sigma_min = r.f64();
  cfg.factorized_y_ablation = (r.u8() & 1) != 0;
  TrainingInfo info;
  info.seed = r.u64();
  info.lambda = r.f64();
  info.steps = r.u64();
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, std::string("checkpoint config invalid: ") + e.what());
  }
  auto model = std::make_unique<Model>(cfg);
  model->training_info = info;
  auto& entries = model->store_.entries();
  const std::uint32_t count = r.u32();
  if (count != entries.size()) {
    fail(ErrorKind::kFormat, "checkpoint has " + std::to_string(count) + " tensors, model expects " +
                                 std::to_string(entries.size()));
  }
  for (const auto& [name, t] : entries) {
    const std::string stored = r.text(r.u16());
    if (stored != name) {
      fail(ErrorKind::kFormat, "checkpoint tensor '" + stored + "' where '" + name + "' expected");
    }
    const std::size_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (shape != t.shape()) {
      fail(ErrorKind::kFormat, "checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                                   ", expected " + shape_str(t.shape()));
    }
    Tensor h = t;
    for (double& v : h.mutable_data()) v = static_cast<double>(r.f32());
  }
  if (r.remaining() != 0) fail(ErrorKind::kFormat, "trailing bytes in checkpoint");
  return model;
}

ModelHash Model::hash() const {
  const auto bytes = serialize();
  ModelHash h{};
  std::memcpy(h.data(), bytes.data() + bytes.size() - kDigestSize, h.size());
  return h;
}

void Model::save(const std::string& path) const { detail::write_file(path, serialize()); }

std::unique_ptr<Model> Model::load(const std::string& path) {
  return deserialize(detail::read_file(path));
}

std::unique_ptr<Model> Model::clone() const {
  auto copy = std::make_unique<Model>(cfg_);
  copy->training_info = training_info;
  const auto& src = store_.entries();
  const auto& dst = copy->store_.entries();
  for (std::size_t i = 0; i < src.size(); ++i) {
    Tensor h = dst[i].second;
    std::copy(src[i].second.data().begin(), src[i].second.data().end(), h.mutable_data().begin());
  }
  return copy;
}

std::array<std::uint8_t, 32> Model::weight_digest() const {
  detail::ByteWriter w;
  for (const auto& [name, t] : store_.entries()) {
    w.raw(t.data().data(), t.data().size() * sizeof(double));
  }
  return sha256(w.bytes().data(), w.size());
}

}  // namespace cevc
