// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C interface.
//
// Exit codes: 0 success, 1 usage, 2 data/format error, 3 numeric failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cevc/cevc.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Carries a library failure up to main().
struct Failure {
  cevc_status status;
  std::string message;
  std::int64_t index;
};

int exit_code(cevc_status s) {
  switch (s) {
    case CEVC_OK: return kExitOk;
    case CEVC_ERR_NUMERIC:
    case CEVC_ERR_DOMAIN: return kExitNumeric;
    case CEVC_ERR_CONTRACT:
    case CEVC_ERR_INVALID_ARGUMENT: return kExitUsage;
    default: return kExitData;
  }
}

void check(cevc_status s) {
  if (s != CEVC_OK) throw Failure{s, cevc_last_error(), cevc_last_error_index()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ModelPtr = std::unique_ptr<cevc_model, Deleter<cevc_model, cevc_model_free>>;
using VideoPtr = std::unique_ptr<cevc_video, Deleter<cevc_video, cevc_video_free>>;
using EncodingPtr = std::unique_ptr<cevc_encoding, Deleter<cevc_encoding, cevc_encoding_free>>;
using DecodingPtr = std::unique_ptr<cevc_decoding, Deleter<cevc_decoding, cevc_decoding_free>>;
using StreamPtr = std::unique_ptr<cevc_bitstream, Deleter<cevc_bitstream, cevc_bitstream_free>>;

ModelPtr load_model(const std::string& path) {
  cevc_model* m = nullptr;
  check(cevc_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

VideoPtr load_video(const std::string& path) {
  cevc_video* v = nullptr;
  check(cevc_video_read_raw(path.c_str(), &v));
  return VideoPtr(v);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{CEVC_ERR_IO, "cannot open " + path, -1};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::uint8_t* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Failure{CEVC_ERR_IO, "cannot write " + path, -1};
}

std::string hex(const std::uint8_t* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    s += digits[p[i] >> 4];
    s += digits[p[i] & 15];
  }
  return s;
}

// JSON cannot hold infinity (lossless PSNR); emit null instead.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(); }

Json stats_json(const cevc_frame_stats& s) {
  return Json{{"z_bytes", s.z_bytes},
              {"y_bytes", s.y_bytes},
              {"z_table_bits", s.z_table_bits},
              {"y_table_bits", s.y_table_bits},
              {"z_model_bits", s.z_model_bits},
              {"y_model_bits", s.y_model_bits},
              {"clamped", s.clamped},
              {"internal_learning", s.internal_learning != 0},
              {"fell_back", s.fell_back != 0}};
}

// Fills options that were not given on the command line from a JSON
// object. Keys are the long option names without dashes; both "num-down"
// and "num_down" are accepted.
void apply_json_config(CLI::App& app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  Json cfg;
  try {
    cfg = Json::parse(in);
  } catch (const Json::exception& e) {
    throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    std::string key = it.key();
    for (auto& c : key) {
      if (c == '_') c = '-';
    }
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ValidationError("--config", "unknown key '" + it.key() + "'");
    }
    if (opt->count() > 0) continue;  // the command line wins
    const Json& v = it.value();
    std::vector<std::string> values;
    auto scalar = [](const Json& x) {
      if (x.is_string()) return x.get<std::string>();
      if (x.is_boolean()) return std::string(x.get<bool>() ? "true" : "false");
      return x.dump();
    };
    if (v.is_array()) {
      for (const auto& x : v) values.push_back(scalar(x));
    } else {
      values.push_back(scalar(v));
    }
    if (opt->get_type_size() == 0) {
      // Flags take no value; false leaves them unset.
      if (values.size() == 1 && values[0] == "false") continue;
      opt->add_result(std::string("true"));
    } else {
      for (auto& s : values) opt->add_result(s);
    }
    opt->run_callback();
  }
}

cevc_metric parse_metric(const std::string& m) {
  return m == "msssim" ? CEVC_METRIC_MSSSIM : CEVC_METRIC_MSE;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string out;
  cevc_synthetic_spec spec{};
};

int run_gen_data(const GenDataArgs& a) {
  cevc_video* v = nullptr;
  check(cevc_video_synthetic(&a.spec, &v));
  VideoPtr video(v);
  check(cevc_video_write_raw(video.get(), a.out.c_str()));
  const Json info{{"out", a.out},
                  {"seed", a.spec.seed},
                  {"frames", a.spec.frames},
                  {"height", a.spec.height},
                  {"width", a.spec.width},
                  {"objects", a.spec.num_objects},
                  {"max_velocity", a.spec.max_velocity}};
  // The raw header has no room for provenance; keep it next to the file.
  std::ofstream(a.out + ".json") << info.dump(2) << "\n";
  std::cout << info.dump() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> data, val;
  std::string out, init, log;
  cevc_train_config train{};
  cevc_model_config model{};
  std::string metric = "mse";
  std::uint64_t model_seed = 1;
};

int run_train(TrainArgs a) {
  a.train.metric = parse_metric(a.metric);
  ModelPtr model;
  if (!a.init.empty()) {
    model = load_model(a.init);
  } else {
    cevc_model* m = nullptr;
    check(cevc_model_create(&a.model, a.model_seed, &m));
    model.reset(m);
  }
  std::vector<VideoPtr> owned;
  std::vector<const cevc_video*> train_clips, val_clips;
  for (const auto& p : a.data) {
    owned.push_back(load_video(p));
    train_clips.push_back(owned.back().get());
  }
  for (const auto& p : a.val) {
    owned.push_back(load_video(p));
    val_clips.push_back(owned.back().get());
  }
  std::unique_ptr<std::ofstream> log;
  if (!a.log.empty()) log = std::make_unique<std::ofstream>(a.log);
  struct Sink {
    std::ofstream* log;
  } sink{log.get()};
  auto on_epoch = [](const cevc_epoch_log* l, void* user) {
    const Json j{{"epoch", l->epoch},
                 {"steps", l->steps},
                 {"train", {{"distortion", l->train_distortion},
                            {"bpp", l->train_bpp},
                            {"total", l->train_total}}},
                 {"val", {{"distortion", l->val_distortion},
                          {"bpp", l->val_bpp},
                          {"total", l->val_total}}},
                 {"seconds", l->seconds}};
    std::cerr << j.dump() << std::endl;
    if (auto* s = static_cast<Sink*>(user); s->log != nullptr) *s->log << j.dump() << std::endl;
  };
  int best = 0;
  check(cevc_train(model.get(), &a.train, train_clips.data(), train_clips.size(),
                   val_clips.data(), val_clips.size(), on_epoch, &sink, &best));
  check(cevc_model_save(model.get(), a.out.c_str()));
  std::uint8_t hash[8];
  check(cevc_model_hash(model.get(), hash));
  std::cout << Json{{"out", a.out},
                    {"best_epoch", best},
                    {"seed", a.train.seed},
                    {"lambda", a.train.lambda},
                    {"model_hash", hex(hash, 8)}}
                   .dump()
            << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ encode

struct LearningArgs {
  bool enabled = false;
  cevc_encode_options options{};
  std::string metric = "mse";
  bool lambda_given = false;
};

// Internal learning defaults to the lambda the checkpoint was trained with.
cevc_encode_options resolve_options(const LearningArgs& l, const cevc_model* model) {
  cevc_encode_options o = l.options;
  o.internal_learning = l.enabled ? 1 : 0;
  o.metric = parse_metric(l.metric);
  if (!l.lambda_given) {
    double lambda = 0;
    check(cevc_model_training_info(model, nullptr, &lambda, nullptr));
    if (lambda > 0) o.lambda = lambda;
  }
  return o;
}

struct EncodeArgs {
  std::string input, model, out, dump_recon;
  LearningArgs learning;
};

int run_encode(const EncodeArgs& a) {
  ModelPtr model = load_model(a.model);
  VideoPtr video = load_video(a.input);
  const cevc_encode_options opts = resolve_options(a.learning, model.get());
  cevc_encoding* e = nullptr;
  check(cevc_encode(model.get(), video.get(), &opts, &e));
  EncodingPtr enc(e);
  const std::uint8_t* bytes = nullptr;
  std::size_t size = 0;
  check(cevc_encoding_bytes(enc.get(), &bytes, &size));
  write_bytes(a.out, bytes, size);

  VideoPtr recon;
  {
    cevc_video* r = nullptr;
    check(cevc_encoding_reconstruction(enc.get(), &r));
    recon.reset(r);
  }
  if (!a.dump_recon.empty()) check(cevc_video_write_raw(recon.get(), a.dump_recon.c_str()));

  std::uint32_t frames = 0;
  check(cevc_video_info(video.get(), &frames, nullptr, nullptr));
  double bpp = 0;
  check(cevc_encoding_bpp(enc.get(), &bpp));
  Json per_frame = Json::array();
  double mse_sum = 0, ms_sum = 0;
  for (std::uint32_t i = 0; i < frames; ++i) {
    cevc_frame_stats s{};
    check(cevc_encoding_frame_stats(enc.get(), i, &s));
    double mse = 0, psnr = 0, ms = 0;
    check(cevc_frame_metrics(video.get(), recon.get(), i, &mse, &psnr, &ms));
    mse_sum += mse;
    ms_sum += ms;
    Json j = stats_json(s);
    j["mse"] = mse;
    j["psnr"] = number(psnr);
    j["msssim"] = ms;
    if (s.objective_count > 0) {
      std::vector<double> trace(s.objective_count);
      check(cevc_encoding_objective(enc.get(), i, trace.data(), trace.size()));
      j["objective"] = trace;
    }
    per_frame.push_back(std::move(j));
  }
  const double mse = mse_sum / frames;
  std::cout << Json{{"out", a.out},
                    {"bytes", size},
                    {"bpp", bpp},
                    {"mse", mse},
                    {"psnr", number(-10.0 * std::log10(mse))},
                    {"msssim", ms_sum / frames},
                    {"internal_learning", opts.internal_learning != 0},
                    {"steps", opts.internal_learning ? opts.steps : 0},
                    {"lambda", opts.lambda},
                    {"frames", per_frame}}
                   .dump(2)
            << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ decode

struct DecodeArgs {
  std::string input, model, out;
  int threads = 0;
};

int run_decode(const DecodeArgs& a) {
  ModelPtr model = load_model(a.model);
  const auto bytes = read_bytes(a.input);
  cevc_decoding* d = nullptr;
  check(cevc_decode(model.get(), bytes.data(), bytes.size(), a.threads, &d));
  DecodingPtr dec(d);
  cevc_video* v = nullptr;
  check(cevc_decoding_video(dec.get(), &v));
  VideoPtr video(v);
  check(cevc_video_write_raw(video.get(), a.out.c_str()));
  std::uint32_t frames = 0, h = 0, w = 0;
  check(cevc_video_info(video.get(), &frames, &h, &w));
  std::cout << Json{{"out", a.out}, {"frames", frames}, {"height", h}, {"width", w}}.dump()
            << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  std::string input, csv, json;
  std::vector<std::string> models;
  LearningArgs learning;
  int repeat = 1;
};

struct BenchRow {
  std::string model;
  double lambda = 0;
  bool il = false;
  double bpp = 0, mse = 0, psnr = 0, msssim = 0, log_msssim = 0;
  double encode_seconds = 0, decode_seconds = 0;
};

int run_bench(const BenchArgs& a) {
  VideoPtr video = load_video(a.input);
  std::uint32_t frames = 0;
  check(cevc_video_info(video.get(), &frames, nullptr, nullptr));
  std::vector<BenchRow> rows;
  std::uint64_t seed = 0;
  for (const auto& path : a.models) {
    ModelPtr model = load_model(path);
    std::uint64_t model_seed = 0;
    double lambda = 0;
    check(cevc_model_training_info(model.get(), &model_seed, &lambda, nullptr));
    seed = model_seed;
    std::vector<bool> modes{false};
    if (a.learning.enabled) modes.push_back(true);
    for (const bool il : modes) {
      LearningArgs l = a.learning;
      l.enabled = il;
      const cevc_encode_options opts = resolve_options(l, model.get());
      BenchRow row;
      row.model = path;
      row.lambda = lambda;
      row.il = il;
      EncodingPtr enc;
      for (int r = 0; r < a.repeat; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        cevc_encoding* e = nullptr;
        check(cevc_encode(model.get(), video.get(), &opts, &e));
        enc.reset(e);
        row.encode_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      const std::uint8_t* bytes = nullptr;
      std::size_t size = 0;
      check(cevc_encoding_bytes(enc.get(), &bytes, &size));
      VideoPtr decoded;
      for (int r = 0; r < a.repeat; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        cevc_decoding* d = nullptr;
        check(cevc_decode(model.get(), bytes, size, opts.threads, &d));
        DecodingPtr dec(d);
        row.decode_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        cevc_video* v = nullptr;
        check(cevc_decoding_video(dec.get(), &v));
        decoded.reset(v);
      }
      row.encode_seconds /= a.repeat;
      row.decode_seconds /= a.repeat;
      check(cevc_encoding_bpp(enc.get(), &row.bpp));
      for (std::uint32_t i = 0; i < frames; ++i) {
        double mse = 0, ms = 0;
        check(cevc_frame_metrics(video.get(), decoded.get(), i, &mse, nullptr, &ms));
        row.mse += mse / frames;
        row.msssim += ms / frames;
      }
      row.psnr = -10.0 * std::log10(row.mse);
      row.log_msssim = -10.0 * std::log10(1.0 - row.msssim);
      rows.push_back(row);
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const BenchRow& x, const BenchRow& y) { return x.bpp < y.bpp; });
  Json points = Json::array();
  for (const auto& r : rows) {
    points.push_back({{"model", r.model},
                      {"lambda", r.lambda},
                      {"internal_learning", r.il},
                      {"bpp", r.bpp},
                      {"mse", r.mse},
                      {"psnr", number(r.psnr)},
                      {"msssim", r.msssim},
                      {"log_msssim", number(r.log_msssim)},
                      {"encode_fps", frames / r.encode_seconds},
                      {"decode_fps", frames / r.decode_seconds}});
  }
  const Json out{{"input", a.input}, {"frames", frames}, {"seed", seed}, {"points", points}};
  if (!a.csv.empty()) {
    std::ofstream csv(a.csv);
    csv.precision(17);
    csv << "model,lambda,internal_learning,bpp,mse,psnr,msssim,log_msssim,encode_fps,decode_fps\n";
    for (const auto& r : rows) {
      csv << r.model << ',' << r.lambda << ',' << (r.il ? 1 : 0) << ',' << r.bpp << ',' << r.mse
          << ',' << r.psnr << ',' << r.msssim << ',' << r.log_msssim << ','
          << frames / r.encode_seconds << ',' << frames / r.decode_seconds << '\n';
    }
    if (!csv) throw Failure{CEVC_ERR_IO, "cannot write " + a.csv, -1};
  }
  if (!a.json.empty()) {
    std::ofstream js(a.json);
    js << out.dump(2) << "\n";
    if (!js) throw Failure{CEVC_ERR_IO, "cannot write " + a.json, -1};
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- inspect

struct InspectArgs {
  std::string input, model;
  int threads = 0;
};

int run_inspect(const InspectArgs& a) {
  const auto bytes = read_bytes(a.input);
  cevc_bitstream* s = nullptr;
  check(cevc_bitstream_parse(bytes.data(), bytes.size(), &s));
  StreamPtr stream(s);
  cevc_header h{};
  check(cevc_bitstream_header(stream.get(), &h));
  double bpp = 0;
  check(cevc_bitstream_bpp(stream.get(), &bpp));
  Json header{{"version", h.version},
              {"model_hash", hex(h.model_hash, 8)},
              {"frame_count", h.frame_count},
              {"height", h.height},
              {"width", h.width},
              {"pad_h", h.pad_h},
              {"pad_w", h.pad_w},
              {"N", h.N},
              {"Nz", h.Nz},
              {"num_down", h.num_down},
              {"L", h.L},
              {"K", h.K},
              {"flags", {{"internal_learning", (h.flags & 1) != 0},
                         {"factorized_y", (h.flags & 2) != 0}}}};
  std::vector<cevc_frame_stats> accounting;
  if (!a.model.empty()) {
    ModelPtr model = load_model(a.model);
    accounting.resize(h.frame_count);
    check(cevc_bitstream_account(stream.get(), model.get(), a.threads, accounting.data(),
                                 accounting.size()));
  }
  const double pixels = static_cast<double>(h.height) * h.width;
  Json frames = Json::array();
  double model_bits = 0;
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    cevc_record_info r{};
    check(cevc_bitstream_record(stream.get(), i, &r));
    Json j{{"frame", i},
           {"z_bytes", r.z_bytes},
           {"y_bytes", r.y_bytes},
           {"z_crc", r.z_crc},
           {"y_crc", r.y_crc},
           {"coded_bpp", 8.0 * static_cast<double>(r.z_bytes + r.y_bytes) / pixels}};
    if (!accounting.empty()) {
      const auto& st = accounting[i];
      const double bits = st.z_model_bits + st.y_model_bits;
      model_bits += bits;
      j["z_table_bits"] = st.z_table_bits;
      j["y_table_bits"] = st.y_table_bits;
      j["z_model_bits"] = st.z_model_bits;
      j["y_model_bits"] = st.y_model_bits;
      j["model_bpp"] = bits / pixels;
      j["clamped"] = st.clamped;
    }
    frames.push_back(std::move(j));
  }
  Json out{{"input", a.input},
           {"bytes", bytes.size()},
           {"header", header},
           {"coded_bpp", bpp}};
  if (!accounting.empty()) out["model_bpp"] = model_bits / (pixels * h.frame_count);
  out["frames"] = frames;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

void add_learning_options(CLI::App* app, LearningArgs& l) {
  app->add_flag("--internal-learning", l.enabled, "Refine latents per frame before coding");
  app->add_option("--steps", l.options.steps, "Internal-learning gradient steps")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--lr", l.options.lr, "Internal-learning step size")
      ->check(CLI::PositiveNumber);
  app->add_option("--momentum", l.options.momentum, "Nesterov momentum")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option_function<double>(
         "--il-lambda",
         [&l](double v) {
           l.options.lambda = v;
           l.lambda_given = true;
         },
         "Rate weight of the internal-learning objective (default: training lambda)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--il-metric", l.metric, "Internal-learning distortion")
      ->check(CLI::IsMember({"mse", "msssim"}));
  app->add_option("--decay-at", l.options.decay_at, "Fraction of steps before the lr halves")
      ->check(CLI::Range(0.0, 1.0));
  app->add_flag("--factorized-y", l.options.factorized_y,
                "Code y under the factorized ablation prior (no conditioning)");
  app->add_option("--threads", l.options.threads, "Worker threads (0 = CEVC_THREADS/auto)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional-entropy video codec"};
  app.require_subcommand(1);
  std::string config;

  GenDataArgs gen;
  cevc_synthetic_spec_default(&gen.spec);
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic translating-object video");
  gen_cmd->add_option("--out", gen.out, "Output .raw path")->required();
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed");
  gen_cmd->add_option("--frames", gen.spec.frames, "Frame count")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", gen.spec.height, "Frame height (>= 32)");
  gen_cmd->add_option("--width", gen.spec.width, "Frame width (>= 32)");
  gen_cmd->add_option("--objects", gen.spec.num_objects, "Moving objects")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--max-velocity", gen.spec.max_velocity, "Max |velocity| per axis")
      ->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  cevc_train_config_default(&tr.train);
  cevc_model_config_default(&tr.model);
  auto* train_cmd = app.add_subcommand("train", "Train a model on raw videos");
  train_cmd->add_option("--data", tr.data, "Training .raw clips")->required();
  train_cmd->add_option("--val", tr.val, "Validation .raw clips (default: training clips)");
  train_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
  train_cmd->add_option("--init", tr.init, "Fine-tune this checkpoint instead of a fresh model");
  train_cmd->add_option("--log", tr.log, "Per-epoch JSON lines");
  train_cmd->add_option("--lambda", tr.train.lambda, "Rate weight")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--target-bpp", tr.train.target_bpp, "Rate clamp floor R_a")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", tr.train.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr.train.batch, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--crop", tr.train.crop, "Square crop size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tr.train.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--steps-per-epoch", tr.train.steps_per_epoch,
                        "Optimizer steps per epoch (0 = full pass)")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tr.train.seed, "Training seed");
  train_cmd->add_option("--metric", tr.metric, "Distortion")
      ->check(CLI::IsMember({"mse", "msssim"}));
  train_cmd->add_option("--ablation-weight", tr.train.ablation_weight,
                        "Weight of the factorized y-prior rate term")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--model-seed", tr.model_seed, "Initialization seed");
  train_cmd->add_option("--N", tr.model.N, "Latent channels");
  train_cmd->add_option("--M", tr.model.M, "Hyper decoder width");
  train_cmd->add_option("--K", tr.model.K, "Mixture components");
  train_cmd->add_option("--Nz", tr.model.Nz, "Hyper latent channels");
  train_cmd->add_option("--num-down", tr.model.num_down, "Stride-2 stages");
  train_cmd->add_option("--L", tr.model.L, "Symbol range [-L, L]");
  train_cmd->add_option("--sigma-min", tr.model.sigma_min, "Scale floor");

  EncodeArgs en;
  cevc_encode_options_default(&en.learning.options);
  auto* enc_cmd = app.add_subcommand("encode", "Encode a raw video");
  enc_cmd->add_option("--input", en.input, "Input .raw")->required();
  enc_cmd->add_option("--model", en.model, "Checkpoint")->required();
  enc_cmd->add_option("--out", en.out, "Output .cevc")->required();
  enc_cmd->add_option("--dump-recon", en.dump_recon, "Write the encoder-side reconstruction");
  add_learning_options(enc_cmd, en.learning);

  DecodeArgs de;
  auto* dec_cmd = app.add_subcommand("decode", "Decode a bitstream to raw video");
  dec_cmd->add_option("--input", de.input, "Input .cevc")->required();
  dec_cmd->add_option("--model", de.model, "Checkpoint")->required();
  dec_cmd->add_option("--out", de.out, "Output .raw")->required();
  dec_cmd->add_option("--threads", de.threads, "Worker threads")->check(CLI::NonNegativeNumber);

  BenchArgs be;
  cevc_encode_options_default(&be.learning.options);
  auto* bench_cmd = app.add_subcommand(
      "bench", "Rate-distortion and speed table over one or more checkpoints");
  bench_cmd->add_option("--input", be.input, "Input .raw")->required();
  bench_cmd->add_option("--model", be.models, "Checkpoints")->required();
  bench_cmd->add_option("--csv", be.csv, "CSV table path");
  bench_cmd->add_option("--json", be.json, "JSON plot-data path");
  bench_cmd->add_option("--repeat", be.repeat, "Timing repetitions")->check(CLI::PositiveNumber);
  add_learning_options(bench_cmd, be.learning);

  InspectArgs in;
  auto* insp_cmd = app.add_subcommand("inspect", "Dump header and per-frame bit accounting");
  insp_cmd->add_option("--input", in.input, "Input .cevc")->required();
  insp_cmd->add_option("--model", in.model, "Checkpoint for model bit accounting");
  insp_cmd->add_option("--threads", in.threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // Required options may come from the config file, so they are checked
  // after it has been applied.
  std::vector<std::pair<CLI::App*, CLI::Option*>> required;
  for (auto* sub : {gen_cmd, train_cmd, enc_cmd, dec_cmd, bench_cmd, insp_cmd}) {
    sub->add_option("--config", config, "JSON file of option values (flags win)");
    for (auto* opt : sub->get_options()) {
      if (opt->get_required()) {
        opt->required(false);
        required.emplace_back(sub, opt);
      }
    }
  }

  try {
    app.parse(argc, argv);
    for (auto* sub : app.get_subcommands()) apply_json_config(*sub, config);
    for (const auto& [sub, opt] : required) {
      if (*sub && opt->count() == 0) throw CLI::RequiredError(opt->get_name());
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*enc_cmd) return run_encode(en);
    if (*dec_cmd) return run_decode(de);
    if (*bench_cmd) return run_bench(be);
    if (*insp_cmd) return run_inspect(in);
  } catch (const Failure& f) {
    Json err{{"error", cevc_status_string(f.status)}, {"message", f.message}};
    if (f.index >= 0) err["index"] = f.index;
    std::cerr << err.dump() << "\n";
    return exit_code(f.status);
  }
  return kExitUsage;
}
