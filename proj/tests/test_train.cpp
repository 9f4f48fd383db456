#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asr/checkpoint.hpp"
#include "asr/ctc.hpp"
#include "asr/error.hpp"
#include "asr/train.hpp"
#include "doctest.h"
#include "fixture.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace asr;
using train::TrainConfig;
using train::TrainState;
using train::Utterance;
namespace fs = std::filesystem;

namespace {

std::vector<Utterance> tone_set(const std::vector<std::string>& transcripts, std::uint64_t seed = 1) {
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    fixture::SynthOptions opt;
    opt.seed = seed + i;
    out.push_back({"u" + std::to_string(i) + ".wav", fixture::synthesize(transcripts[i], opt), transcripts[i]});
  }
  return out;
}

text::Alphabet alphabet_of(const std::vector<Utterance>& data) {
  std::vector<std::string> t;
  for (const auto& u : data) t.push_back(u.transcript);
  return text::build_alphabet(t);
}

model::ModelConfig small_model() {
  model::ModelConfig m;
  m.n_hidden = 16;
  m.seed = 3;
  return m;
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 2;
  c.learning_rate = 3e-3;
  c.seed = 5;
  return c;
}

TrainState sample_state() {
  TrainState s;
  s.model_config = small_model();
  s.model_config.n_input = 26;
  s.model_config.n_output = 6;
  s.alphabet = text::Alphabet(U" 'abc");
  s.params = model::init_model(s.model_config);
  s.adam_m = model::zeros(s.model_config);
  s.adam_v = model::zeros(s.model_config);
  s.adam_m.dense1_w.data[3] = 0.125;
  s.adam_v.output_b.data[1] = 1e-300;
  s.epoch = 7;
  s.step = 91;
  s.best_loss = 1.0 / 3.0;
  s.best_checkpoint = "ckpt-5.bin";
  s.epochs_since_improvement = 2;
  return s;
}

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::IoFailure;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK(code_of([&] { c.validate(); }) == Errc::InvalidConfig);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("epoch log line format") {
  train::EpochLog e{3, 1.5, 2.25, 0.001, 4};
  CHECK(train::format_epoch_log(e) == "epoch=3 train_loss=1.500000 dev_loss=2.250000 lr=0.001 skipped=4");
}

TEST_CASE("checkpoint round trip is bitwise lossless") {
  testing_support::TempDir dir;
  const TrainState s = sample_state();
  const auto bytes = train::serialize_checkpoint(s);
  CHECK(std::memcmp(bytes.data(), "ASRC", 4) == 0);
  const TrainState back = train::deserialize_checkpoint(bytes);
  CHECK(back == s);
  CHECK(train::serialize_checkpoint(back) == bytes);

  const auto path = train::save_checkpoint(s, dir.path());
  CHECK(path.filename() == "ckpt-7.bin");
  CHECK(train::load_checkpoint(path) == s);
  CHECK(train::serialize_checkpoint(train::load_checkpoint(path)) == bytes);

  TrainState no_best = s;
  no_best.best_loss.reset();
  CHECK(train::deserialize_checkpoint(train::serialize_checkpoint(no_best)) == no_best);
}

TEST_CASE("damaged checkpoints are rejected") {
  const auto bytes = train::serialize_checkpoint(sample_state());
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK(code_of([&] { train::deserialize_checkpoint(truncated); }) == Errc::ChecksumMismatch);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK(code_of([&] { train::deserialize_checkpoint(flipped); }) == Errc::ChecksumMismatch);

  // Version 2 with a valid trailer.
  auto v2 = bytes;
  v2[4] = 2;
  const std::uint32_t crc = oracle::crc32(v2.data(), v2.size() - 4);
  for (int i = 0; i < 4; ++i) v2[v2.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  CHECK(code_of([&] { train::deserialize_checkpoint(v2); }) == Errc::VersionUnsupported);

  // The stored trailer is the standard CRC-32 of everything before it.
  const std::uint32_t stored = bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
                               (bytes[bytes.size() - 2] << 16) | (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
  CHECK(stored == oracle::crc32(bytes.data(), bytes.size() - 4));
}

TEST_CASE("best marker resolves a directory to a checkpoint file") {
  testing_support::TempDir dir;
  const auto s = sample_state();
  const auto path = train::save_checkpoint(s, dir.path());
  CHECK(!train::read_best_marker(dir.path()));
  train::write_best_marker(dir.path(), path.filename().string());
  CHECK(train::read_best_marker(dir.path()) == path.filename().string());
  CHECK(train::resolve_checkpoint(dir.path()) == path);
  CHECK(train::resolve_checkpoint(path) == path);
}

TEST_CASE("SGD moves every parameter against its gradient") {
  const auto data = tone_set({"ab"});
  const auto alphabet = alphabet_of(data);
  model::ModelConfig cfg = small_model();
  cfg.n_input = 26;
  cfg.n_output = static_cast<int>(alphabet.size()) + 1;
  auto params = model::init_model(cfg);
  const auto feats = features::compute_mfcc(data[0].clip, {}).frames;
  const auto u = train::utterance_gradient(params, cfg, feats, text::encode_labels("ab", alphabet));
  REQUIRE(u.feasible);
  const auto before = params;
  train::sgd_step(params, u.grad, 0.01);
  const auto b = before.tensors();
  const auto a = params.tensors();
  const auto g = u.grad.tensors();
  for (std::size_t t = 0; t < b.size(); ++t) {
    for (std::size_t i = 0; i < b[t]->data.size(); ++i) {
      const double delta = a[t]->data[i] - b[t]->data[i];
      const double grad = g[t]->data[i];
      if (grad > 0) REQUIRE(delta < 0);
      if (grad < 0) REQUIRE(delta > 0);
      if (grad == 0) REQUIRE(delta == 0);
    }
  }
}

TEST_CASE("first Adam step is finite and bounded by the learning rate") {
  const auto data = tone_set({"cab"});
  const auto alphabet = alphabet_of(data);
  model::ModelConfig cfg = small_model();
  cfg.n_input = 26;
  cfg.n_output = static_cast<int>(alphabet.size()) + 1;
  auto params = model::init_model(cfg);
  const auto u = train::utterance_gradient(params, cfg, features::compute_mfcc(data[0].clip, {}).frames,
                                           text::encode_labels("cab", alphabet));
  auto m = model::zeros(cfg), v = model::zeros(cfg);
  const auto before = params;
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  train::adam_step(params, u.grad, m, v, 1, tc);
  const auto b = before.tensors();
  const auto a = params.tensors();
  for (std::size_t t = 0; t < b.size(); ++t) {
    for (std::size_t i = 0; i < b[t]->data.size(); ++i) {
      const double delta = a[t]->data[i] - b[t]->data[i];
      REQUIRE(std::isfinite(delta));
      REQUIRE(std::abs(delta) <= tc.learning_rate * (1.0 + 1e-6));
    }
  }
}

TEST_CASE("gradient clipping bounds the global norm") {
  model::ModelConfig cfg = small_model();
  auto g = model::zeros(cfg);
  g.dense1_w.data[0] = 30.0;
  g.output_b.data[0] = 40.0;
  CHECK(train::global_norm(g) == doctest::Approx(50.0));
  train::clip_global_norm(g, 5.0);
  CHECK(train::global_norm(g) == doctest::Approx(5.0));
  CHECK(g.dense1_w.data[0] == doctest::Approx(3.0));
  train::clip_global_norm(g, 10.0);
  CHECK(g.dense1_w.data[0] == doctest::Approx(3.0));
}

TEST_CASE("repeated batch loss is essentially non-increasing") {
  const auto data = tone_set({"ab", "dace"});
  const auto alphabet = alphabet_of(data);
  model::ModelConfig cfg = small_model();
  cfg.n_input = 26;
  cfg.n_output = static_cast<int>(alphabet.size()) + 1;
  auto params = model::init_model(cfg);
  std::vector<Matrix> feats;
  std::vector<text::LabelSequence> labels;
  for (const auto& u : data) {
    feats.push_back(features::compute_mfcc(u.clip, {}).frames);
    labels.push_back(text::encode_labels(u.transcript, alphabet));
  }
  // default optimizer settings
  const TrainConfig tc;
  auto m = model::zeros(cfg);
  auto v = model::zeros(cfg);
  double previous = std::numeric_limits<double>::infinity();
  int upticks = 0;
  for (int step = 0; step < 50; ++step) {
    auto grad = model::zeros(cfg);
    double loss = 0.0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const auto u = train::utterance_gradient(params, cfg, feats[i], labels[i]);
      REQUIRE(u.feasible);
      loss += u.loss / feats.size();
      const auto src = u.grad.tensors();
      auto dst = grad.tensors();
      for (std::size_t t = 0; t < dst.size(); ++t) {
        for (std::size_t k = 0; k < dst[t]->data.size(); ++k) dst[t]->data[k] += src[t]->data[k] / feats.size();
      }
    }
    train::clip_global_norm(grad, tc.grad_clip);
    train::adam_step(params, grad, m, v, static_cast<std::uint64_t>(step + 1), tc);
    if (loss > previous + 1e-6) ++upticks;
    previous = loss;
  }
  CHECK(upticks <= 5);
}

TEST_CASE("training writes checkpoints, a best marker and epoch logs") {
  testing_support::TempDir dir;
  const auto data = tone_set({"ab", "cab", "bead", "dace"});
  const auto dev = tone_set({"bad"}, 50);
  TrainConfig c = quick_config(3);
  c.checkpoint_dir = dir / "ckpt";
  std::ostringstream log;
  const auto r = train::run_training(data, dev, alphabet_of(data), {}, small_model(), c, log);
  CHECK(r.epochs.size() == 3);
  CHECK(r.state.epoch == 3);
  CHECK(r.state.step == 6);
  for (int e = 1; e <= 3; ++e) CHECK(fs::exists(dir / ("ckpt/ckpt-" + std::to_string(e) + ".bin")));
  REQUIRE(train::read_best_marker(dir / "ckpt"));
  CHECK(*train::read_best_marker(dir / "ckpt") == r.state.best_checkpoint);
  CHECK(log.str().rfind("epoch=1 train_loss=", 0) == 0);
  CHECK(std::isfinite(r.epochs[0].dev_loss));
  CHECK(train::load_checkpoint(r.last_checkpoint) == r.state);
}

TEST_CASE("uncovered and infeasible rows are skipped and counted") {
  const auto data = tone_set({"ab", "cab"});
  auto extra = data;
  extra.push_back({"bad.wav", data[0].clip, "zzz"});  // not in the alphabet
  // far more labels than frames
  extra.push_back({"long.wav", fixture::synthesize("a"), std::string(60, 'a')});
  std::ostringstream log;
  const auto r = train::run_training(extra, {}, alphabet_of(data), {}, small_model(), quick_config(1), log);
  CHECK(r.epochs[0].skipped == 2);
  CHECK(log.str().find("SKIP bad.wav") != std::string::npos);
  CHECK(std::isnan(r.epochs[0].dev_loss));

  std::vector<Utterance> hopeless = {{"x.wav", data[0].clip, "zz"}};
  CHECK(code_of([&] {
          train::run_training(hopeless, {}, alphabet_of(data), {}, small_model(), quick_config(1), log);
        }) == Errc::AlphabetMismatch);
}

TEST_CASE("results do not depend on worker count") {
  const auto data = tone_set({"ab", "cab", "bead", "dace", "ed"});
  TrainConfig c = quick_config(2);
  c.augments = {augment::parse_augment_spec("gain[p=0.5]"), augment::parse_augment_spec("noise[p=0.5]")};
  std::ostringstream log;
  c.workers = 1;
  const auto one = train::run_training(data, {}, alphabet_of(data), {}, small_model(), c, log);
  c.workers = 4;
  const auto four = train::run_training(data, {}, alphabet_of(data), {}, small_model(), c, log);
  CHECK(one.state.params == four.state.params);
}

TEST_CASE("resume after interruption reproduces the uninterrupted run") {
  testing_support::TempDir dir;
  const auto data = tone_set({"ab", "cab", "bead", "dace", "ed"});
  auto model_cfg = small_model();
  model_cfg.dropout = 0.1;
  TrainConfig c = quick_config(4);
  c.augments = {augment::parse_augment_spec("gain[p=0.5]"), augment::parse_augment_spec("tempo[p=0.3]")};
  std::ostringstream log;

  c.checkpoint_dir = dir / "full";
  const auto full = train::run_training(data, {}, alphabet_of(data), {}, model_cfg, c, log);

  c.checkpoint_dir = dir / "part";
  c.epochs = 2;
  train::run_training(data, {}, alphabet_of(data), {}, model_cfg, c, log);
  c.epochs = 4;
  c.load_checkpoint = dir / "part/ckpt-2.bin";
  const auto resumed = train::run_training(data, {}, alphabet_of(data), {}, model_cfg, c, log);

  CHECK(resumed.epochs.size() == 2);
  CHECK(resumed.state == full.state);
  CHECK(train::serialize_checkpoint(resumed.state) == train::serialize_checkpoint(full.state));
}

TEST_CASE("loading into a different width is CheckpointIncompatible") {
  testing_support::TempDir dir;
  const auto data = tone_set({"ab", "cab"});
  auto m64 = small_model();
  m64.n_hidden = 12;
  TrainConfig c = quick_config(1);
  c.checkpoint_dir = dir.path();
  std::ostringstream log;
  train::run_training(data, {}, alphabet_of(data), {}, m64, c, log);
  auto m128 = small_model();
  m128.n_hidden = 24;
  c.load_checkpoint = dir.path();
  c.epochs = 2;
  CHECK(code_of([&] { train::run_training(data, {}, alphabet_of(data), {}, m128, c, log); }) ==
        Errc::CheckpointIncompatible);
}

TEST_CASE("fine-tuning keeps the weights and restarts counters") {
  testing_support::TempDir dir;
  const auto data = tone_set({"ab", "cab"});
  TrainConfig c = quick_config(2);
  c.checkpoint_dir = dir / "base";
  std::ostringstream log;
  const auto base = train::run_training(data, {}, alphabet_of(data), {}, small_model(), c, log);

  TrainConfig ft = quick_config(1);
  ft.load_checkpoint = base.last_checkpoint;
  ft.fine_tune = true;
  const auto tuned = train::run_training(tone_set({"bac"}, 9), {}, alphabet_of(data), {}, small_model(), ft, log);
  CHECK(tuned.state.epoch == 1);
  CHECK(tuned.state.step == 1);
  CHECK(tuned.state.alphabet == base.state.alphabet);
  CHECK(!(tuned.state.params == base.state.params));
}

TEST_CASE("early stopping after patience epochs without improvement") {
  const auto data = tone_set({"ab", "cab"});
  TrainConfig c = quick_config(20);
  c.learning_rate = 1e-300;  // parameters never move, so the loss never improves after epoch 1
  c.optimizer = train::Optimizer::Sgd;
  c.early_stop_patience = 2;
  std::ostringstream log;
  const auto r = train::run_training(data, tone_set({"bad"}, 3), alphabet_of(data), {}, small_model(), c, log);
  CHECK(r.epochs.size() == 3);
  CHECK(log.str().find("early stop") != std::string::npos);
}

TEST_CASE("load_dataset reads a manifest and resamples if needed") {
  testing_support::TempDir dir;
  audio::AudioClip c = fixture::synthesize("ab", {});
  audio::write_wav(dir / "a.wav", c);
  std::ofstream(dir / "m.csv") << "wav_filename,wav_filesize,transcript\na.wav," << fs::file_size(dir / "a.wav")
                               << ",ab\n";
  const auto data = train::load_dataset(dir / "m.csv", 2);
  REQUIRE(data.size() == 1);
  CHECK(data[0].name == "a.wav");
  CHECK(data[0].transcript == "ab");
  CHECK(data[0].clip.sample_rate_hz == 16000);
  CHECK(data[0].clip.samples.size() == c.samples.size());
}
