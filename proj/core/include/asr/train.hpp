#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asr/audio.hpp"
#include "asr/augment.hpp"
#include "asr/checkpoint.hpp"
#include "asr/features.hpp"
#include "asr/model.hpp"
#include "asr/text.hpp"

namespace asr::train {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
  std::optional<std::filesystem::path> load_checkpoint;
  // Load weights only and restart counters/optimizer (fine-tuning).
  bool fine_tune = false;
  std::optional<int> early_stop_patience;
  unsigned workers = 1;
  std::vector<augment::AugmentSpec> augments;

  // Throws Error{InvalidConfig}.
  void validate() const;
};

struct Utterance {
  std::string name;  // manifest wav_filename
  audio::AudioClip clip;
  std::string transcript;
};

// Loads every row's audio (resampled to 16 kHz if needed).
std::vector<Utterance> load_dataset(const std::filesystem::path& manifest, unsigned workers = 1);

struct EpochLog {
  std::uint64_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;  // NaN when there is no usable dev data
  double learning_rate = 0.0;
  std::size_t skipped = 0;  // infeasible or uncovered rows this epoch
};

// `epoch=<k> train_loss=<f> dev_loss=<f> lr=<f> skipped=<n>`
std::string format_epoch_log(const EpochLog& log);

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> epochs;
  std::filesystem::path last_checkpoint;
};

// Return false to stop after the current epoch.
using EpochCallback = std::function<bool(const EpochLog&, const TrainState&)>;

// Trains the network with CTC. Epoch 1 visits utterances shortest first,
// later epochs in a seeded shuffle. Each batch applies one optimizer step on
// the batch-mean gradient clipped to grad_clip global norm. A checkpoint is
// written per epoch and the best one (by dev loss, or train loss without dev
// data) is recorded in the `best` marker. n_input and n_output of model_cfg
// are derived from mfcc and alphabet.
// Throws Error{InvalidConfig | AlphabetMismatch | CheckpointIncompatible}.
TrainResult run_training(const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                         const text::Alphabet& alphabet, const features::MfccConfig& mfcc,
                         model::ModelConfig model_cfg, const TrainConfig& cfg, std::ostream& log,
                         const EpochCallback& on_epoch = {});

// Optimizer primitives.
double global_norm(const model::ModelParams& grad);
void scale(model::ModelParams& grad, double factor);
void clip_global_norm(model::ModelParams& grad, double max_norm);
void sgd_step(model::ModelParams& params, const model::ModelParams& grad, double learning_rate);
// `step` is the 1-based index of this update (for bias correction).
void adam_step(model::ModelParams& params, const model::ModelParams& grad, model::ModelParams& m,
               model::ModelParams& v, std::uint64_t step, const TrainConfig& cfg);

struct UtteranceLoss {
  bool feasible = false;
  double loss = 0.0;
  model::ModelParams grad;
};

// Forward + CTC + backward for one utterance.
UtteranceLoss utterance_gradient(const model::ModelParams& params, const model::ModelConfig& cfg,
                                 const Matrix& feats, const text::LabelSequence& labels,
                                 std::optional<model::DropoutKey> dropout = std::nullopt);

}  // namespace asr::train
