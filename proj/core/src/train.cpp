#include "asr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "asr/ctc.hpp"
#include "asr/error.hpp"
#include "asr/manifest.hpp"
#include "asr/parallel.hpp"
#include "asr/rng.hpp"

namespace fs = std::filesystem;

namespace asr::train {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kDropoutStream = 0x44524F50ULL;

struct Sample {
  std::size_t index = 0;  // row in the dataset
  text::LabelSequence labels;
  std::optional<Matrix> feats;
};

void for_each_pair(model::ModelParams& a, const model::ModelParams& b, auto&& fn) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    auto& da = ta[i]->data;
    const auto& db = tb[i]->data;
    for (std::size_t j = 0; j < da.size(); ++j) fn(da[j], db[j]);
  }
}

std::vector<std::size_t> epoch_order(const std::vector<Sample>& samples, const std::vector<Utterance>& data,
                                     std::uint64_t epoch, std::uint64_t seed) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  if (epoch == 1) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data[samples[a].index].clip.samples.size() < data[samples[b].index].clip.samples.size();
    });
    return order;
  }
  rng::CounterStream stream(rng::key({seed, epoch, kShuffleStream}));
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::optional<Matrix> try_features(const features::MfccPlan& plan, const audio::AudioClip& clip) {
  try {
    return plan.compute(clip).frames;
  } catch (const Error& e) {
    if (e.code() == Errc::TooShort) return std::nullopt;
    throw;
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Errc::InvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw Error(Errc::InvalidConfig, "Adam needs beta1, beta2 in [0,1) and epsilon > 0");
  }
  if (early_stop_patience && *early_stop_patience < 1) {
    throw Error(Errc::InvalidConfig, "early_stop_patience must be >= 1");
  }
}

std::vector<Utterance> load_dataset(const fs::path& manifest_path, unsigned workers) {
  const auto rows = manifest::read_manifest(manifest_path);
  std::vector<Utterance> out(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    out[i].name = rows[i].wav_filename;
    out[i].transcript = rows[i].transcript;
    out[i].clip = audio::to_canonical(audio::read_wav(manifest::resolve_wav(manifest_path, rows[i])));
  });
  return out;
}

std::string format_epoch_log(const EpochLog& log) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%llu train_loss=%.6f dev_loss=%.6f lr=%g skipped=%zu",
                static_cast<unsigned long long>(log.epoch), log.train_loss, log.dev_loss, log.learning_rate,
                log.skipped);
  return buf;
}

double global_norm(const model::ModelParams& grad) {
  double acc = 0.0;
  for (const Matrix* m : grad.tensors()) {
    for (double v : m->data) acc += v * v;
  }
  return std::sqrt(acc);
}

void scale(model::ModelParams& grad, double factor) {
  for (Matrix* m : grad.tensors()) {
    for (double& v : m->data) v *= factor;
  }
}

void clip_global_norm(model::ModelParams& grad, double max_norm) {
  if (!(max_norm > 0.0)) return;
  const double norm = global_norm(grad);
  if (norm > max_norm) scale(grad, max_norm / norm);
}

void sgd_step(model::ModelParams& params, const model::ModelParams& grad, double learning_rate) {
  for_each_pair(params, grad, [&](double& p, double g) { p -= learning_rate * g; });
}

void adam_step(model::ModelParams& params, const model::ModelParams& grad, model::ModelParams& m,
               model::ModelParams& v, std::uint64_t step, const TrainConfig& cfg) {
  const double t = static_cast<double>(step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  auto tp = params.tensors();
  auto tm = m.tensors();
  auto tv = v.tensors();
  auto tg = grad.tensors();
  for (std::size_t i = 0; i < tp.size(); ++i) {
    auto& p = tp[i]->data;
    auto& mm = tm[i]->data;
    auto& vv = tv[i]->data;
    const auto& g = tg[i]->data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      mm[j] = cfg.beta1 * mm[j] + (1.0 - cfg.beta1) * g[j];
      vv[j] = cfg.beta2 * vv[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = mm[j] / correct1;
      const double v_hat = vv[j] / correct2;
      p[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

UtteranceLoss utterance_gradient(const model::ModelParams& params, const model::ModelConfig& cfg,
                                 const Matrix& feats, const text::LabelSequence& labels,
                                 std::optional<model::DropoutKey> dropout) {
  UtteranceLoss out;
  const auto fwd = model::forward(params, cfg, feats, dropout);
  ctc::CtcResult ctc_result;
  try {
    ctc_result = ctc::ctc_loss_grad(fwd.log_probs, labels, cfg.n_output - 1);
  } catch (const Error& e) {
    if (e.code() == Errc::Infeasible) return out;
    throw;
  }
  out.feasible = true;
  out.loss = ctc_result.loss;
  out.grad = model::backward(params, cfg, fwd.cache, ctc_result.grad);
  return out;
}

TrainResult run_training(const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                         const text::Alphabet& alphabet, const features::MfccConfig& mfcc,
                         model::ModelConfig model_cfg, const TrainConfig& cfg, std::ostream& log,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  mfcc.validate(audio::kCanonicalRate);

  TrainState state;
  if (cfg.load_checkpoint) {
    TrainState loaded = load_checkpoint(resolve_checkpoint(*cfg.load_checkpoint));
    model_cfg.n_input = mfcc.input_width();
    model_cfg.n_output = static_cast<int>(loaded.alphabet.size()) + 1;
    const auto& have = loaded.model_config;
    if (have.n_input != model_cfg.n_input || have.n_hidden != model_cfg.n_hidden ||
        have.n_output != model_cfg.n_output) {
      throw Error(Errc::CheckpointIncompatible,
                  "checkpoint is " + std::to_string(have.n_input) + "/" + std::to_string(have.n_hidden) + "/" +
                      std::to_string(have.n_output) + " (input/hidden/output), run is configured for " +
                      std::to_string(model_cfg.n_input) + "/" + std::to_string(model_cfg.n_hidden) + "/" +
                      std::to_string(model_cfg.n_output));
    }
    if (!(loaded.mfcc == mfcc)) throw Error(Errc::CheckpointIncompatible, "checkpoint MFCC settings differ");
    if (cfg.fine_tune) {
      state.model_config = model_cfg;
      state.mfcc = mfcc;
      state.alphabet = loaded.alphabet;
      state.params = std::move(loaded.params);
      state.adam_m = model::zeros(model_cfg);
      state.adam_v = model::zeros(model_cfg);
    } else {
      state = std::move(loaded);
    }
  } else {
    model_cfg.n_input = mfcc.input_width();
    model_cfg.n_output = static_cast<int>(alphabet.size()) + 1;
    model_cfg.validate();
    state.model_config = model_cfg;
    state.mfcc = mfcc;
    state.alphabet = alphabet;
    state.params = model::init_model(model_cfg);
    state.adam_m = model::zeros(model_cfg);
    state.adam_v = model::zeros(model_cfg);
  }
  const model::ModelConfig& net = state.model_config;
  const text::Alphabet& symbols = state.alphabet;
  const features::MfccPlan plan(state.mfcc, audio::kCanonicalRate);
  const bool augmenting = !cfg.augments.empty();

  // Label encoding and alphabet coverage.
  auto prepare = [&](const std::vector<Utterance>& data, bool cache, std::size_t& uncovered) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!symbols.covers(data[i].transcript)) {
        log << "SKIP " << data[i].name << " transcript not covered by alphabet\n";
        ++uncovered;
        continue;
      }
      samples.push_back({i, text::encode_labels(data[i].transcript, symbols), std::nullopt});
    }
    if (cache) {
      parallel_for(samples.size(), cfg.workers, [&](std::size_t i) {
        samples[i].feats = try_features(plan, data[samples[i].index].clip);
      });
    }
    return samples;
  };
  std::size_t uncovered_train = 0, uncovered_dev = 0;
  std::vector<Sample> train_samples = prepare(train_set, !augmenting, uncovered_train);
  std::vector<Sample> dev_samples = prepare(dev_set, true, uncovered_dev);
  if (train_samples.empty()) {
    if (uncovered_train > 0) throw Error(Errc::AlphabetMismatch, "no training transcript is covered by the alphabet");
    throw Error(Errc::InvalidConfig, "training set is empty");
  }

  TrainResult result;
  const std::uint64_t n_rows = train_set.size();
  for (std::uint64_t epoch = state.epoch + 1; epoch <= static_cast<std::uint64_t>(cfg.epochs); ++epoch) {
    const auto order = epoch_order(train_samples, train_set, epoch, cfg.seed);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t skipped = uncovered_train;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<UtteranceLoss> parts(end - start);
      const std::uint64_t step_key = state.step;
      parallel_for(parts.size(), cfg.workers, [&](std::size_t i) {
        const Sample& s = train_samples[order[start + i]];
        std::optional<Matrix> feats = s.feats;
        if (augmenting) {
          const auto clip = augment::apply_augmentations(train_set[s.index].clip, cfg.augments, cfg.seed,
                                                         (epoch - 1) * n_rows + s.index);
          feats = try_features(plan, clip);
        }
        if (!feats) return;
        std::optional<model::DropoutKey> dropout;
        if (net.dropout > 0.0) dropout = model::DropoutKey{net.dropout, rng::key({cfg.seed, kDropoutStream, step_key, s.index})};
        parts[i] = utterance_gradient(state.params, net, *feats, s.labels, dropout);
      });

      model::ModelParams batch_grad = model::zeros(net);
      std::size_t used = 0;
      for (auto& part : parts) {
        if (!part.feasible) {
          ++skipped;
          continue;
        }
        for_each_pair(batch_grad, part.grad, [](double& acc, double g) { acc += g; });
        loss_sum += part.loss;
        ++loss_count;
        ++used;
      }
      if (used == 0) continue;
      scale(batch_grad, 1.0 / static_cast<double>(used));
      clip_global_norm(batch_grad, cfg.grad_clip);
      ++state.step;
      if (cfg.optimizer == Optimizer::Adam) {
        adam_step(state.params, batch_grad, state.adam_m, state.adam_v, state.step, cfg);
      } else {
        sgd_step(state.params, batch_grad, cfg.learning_rate);
      }
    }

    std::vector<std::optional<double>> dev_losses(dev_samples.size());
    parallel_for(dev_samples.size(), cfg.workers, [&](std::size_t i) {
      const Sample& s = dev_samples[i];
      if (!s.feats) return;
      const auto fwd = model::forward(state.params, net, *s.feats);
      try {
        dev_losses[i] = ctc::ctc_loss_grad(fwd.log_probs, s.labels, net.n_output - 1).loss;
      } catch (const Error& e) {
        if (e.code() != Errc::Infeasible) throw;
      }
    });
    double dev_sum = 0.0;
    std::size_t dev_count = 0;
    for (const auto& l : dev_losses) {
      if (l) {
        dev_sum += *l;
        ++dev_count;
      }
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN();
    entry.dev_loss = dev_count ? dev_sum / static_cast<double>(dev_count) : std::numeric_limits<double>::quiet_NaN();
    entry.learning_rate = cfg.learning_rate;
    entry.skipped = skipped;
    log << format_epoch_log(entry) << "\n";
    log.flush();

    state.epoch = epoch;
    const double tracked = dev_count ? entry.dev_loss : entry.train_loss;
    const bool improved = std::isfinite(tracked) && (!state.best_loss || tracked < *state.best_loss);
    if (improved) {
      state.best_loss = tracked;
      state.best_checkpoint = checkpoint_name(epoch);
      state.epochs_since_improvement = 0;
    } else {
      ++state.epochs_since_improvement;
    }
    if (!cfg.checkpoint_dir.empty()) {
      result.last_checkpoint = save_checkpoint(state, cfg.checkpoint_dir);
      if (improved) write_best_marker(cfg.checkpoint_dir, state.best_checkpoint);
    }
    result.epochs.push_back(entry);

    if (on_epoch && !on_epoch(entry, state)) break;
    if (cfg.early_stop_patience && state.epochs_since_improvement >= static_cast<std::uint32_t>(*cfg.early_stop_patience)) {
      log << "early stop: no improvement for " << state.epochs_since_improvement << " epochs\n";
      break;
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace asr::train
