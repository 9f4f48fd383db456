#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "asr/features.hpp"
#include "asr/model.hpp"
#include "asr/text.hpp"

namespace asr::train {

constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to resume training or run inference.
struct TrainState {
  model::ModelConfig model_config;
  features::MfccConfig mfcc;
  text::Alphabet alphabet;
  model::ModelParams params;
  model::ModelParams adam_m;
  model::ModelParams adam_v;
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // optimizer steps taken
  std::optional<double> best_loss;
  std::string best_checkpoint;
  std::uint32_t epochs_since_improvement = 0;

  bool operator==(const TrainState&) const = default;
};

// Layout: "ASRC", u32 version, u64 metadata length, JSON metadata, then every
// parameter tensor followed by both Adam moment sets as little-endian f64,
// then a CRC-32 of all preceding bytes.
std::vector<std::uint8_t> serialize_checkpoint(const TrainState& state);
// Throws Error{ChecksumMismatch | VersionUnsupported}.
TrainState deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

std::string checkpoint_name(std::uint64_t epoch);

// Writes <dir>/ckpt-<epoch>.bin and returns its path. Throws Error{IoFailure}.
std::filesystem::path save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
TrainState load_checkpoint(const std::filesystem::path& path);

// The `best` marker file names the best checkpoint in a directory.
void write_best_marker(const std::filesystem::path& dir, const std::string& name);
std::optional<std::string> read_best_marker(const std::filesystem::path& dir);

// A directory resolves through its best marker; a file is returned as is.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& path);

}  // namespace asr::train
