#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "asr/ctc.hpp"
#include "asr/features.hpp"
#include "asr/manifest.hpp"
#include "asr/model.hpp"
#include "asr/train.hpp"

namespace asr::cli {

enum class ValueType { Integer, Real, Boolean, String, StringList };

using Value = std::variant<std::int64_t, double, bool, std::string, std::vector<std::string>>;

struct KeyInfo {
  std::string name;
  ValueType type;
  Value fallback;
  std::string help;
};

// Every tunable, in display order. Names are dotted for grouped settings.
const std::vector<KeyInfo>& config_keys();
const KeyInfo* find_key(std::string_view name);
std::string format_value(const Value& value);

// Flat dotted-key configuration. Keys are validated on every write.
class PipelineConfig {
public:
  PipelineConfig();

  // Throws Error{UnknownKey | TypeMismatch}.
  void set(std::string_view key, Value value);
  // Parses the textual form of a flag. Throws Error{UnknownKey | TypeMismatch}.
  void set_from_text(std::string_view key, std::string_view text);
  // Merges a JSON object; nested objects map to dotted keys.
  // Throws Error{ParseError | UnknownKey | TypeMismatch}.
  void merge_json(std::string_view document);

  const Value& get(std::string_view key) const;
  std::int64_t integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool boolean(std::string_view key) const;
  const std::string& string(std::string_view key) const;
  const std::vector<std::string>& list(std::string_view key) const;

  std::filesystem::path out_dir() const;
  // Path-valued keys default to a location below the output directory.
  std::filesystem::path path(std::string_view key) const;

  features::MfccConfig mfcc() const;
  model::ModelConfig model() const;
  train::TrainConfig train() const;
  manifest::SplitSpec split() const;
  ctc::BeamConfig beam() const;  // lm left null
  std::uint64_t seed() const;
  unsigned workers() const;

  std::string to_json() const;

private:
  std::map<std::string, Value, std::less<>> values_;
};

// Strict parse of a JSON file over the defaults.
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace asr::cli
