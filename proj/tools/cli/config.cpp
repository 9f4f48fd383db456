#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "asr/augment.hpp"
#include "asr/error.hpp"
#include "json.hpp"

namespace asr::cli {
namespace {

using Json = nlohmann::json;
using Strings = std::vector<std::string>;

std::string type_name(ValueType t) {
  switch (t) {
    case ValueType::Integer: return "integer";
    case ValueType::Real: return "real";
    case ValueType::Boolean: return "boolean";
    case ValueType::String: return "string";
    case ValueType::StringList: return "list of strings";
  }
  return "?";
}

bool holds(const Value& v, ValueType t) {
  switch (t) {
    case ValueType::Integer: return std::holds_alternative<std::int64_t>(v);
    case ValueType::Real: return std::holds_alternative<double>(v);
    case ValueType::Boolean: return std::holds_alternative<bool>(v);
    case ValueType::String: return std::holds_alternative<std::string>(v);
    case ValueType::StringList: return std::holds_alternative<Strings>(v);
  }
  return false;
}

[[noreturn]] void mismatch(std::string_view key, ValueType want, std::string_view got) {
  throw Error(Errc::TypeMismatch,
              "key '" + std::string(key) + "' expects " + type_name(want) + ", got " + std::string(got));
}

Value from_json(std::string_view key, ValueType type, const Json& j) {
  switch (type) {
    case ValueType::Integer:
      if (j.is_number_integer()) return j.get<std::int64_t>();
      break;
    case ValueType::Real:
      if (j.is_number()) return j.get<double>();
      break;
    case ValueType::Boolean:
      if (j.is_boolean()) return j.get<bool>();
      break;
    case ValueType::String:
      if (j.is_string()) return j.get<std::string>();
      break;
    case ValueType::StringList:
      if (j.is_array()) {
        Strings out;
        for (const auto& item : j) {
          if (!item.is_string()) mismatch(key, type, "an array element of type " + std::string(item.type_name()));
          out.push_back(item.get<std::string>());
        }
        return out;
      }
      break;
  }
  mismatch(key, type, j.type_name());
}

void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, const Json*>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    // An object is a group unless the key itself is registered.
    if (it.value().is_object() && find_key(name) == nullptr) {
      flatten(it.value(), name, out);
    } else {
      out.emplace_back(name, &it.value());
    }
  }
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = {
      {"corpus", ValueType::String, std::string(), "source corpus root (prepare)"},
      {"index", ValueType::String, std::string(), "transcript index, one `id<TAB>text` per line (prepare)"},
      {"out", ValueType::String, std::string("."), "output directory"},
      {"split", ValueType::String, std::string("0.8,0.1,0.1"), "train,dev,test fractions"},
      {"seed", ValueType::Integer, std::int64_t{42}, "seed for splits, init, shuffling and augmentation"},
      {"workers", ValueType::Integer, std::int64_t{1}, "worker threads"},
      {"train_manifest", ValueType::String, std::string(), "default <out>/train.csv"},
      {"dev_manifest", ValueType::String, std::string(), "default <out>/dev.csv"},
      {"test_manifest", ValueType::String, std::string(), "default <out>/test.csv"},
      {"alphabet", ValueType::String, std::string(), "default <out>/alphabet.txt"},
      {"checkpoint_dir", ValueType::String, std::string(), "default <out>/checkpoints"},
      {"checkpoint", ValueType::String, std::string(), "checkpoint file or directory; default checkpoint_dir"},
      {"load_checkpoint", ValueType::String, std::string(), "resume (or fine-tune) from this checkpoint"},
      {"fine_tune", ValueType::Boolean, false, "load weights only and restart counters"},
      {"epochs", ValueType::Integer, std::int64_t{30}, "training epochs"},
      {"batch_size", ValueType::Integer, std::int64_t{8}, "utterances per optimizer step"},
      {"learning_rate", ValueType::Real, 1e-3, "step size"},
      {"optimizer", ValueType::String, std::string("adam"), "adam or sgd"},
      {"beta1", ValueType::Real, 0.9, "Adam first moment decay"},
      {"beta2", ValueType::Real, 0.999, "Adam second moment decay"},
      {"epsilon", ValueType::Real, 1e-8, "Adam epsilon"},
      {"grad_clip", ValueType::Real, 5.0, "global gradient norm limit (<= 0 disables)"},
      {"early_stop_patience", ValueType::Integer, std::int64_t{0}, "epochs without improvement before stopping (0 = off)"},
      {"augment", ValueType::StringList, Strings{}, "augmentation specs, e.g. gain[p=0.5,db=-6:6]"},
      {"mfcc.window_ms", ValueType::Real, 32.0, "analysis window"},
      {"mfcc.step_ms", ValueType::Real, 20.0, "frame step"},
      {"mfcc.n_fft", ValueType::Integer, std::int64_t{512}, "FFT size (power of two)"},
      {"mfcc.n_mels", ValueType::Integer, std::int64_t{40}, "mel filters"},
      {"mfcc.n_coeffs", ValueType::Integer, std::int64_t{26}, "cepstral coefficients kept"},
      {"mfcc.preemphasis", ValueType::Real, 0.97, "pre-emphasis coefficient"},
      {"mfcc.log_floor", ValueType::Real, 1e-10, "floor added before the log"},
      {"mfcc.context", ValueType::Integer, std::int64_t{0}, "frames stacked on each side"},
      {"model.n_hidden", ValueType::Integer, std::int64_t{128}, "hidden width"},
      {"model.relu_clip", ValueType::Real, 20.0, "clipped ReLU ceiling"},
      {"model.dropout", ValueType::Real, 0.0, "dropout on dense hidden layers"},
      {"decoder", ValueType::String, std::string("greedy"), "greedy or beam"},
      {"beam.width", ValueType::Integer, std::int64_t{32}, "beam width"},
      {"beam.lm_weight", ValueType::Real, 0.75, "LM weight (alpha)"},
      {"beam.insertion_bonus", ValueType::Real, 1.0, "per-character bonus (beta)"},
      {"lm.path", ValueType::String, std::string(), "n-gram model file; default <out>/lm.txt for lm-train"},
      {"lm.order", ValueType::Integer, std::int64_t{5}, "n-gram order"},
      {"lm.k", ValueType::Real, 0.5, "add-k smoothing constant"},
      {"manifest", ValueType::String, std::string(), "manifest to evaluate or validate; default test_manifest"},
      {"report_dir", ValueType::String, std::string(), "evaluation output; default <out>/eval"},
      {"wav", ValueType::String, std::string(), "audio file to transcribe"},
  };
  return keys;
}

const KeyInfo* find_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string format_value(const Value& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os << v;
          return os.str();
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v.empty() ? "\"\"" : v;
        } else {
          std::string out = "[";
          for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
          return out + "]";
        }
      },
      value);
}

PipelineConfig::PipelineConfig() {
  for (const auto& k : config_keys()) values_.emplace(k.name, k.fallback);
}

void PipelineConfig::set(std::string_view key, Value value) {
  const KeyInfo* info = find_key(key);
  if (info == nullptr) throw Error(Errc::UnknownKey, "unknown configuration key '" + std::string(key) + "'");
  // Integers are acceptable where a real is expected.
  if (info->type == ValueType::Real && std::holds_alternative<std::int64_t>(value)) {
    value = static_cast<double>(std::get<std::int64_t>(value));
  }
  if (!holds(value, info->type)) mismatch(key, info->type, "a different type");
  values_.find(key)->second = std::move(value);
}

void PipelineConfig::set_from_text(std::string_view key, std::string_view text) {
  const KeyInfo* info = find_key(key);
  if (info == nullptr) throw Error(Errc::UnknownKey, "unknown configuration key '" + std::string(key) + "'");
  const std::string shown = "'" + std::string(text) + "'";
  switch (info->type) {
    case ValueType::Integer: {
      std::int64_t v = 0;
      if (!parse_number(text, v)) mismatch(key, info->type, shown);
      set(key, v);
      return;
    }
    case ValueType::Real: {
      double v = 0.0;
      if (!parse_number(text, v)) mismatch(key, info->type, shown);
      set(key, v);
      return;
    }
    case ValueType::Boolean:
      if (text == "true" || text == "1") {
        set(key, true);
      } else if (text == "false" || text == "0") {
        set(key, false);
      } else {
        mismatch(key, info->type, shown);
      }
      return;
    case ValueType::String:
      set(key, std::string(text));
      return;
    case ValueType::StringList: {
      auto list = std::get<Strings>(get(key));
      list.emplace_back(text);
      set(key, std::move(list));
      return;
    }
  }
}

void PipelineConfig::merge_json(std::string_view document) {
  Json j;
  try {
    j = Json::parse(document);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ParseError, "config must be a JSON object");
  std::vector<std::pair<std::string, const Json*>> flat;
  flatten(j, "", flat);
  for (const auto& [name, value] : flat) {
    const KeyInfo* info = find_key(name);
    if (info == nullptr) throw Error(Errc::UnknownKey, "unknown configuration key '" + name + "'");
    set(name, from_json(name, info->type, *value));
  }
}

const Value& PipelineConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::UnknownKey, "unknown configuration key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t PipelineConfig::integer(std::string_view key) const { return std::get<std::int64_t>(get(key)); }
double PipelineConfig::real(std::string_view key) const { return std::get<double>(get(key)); }
bool PipelineConfig::boolean(std::string_view key) const { return std::get<bool>(get(key)); }
const std::string& PipelineConfig::string(std::string_view key) const { return std::get<std::string>(get(key)); }
const Strings& PipelineConfig::list(std::string_view key) const { return std::get<Strings>(get(key)); }

std::filesystem::path PipelineConfig::out_dir() const { return string("out"); }

std::filesystem::path PipelineConfig::path(std::string_view key) const {
  const std::string& value = string(key);
  if (!value.empty()) return value;
  const auto out = out_dir();
  if (key == "train_manifest") return out / "train.csv";
  if (key == "dev_manifest") return out / "dev.csv";
  if (key == "test_manifest") return out / "test.csv";
  if (key == "alphabet") return out / "alphabet.txt";
  if (key == "checkpoint_dir") return out / "checkpoints";
  if (key == "checkpoint") return path("checkpoint_dir");
  if (key == "manifest") return path("test_manifest");
  if (key == "report_dir") return out / "eval";
  if (key == "lm.path") return out / "lm.txt";
  return {};
}

features::MfccConfig PipelineConfig::mfcc() const {
  features::MfccConfig c;
  c.window_ms = real("mfcc.window_ms");
  c.step_ms = real("mfcc.step_ms");
  c.n_fft = static_cast<int>(integer("mfcc.n_fft"));
  c.n_mels = static_cast<int>(integer("mfcc.n_mels"));
  c.n_coeffs = static_cast<int>(integer("mfcc.n_coeffs"));
  c.preemphasis = real("mfcc.preemphasis");
  c.log_floor = real("mfcc.log_floor");
  c.context = static_cast<int>(integer("mfcc.context"));
  return c;
}

model::ModelConfig PipelineConfig::model() const {
  model::ModelConfig c;
  c.n_hidden = static_cast<int>(integer("model.n_hidden"));
  c.relu_clip = real("model.relu_clip");
  c.dropout = real("model.dropout");
  c.seed = seed();
  return c;
}

train::TrainConfig PipelineConfig::train() const {
  train::TrainConfig c;
  c.epochs = static_cast<int>(integer("epochs"));
  c.batch_size = static_cast<int>(integer("batch_size"));
  c.learning_rate = real("learning_rate");
  const std::string& opt = string("optimizer");
  if (opt == "adam") {
    c.optimizer = train::Optimizer::Adam;
  } else if (opt == "sgd") {
    c.optimizer = train::Optimizer::Sgd;
  } else {
    throw Error(Errc::InvalidConfig, "optimizer must be adam or sgd, got '" + opt + "'");
  }
  c.beta1 = real("beta1");
  c.beta2 = real("beta2");
  c.epsilon = real("epsilon");
  c.grad_clip = real("grad_clip");
  c.seed = seed();
  c.checkpoint_dir = path("checkpoint_dir");
  if (!string("load_checkpoint").empty()) c.load_checkpoint = string("load_checkpoint");
  c.fine_tune = boolean("fine_tune");
  if (integer("early_stop_patience") > 0) c.early_stop_patience = static_cast<int>(integer("early_stop_patience"));
  c.workers = workers();
  for (const auto& spec : list("augment")) c.augments.push_back(augment::parse_augment_spec(spec));
  return c;
}

manifest::SplitSpec PipelineConfig::split() const { return manifest::parse_split(string("split"), seed()); }

ctc::BeamConfig PipelineConfig::beam() const {
  ctc::BeamConfig c;
  c.beam_width = static_cast<int>(integer("beam.width"));
  c.lm_weight = real("beam.lm_weight");
  c.insertion_bonus = real("beam.insertion_bonus");
  if (c.beam_width < 1) throw Error(Errc::InvalidConfig, "beam.width must be at least 1");
  return c;
}

std::uint64_t PipelineConfig::seed() const {
  const auto s = integer("seed");
  if (s < 0) throw Error(Errc::InvalidConfig, "seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

unsigned PipelineConfig::workers() const {
  const auto w = integer("workers");
  if (w < 1 || w > 1024) throw Error(Errc::InvalidConfig, "workers must be in [1, 1024]");
  return static_cast<unsigned>(w);
}

std::string PipelineConfig::to_json() const {
  Json j = Json::object();
  for (const auto& [name, value] : values_) {
    std::visit([&](const auto& v) { j[name] = v; }, value);
  }
  return j.dump(2);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  PipelineConfig cfg;
  cfg.merge_json(buf.str());
  return cfg;
}

}  // namespace asr::cli
