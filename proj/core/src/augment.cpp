#include "asr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asr/error.hpp"
#include "asr/rng.hpp"

namespace asr::augment {
namespace {

// Stream slots under one (seed, index, position) key.
enum Draw : std::uint64_t { kGate = 0, kValue = 1, kNoise = 2 };

std::uint64_t draw_key(std::uint64_t seed, std::uint64_t index, std::size_t position, Draw draw) {
  return rng::key({seed, index, position, draw});
}

double parse_number(std::string_view text, std::string_view what) {
  const std::string s(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::SyntaxError, "bad number '" + s + "' for " + std::string(what));
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

std::string_view param_name(Kind kind) {
  switch (kind) {
    case Kind::Gain: return "db";
    case Kind::Noise: return "snr";
    case Kind::Tempo: return "rate";
  }
  return "";
}

Range default_range(Kind kind) {
  switch (kind) {
    case Kind::Gain: return {-6.0, 6.0};
    case Kind::Noise: return {10.0, 30.0};
    case Kind::Tempo: return {0.9, 1.1};
  }
  return {};
}

double rms(const std::vector<float>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

std::string_view kind_name(Kind kind) noexcept {
  switch (kind) {
    case Kind::Gain: return "gain";
    case Kind::Noise: return "noise";
    case Kind::Tempo: return "tempo";
  }
  return "";
}

AugmentSpec parse_augment_spec(std::string_view text) {
  text = trim(text);
  const auto open = text.find('[');
  const std::string_view name = open == std::string_view::npos ? text : text.substr(0, open);
  AugmentSpec spec;
  if (name == "gain") {
    spec.kind = Kind::Gain;
  } else if (name == "noise") {
    spec.kind = Kind::Noise;
  } else if (name == "tempo") {
    spec.kind = Kind::Tempo;
  } else if (name.empty() || name.find_first_of("[]=,:") != std::string_view::npos) {
    throw Error(Errc::SyntaxError, "augmentation spec must start with a kind: '" + std::string(text) + "'");
  } else {
    throw Error(Errc::UnknownKind, "'" + std::string(name) + "' (expected gain, noise or tempo)");
  }
  spec.range = default_range(spec.kind);
  if (open == std::string_view::npos) return spec;
  if (text.back() != ']') throw Error(Errc::SyntaxError, "missing closing ']'");

  std::string_view body = text.substr(open + 1, text.size() - open - 2);
  bool seen_p = false, seen_range = false;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = trim(body.substr(0, comma));
    body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::SyntaxError, "expected key=value, got '" + std::string(item) + "'");
    const std::string_view key = trim(item.substr(0, eq));
    const std::string_view value = trim(item.substr(eq + 1));
    if (key == "p") {
      if (seen_p) throw Error(Errc::SyntaxError, "p given twice");
      seen_p = true;
      spec.probability = parse_number(value, "p");
      if (spec.probability < 0.0 || spec.probability > 1.0) throw Error(Errc::RangeOrderError, "p must lie in [0,1]");
    } else if (key == param_name(spec.kind)) {
      if (seen_range) throw Error(Errc::SyntaxError, std::string(key) + " given twice");
      seen_range = true;
      const auto colon = value.find(':');
      if (colon == std::string_view::npos) {
        spec.range.low = spec.range.high = parse_number(value, key);
      } else {
        spec.range.low = parse_number(value.substr(0, colon), key);
        spec.range.high = parse_number(value.substr(colon + 1), key);
      }
      if (spec.range.low > spec.range.high) {
        throw Error(Errc::RangeOrderError, std::string(key) + " range low > high");
      }
      if (spec.kind == Kind::Tempo && spec.range.low <= 0.0) {
        throw Error(Errc::RangeOrderError, "tempo rate must be positive");
      }
    } else {
      throw Error(Errc::SyntaxError, "unknown parameter '" + std::string(key) + "' for " +
                                         std::string(kind_name(spec.kind)));
    }
  }
  return spec;
}

std::string format_augment_spec(const AugmentSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << kind_name(spec.kind) << "[p=" << spec.probability << "," << param_name(spec.kind) << "=" << spec.range.low
      << ":" << spec.range.high << "]";
  return out.str();
}

bool fires(std::uint64_t seed, std::uint64_t sample_index, std::size_t position, double probability) {
  if (probability <= 0.0) return false;
  rng::CounterStream gate(draw_key(seed, sample_index, position, kGate));
  return gate.uniform() < probability;
}

audio::AudioClip apply_augmentations(const audio::AudioClip& clip, std::span<const AugmentSpec> specs,
                                     std::uint64_t seed, std::uint64_t sample_index) {
  audio::AudioClip out = clip;
  for (std::size_t pos = 0; pos < specs.size(); ++pos) {
    const AugmentSpec& spec = specs[pos];
    if (!fires(seed, sample_index, pos, spec.probability)) continue;
    rng::CounterStream value_stream(draw_key(seed, sample_index, pos, kValue));
    const double value = value_stream.uniform(spec.range.low, spec.range.high);
    switch (spec.kind) {
      case Kind::Gain: {
        const double gain = std::pow(10.0, value / 20.0);
        for (float& s : out.samples) s = static_cast<float>(std::clamp(s * gain, -1.0, 1.0));
        break;
      }
      case Kind::Noise: {
        const double signal = rms(out.samples);
        if (signal == 0.0) break;
        const double sigma = signal / std::pow(10.0, value / 20.0);
        rng::CounterStream noise(draw_key(seed, sample_index, pos, kNoise));
        for (float& s : out.samples) s = static_cast<float>(std::clamp(s + sigma * noise.normal(), -1.0, 1.0));
        break;
      }
      case Kind::Tempo: {
        // Treat the clip as recorded at rate * fs and bring it back to fs.
        const int rate = out.sample_rate_hz;
        const int stretched = std::max(1, static_cast<int>(std::lround(rate * value)));
        audio::AudioClip relabeled = out;
        relabeled.sample_rate_hz = stretched;
        out = audio::resample(relabeled, rate);
        break;
      }
    }
  }
  return out;
}

}  // namespace asr::augment
