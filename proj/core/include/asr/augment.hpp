#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "asr/audio.hpp"

namespace asr::augment {

enum class Kind { Gain, Noise, Tempo };

std::string_view kind_name(Kind kind) noexcept;

struct Range {
  double low = 0.0;
  double high = 0.0;
  bool operator==(const Range&) const = default;
};

// gain: amplitude offset in dB; noise: SNR in dB; tempo: rate factor.
struct AugmentSpec {
  Kind kind = Kind::Gain;
  double probability = 1.0;
  Range range;

  bool operator==(const AugmentSpec&) const = default;
};

// Grammar: kind[p=<real>,<param>=<low>:<high>] with param db|snr|rate.
// Omitted p defaults to 1.0, omitted ranges to gain -6:6, noise 10:30,
// tempo 0.9:1.1. A single value "db=-3" means "db=-3:-3".
// Throws Error{SyntaxError | UnknownKind | RangeOrderError}.
AugmentSpec parse_augment_spec(std::string_view text);
std::string format_augment_spec(const AugmentSpec& spec);

// Whether spec `position` fires for (seed, sample_index).
bool fires(std::uint64_t seed, std::uint64_t sample_index, std::size_t position, double probability);

// Applies specs in order, each gated independently by its probability. Every
// random draw is a pure function of (seed, sample_index, spec position).
audio::AudioClip apply_augmentations(const audio::AudioClip& clip, std::span<const AugmentSpec> specs,
                                     std::uint64_t seed, std::uint64_t sample_index);

}  // namespace asr::augment
