#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "asr/audio.hpp"

// Synthetic tone corpora: every character (space included) is rendered as its
// own pure tone, separated by short silences, so a small network can learn
// the mapping quickly.
namespace asr::fixture {

struct SynthOptions {
  int sample_rate_hz = audio::kCanonicalRate;
  double tone_ms = 160.0;
  double gap_ms = 60.0;
  double edge_ms = 100.0;  // silence before the first and after the last tone
  double amplitude = 0.5;
  double dither = 1e-3;  // deterministic noise floor
  std::uint64_t seed = 7;
};

// Lowercase letters, space and apostrophe each get a distinct frequency.
double tone_frequency(char32_t c);

audio::AudioClip synthesize(std::string_view transcript, const SynthOptions& options = {});

// Five short transcripts for memorization tests.
const std::vector<std::string>& overfit_transcripts();
// Twenty transcripts for end-to-end runs.
const std::vector<std::string>& smoke_transcripts();

// Writes WAV files below <dir>/audio (a mix of 48 kHz mono, 48 kHz stereo
// and 44.1 kHz mono, 16-bit) plus <dir>/index.tsv with capitalized,
// punctuated transcripts. Returns the index path.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const std::vector<std::string>& transcripts,
                                   std::uint64_t seed = 7);

}  // namespace asr::fixture
