#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace asr::audio {

constexpr int kCanonicalRate = 16000;

// Mono audio. Samples are in [-1, 1]; the rate is positive.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  bool operator==(const AudioClip&) const = default;
};

// Layout of a WAV stream as declared by its fmt chunk.
struct WavInfo {
  int format_tag = 0;  // 1 = PCM, 3 = IEEE float
  int channels = 0;
  int sample_rate_hz = 0;
  int bits_per_sample = 0;
  std::uint32_t data_bytes = 0;
};

// Parses RIFF/WAVE bytes. Integer PCM (8/16/24/32 bit) and 32/64-bit float are
// accepted; multichannel audio is mixed down by the per-frame channel mean and
// float input is clamped to [-1, 1].
// Throws Error{MalformedHeader | UnsupportedEncoding | TruncatedData}.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

// Header-only inspection; same error contract as decode_wav.
WavInfo inspect_wav(std::span<const std::uint8_t> bytes);

// 16-bit little-endian PCM mono WAV with the canonical 44-byte header.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Polyphase windowed-sinc resampler (Kaiser beta 8.6, 64 taps per phase,
// cutoff at 0.45 of the lower sample rate). Output length is
// round(n * target / source); equal rates return the clip unchanged.
AudioClip resample(const AudioClip& clip, int target_rate_hz);

// Decode + mixdown + resample to 16 kHz.
AudioClip to_canonical(const AudioClip& clip);

}  // namespace asr::audio
