#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "asr/audio.hpp"
#include "asr/matrix.hpp"

namespace asr::features {

struct MfccConfig {
  double window_ms = 32.0;
  double step_ms = 20.0;
  int n_fft = 512;
  int n_mels = 40;
  int n_coeffs = 26;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  // Neighbouring frames stacked on each side before the network (0 = none).
  int context = 0;

  int window_samples(int sample_rate_hz) const;
  int step_samples(int sample_rate_hz) const;
  // Width of one network input row.
  int input_width() const { return n_coeffs * (2 * context + 1); }
  // Throws Error{DegenerateConfig}.
  void validate(int sample_rate_hz) const;

  bool operator==(const MfccConfig&) const = default;
};

// T x n_coeffs (or T x input_width after stacking).
struct FeatureMatrix {
  Matrix frames;
  double frame_step_ms = 20.0;
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels + 2 edge frequencies (Hz) equally spaced in mel between 0 and Nyquist.
std::vector<double> mel_edge_frequencies(const MfccConfig& cfg, int sample_rate_hz);

// n_mels x (n_fft/2 + 1) triangular filters. Throws Error{DegenerateConfig}.
Matrix build_mel_filterbank(const MfccConfig& cfg, int sample_rate_hz);

// n x n orthonormal DCT-II basis (row k = coefficient k).
Matrix dct2_matrix(std::size_t n);

std::size_t frame_count(std::size_t n_samples, const MfccConfig& cfg, int sample_rate_hz);

// Immutable precomputed tables; share freely across threads.
class MfccPlan {
public:
  MfccPlan(const MfccConfig& cfg, int sample_rate_hz);

  const MfccConfig& config() const noexcept { return cfg_; }
  int sample_rate_hz() const noexcept { return rate_; }
  const Matrix& filterbank() const noexcept { return filterbank_; }

  // T x n_mels linear filterbank energies (before the log).
  Matrix mel_energies(const audio::AudioClip& clip) const;
  // Throws Error{TooShort} if the clip is shorter than one window.
  FeatureMatrix compute(const audio::AudioClip& clip) const;

private:
  MfccConfig cfg_;
  int rate_;
  std::vector<double> window_;
  Matrix filterbank_;
  Matrix dct_;
};

FeatureMatrix compute_mfcc(const audio::AudioClip& clip, const MfccConfig& cfg);

// Concatenate each frame with its +/-k neighbours, zero padded at the edges.
FeatureMatrix stack_context(const FeatureMatrix& feats, int k);

// Debug dump: "MFC1", int32 T, int32 n_coeffs, then T*n_coeffs float32, all LE.
void write_feature_dump(const std::filesystem::path& path, const FeatureMatrix& feats);
FeatureMatrix read_feature_dump(const std::filesystem::path& path);

}  // namespace asr::features
