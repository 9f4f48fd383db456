#include "asr/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "asr/error.hpp"
#include "asr/fft.hpp"

namespace asr::features {

int MfccConfig::window_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
}

int MfccConfig::step_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(step_ms * sample_rate_hz / 1000.0));
}

void MfccConfig::validate(int sample_rate_hz) const {
  if (sample_rate_hz <= 0) throw Error(Errc::DegenerateConfig, "sample rate must be positive");
  if (!(step_ms > 0.0) || step_ms > window_ms) {
    throw Error(Errc::DegenerateConfig, "need 0 < step_ms <= window_ms");
  }
  if (step_samples(sample_rate_hz) < 1) throw Error(Errc::DegenerateConfig, "step shorter than one sample");
  if (n_fft < 2 || !fft::is_power_of_two(static_cast<std::size_t>(n_fft))) {
    throw Error(Errc::DegenerateConfig, "n_fft must be a power of two");
  }
  if (n_fft < window_samples(sample_rate_hz)) throw Error(Errc::DegenerateConfig, "n_fft shorter than window");
  if (n_mels < 1 || n_coeffs < 1 || n_coeffs > n_mels) {
    throw Error(Errc::DegenerateConfig, "need 1 <= n_coeffs <= n_mels");
  }
  if (!(log_floor > 0.0)) throw Error(Errc::DegenerateConfig, "log_floor must be positive");
  if (context < 0) throw Error(Errc::DegenerateConfig, "context must be non-negative");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_edge_frequencies(const MfccConfig& cfg, int sample_rate_hz) {
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  const auto points = static_cast<std::size_t>(cfg.n_mels + 2);
  std::vector<double> hz(points);
  for (std::size_t i = 0; i < points; ++i) {
    hz[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return hz;
}

Matrix build_mel_filterbank(const MfccConfig& cfg, int sample_rate_hz) {
  cfg.validate(sample_rate_hz);
  const auto edges = mel_edge_frequencies(cfg, sample_rate_hz);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate_hz) / cfg.n_fft;

  long previous = -1;
  for (double f : edges) {
    const long bin = std::lround(f / bin_hz);
    if (bin <= previous) {
      throw Error(Errc::DegenerateConfig, "mel points collapse onto the same FFT bin; lower n_mels or raise n_fft");
    }
    previous = bin;
  }

  Matrix bank(static_cast<std::size_t>(cfg.n_mels), bins);
  for (std::size_t m = 0; m < bank.rows; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - lo) / (centre - lo);
      const double fall = (hi - f) / (hi - centre);
      bank(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return bank;
}

Matrix dct2_matrix(std::size_t n) {
  Matrix d(n, n);
  const double n_d = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_d) : std::sqrt(2.0 / n_d);
    for (std::size_t i = 0; i < n; ++i) {
      d(k, i) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                 (2.0 * n_d));
    }
  }
  return d;
}

std::size_t frame_count(std::size_t n_samples, const MfccConfig& cfg, int sample_rate_hz) {
  const auto window = static_cast<std::size_t>(cfg.window_samples(sample_rate_hz));
  const auto step = static_cast<std::size_t>(cfg.step_samples(sample_rate_hz));
  if (n_samples < window) return 0;
  return 1 + (n_samples - window) / step;
}

MfccPlan::MfccPlan(const MfccConfig& cfg, int sample_rate_hz)
    : cfg_(cfg),
      rate_(sample_rate_hz),
      filterbank_(build_mel_filterbank(cfg, sample_rate_hz)),
      dct_(dct2_matrix(static_cast<std::size_t>(cfg.n_mels))) {
  const auto n = static_cast<std::size_t>(cfg.window_samples(sample_rate_hz));
  window_.resize(n);
  // Periodic Hann.
  for (std::size_t i = 0; i < n; ++i) {
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
}

Matrix MfccPlan::mel_energies(const audio::AudioClip& clip) const {
  if (clip.sample_rate_hz != rate_) {
    throw Error(Errc::ShapeMismatch, "clip rate " + std::to_string(clip.sample_rate_hz) + " != plan rate " +
                                         std::to_string(rate_));
  }
  const std::size_t window = window_.size();
  const auto step = static_cast<std::size_t>(cfg_.step_samples(rate_));
  const std::size_t frames = frame_count(clip.samples.size(), cfg_, rate_);
  if (frames == 0) {
    throw Error(Errc::TooShort, "clip has " + std::to_string(clip.samples.size()) + " samples, window needs " +
                                    std::to_string(window));
  }

  const auto& x = clip.samples;
  Matrix energies(frames, filterbank_.rows);
  std::vector<double> frame(window);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * step;
    for (std::size_t i = 0; i < window; ++i) {
      const std::size_t j = start + i;
      const double prev = j == 0 ? 0.0 : static_cast<double>(x[j - 1]);
      frame[i] = (static_cast<double>(x[j]) - cfg_.preemphasis * prev) * window_[i];
    }
    const auto power = fft::power_spectrum(frame, static_cast<std::size_t>(cfg_.n_fft));
    for (std::size_t m = 0; m < filterbank_.rows; ++m) {
      const auto weights = filterbank_.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) acc += weights[k] * power[k];
      energies(t, m) = acc;
    }
  }
  return energies;
}

FeatureMatrix MfccPlan::compute(const audio::AudioClip& clip) const {
  const Matrix energies = mel_energies(clip);
  const auto n_mels = static_cast<std::size_t>(cfg_.n_mels);
  const auto n_coeffs = static_cast<std::size_t>(cfg_.n_coeffs);
  FeatureMatrix out;
  out.frame_step_ms = cfg_.step_ms;
  out.frames = Matrix(energies.rows, n_coeffs);
  std::vector<double> log_mel(n_mels);
  for (std::size_t t = 0; t < energies.rows; ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) log_mel[m] = std::log(std::max(energies(t, m), cfg_.log_floor));
    for (std::size_t c = 0; c < n_coeffs; ++c) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n_mels; ++m) acc += dct_(c, m) * log_mel[m];
      out.frames(t, c) = acc;
    }
  }
  if (cfg_.context > 0) return stack_context(out, cfg_.context);
  return out;
}

FeatureMatrix compute_mfcc(const audio::AudioClip& clip, const MfccConfig& cfg) {
  return MfccPlan(cfg, clip.sample_rate_hz).compute(clip);
}

FeatureMatrix stack_context(const FeatureMatrix& feats, int k) {
  if (k < 0) throw Error(Errc::DegenerateConfig, "context must be non-negative");
  const std::size_t width = feats.frames.cols;
  const std::size_t span = 2 * static_cast<std::size_t>(k) + 1;
  FeatureMatrix out;
  out.frame_step_ms = feats.frame_step_ms;
  out.frames = Matrix(feats.frames.rows, width * span);
  const auto rows = static_cast<long>(feats.frames.rows);
  for (long t = 0; t < rows; ++t) {
    for (long o = -k; o <= k; ++o) {
      const long src = t + o;
      if (src < 0 || src >= rows) continue;
      const auto from = feats.frames.row(static_cast<std::size_t>(src));
      auto to = out.frames.row(static_cast<std::size_t>(t)).subspan(static_cast<std::size_t>(o + k) * width, width);
      std::copy(from.begin(), from.end(), to.begin());
    }
  }
  return out;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::TruncatedData, "feature dump truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_dump(const std::filesystem::path& path, const FeatureMatrix& feats) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write("MFC1", 4);
  put_u32(out, static_cast<std::uint32_t>(feats.frames.rows));
  put_u32(out, static_cast<std::uint32_t>(feats.frames.cols));
  for (double v : feats.frames.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

FeatureMatrix read_feature_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MFC1", 4) != 0) {
    throw Error(Errc::MalformedHeader, "feature dump magic must be MFC1");
  }
  const auto rows = get_u32(in);
  const auto cols = get_u32(in);
  FeatureMatrix feats;
  feats.frames = Matrix(rows, cols);
  for (double& v : feats.frames.data) v = std::bit_cast<float>(get_u32(in));
  return feats;
}

}  // namespace asr::features
