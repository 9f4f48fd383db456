#include "asr/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "asr/error.hpp"

namespace asr::audio {
namespace {

constexpr int kFormatPcm = 1;
constexpr int kFormatFloat = 3;
constexpr int kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct ParsedWav {
  WavInfo info;
  std::size_t data_offset = 0;
};

ParsedWav parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::MalformedHeader, "missing RIFF/WAVE signature");
  }
  ParsedWav parsed;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) {
        throw Error(Errc::MalformedHeader, "fmt chunk too short");
      }
      const std::uint8_t* f = bytes.data() + body;
      WavInfo& info = parsed.info;
      info.format_tag = le16(f);
      info.channels = le16(f + 2);
      info.sample_rate_hz = static_cast<int>(le32(f + 4));
      info.bits_per_sample = le16(f + 14);
      if (info.format_tag == kFormatExtensible) {
        if (size < 40) throw Error(Errc::MalformedHeader, "extensible fmt chunk too short");
        // Subformat GUID starts with the plain format tag.
        info.format_tag = le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(Errc::MalformedHeader, "data chunk before fmt chunk");
      if (body + size > bytes.size()) {
        throw Error(Errc::TruncatedData, "data chunk declares " + std::to_string(size) +
                                             " bytes, only " + std::to_string(bytes.size() - body) +
                                             " present");
      }
      parsed.info.data_bytes = size;
      parsed.data_offset = body;
      return parsed;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(Errc::MalformedHeader, have_fmt ? "no data chunk" : "no fmt chunk");
}

void validate(const WavInfo& info) {
  if (info.channels < 1) throw Error(Errc::MalformedHeader, "zero channels");
  if (info.sample_rate_hz <= 0) throw Error(Errc::MalformedHeader, "non-positive sample rate");
  const int bits = info.bits_per_sample;
  if (info.format_tag == kFormatPcm) {
    if (bits != 8 && bits != 16 && bits != 24 && bits != 32) {
      throw Error(Errc::UnsupportedEncoding, "PCM bit depth " + std::to_string(bits));
    }
  } else if (info.format_tag == kFormatFloat) {
    if (bits != 32 && bits != 64) {
      throw Error(Errc::UnsupportedEncoding, "float bit depth " + std::to_string(bits));
    }
  } else {
    throw Error(Errc::UnsupportedEncoding, "format tag " + std::to_string(info.format_tag));
  }
}

double read_sample(const std::uint8_t* p, const WavInfo& info) {
  if (info.format_tag == kFormatFloat) {
    if (info.bits_per_sample == 32) {
      float v;
      std::uint32_t bits = le32(p);
      std::memcpy(&v, &bits, sizeof v);
      return std::isnan(v) ? 0.0 : std::clamp(static_cast<double>(v), -1.0, 1.0);
    }
    std::uint64_t bits = static_cast<std::uint64_t>(le32(p)) |
                         (static_cast<std::uint64_t>(le32(p + 4)) << 32);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
  }
  switch (info.bits_per_sample) {
    case 8: return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: return static_cast<std::int16_t>(le16(p)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default: return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
  }
}

std::vector<double> kaiser_sinc_phase(double frac, int taps, double cutoff, double beta) {
  // cutoff is in cycles per input sample; taps are centred on the output instant.
  const int half = taps / 2;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  std::vector<double> h(static_cast<std::size_t>(taps));
  for (int k = 0; k < taps; ++k) {
    const double tau = frac + static_cast<double>(half - 1 - k);  // t - j
    const double r = tau / half;
    double window = 0.0;
    if (std::abs(r) <= 1.0) window = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / i0_beta;
    const double x = 2.0 * cutoff * tau;
    const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
    h[static_cast<std::size_t>(k)] = 2.0 * cutoff * sinc * window;
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace

WavInfo inspect_wav(std::span<const std::uint8_t> bytes) {
  ParsedWav parsed = parse_header(bytes);
  validate(parsed.info);
  return parsed.info;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  const ParsedWav parsed = parse_header(bytes);
  const WavInfo& info = parsed.info;
  validate(info);
  const std::size_t width = static_cast<std::size_t>(info.bits_per_sample / 8);
  const std::size_t frame_bytes = width * static_cast<std::size_t>(info.channels);
  const std::size_t frames = info.data_bytes / frame_bytes;

  AudioClip clip;
  clip.sample_rate_hz = info.sample_rate_hz;
  clip.samples.resize(frames);
  const std::uint8_t* data = bytes.data() + parsed.data_offset;
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < info.channels; ++c) {
      acc += read_sample(data + i * frame_bytes + static_cast<std::size_t>(c) * width, info);
    }
    clip.samples[i] = static_cast<float>(std::clamp(acc / info.channels, -1.0, 1.0));
  }
  return clip;
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, data_bytes);
  for (float s : clip.samples) {
    const double scaled = std::nearbyint(static_cast<double>(s) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

AudioClip read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_wav(bytes);
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate_hz) {
  if (target_rate_hz <= 0 || clip.sample_rate_hz <= 0) {
    throw Error(Errc::InvalidConfig, "sample rates must be positive");
  }
  if (target_rate_hz == clip.sample_rate_hz) return clip;

  constexpr int kTaps = 64;
  constexpr double kBeta = 8.6;
  const long long src = clip.sample_rate_hz;
  const long long dst = target_rate_hz;
  const long long g = std::gcd(src, dst);
  const long long up = dst / g;    // L
  const long long down = src / g;  // M
  const double cutoff = 0.45 * static_cast<double>(std::min(src, dst)) / static_cast<double>(src);

  // One phase per distinct fractional input position.
  std::vector<std::vector<double>> phases(static_cast<std::size_t>(up));
  for (long long p = 0; p < up; ++p) {
    phases[static_cast<std::size_t>(p)] =
        kaiser_sinc_phase(static_cast<double>(p) / static_cast<double>(up), kTaps, cutoff, kBeta);
  }

  const auto n_in = static_cast<long long>(clip.samples.size());
  const long long n_out = (n_in * up + down / 2) / down;
  AudioClip out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(static_cast<std::size_t>(n_out));
  constexpr int kHalf = kTaps / 2;
  for (long long n = 0; n < n_out; ++n) {
    const long long pos = n * down;
    const long long base = pos / up;
    const auto& h = phases[static_cast<std::size_t>(pos % up)];
    double acc = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      const long long j = base - (kHalf - 1) + k;
      if (j < 0 || j >= n_in) continue;
      acc += h[static_cast<std::size_t>(k)] * clip.samples[static_cast<std::size_t>(j)];
    }
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

AudioClip to_canonical(const AudioClip& clip) { return resample(clip, kCanonicalRate); }

}  // namespace asr::audio
