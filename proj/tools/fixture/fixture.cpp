#include "fixture.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "asr/error.hpp"
#include "asr/rng.hpp"
#include "asr/text.hpp"

namespace fs = std::filesystem;

namespace asr::fixture {
namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::int16_t to_s16(double x) {
  return static_cast<std::int16_t>(std::lround(std::clamp(x, -1.0, 1.0) * 32767.0));
}

// Two-channel s16 WAV; the right channel is a scaled copy so the mixdown
// keeps the waveform shape.
std::vector<std::uint8_t> encode_stereo(const audio::AudioClip& clip) {
  const auto frames = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = frames * 4;
  std::vector<std::uint8_t> b;
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, 2);
  put_u32(b, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(b, static_cast<std::uint32_t>(clip.sample_rate_hz) * 4);
  put_u16(b, 4);
  put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_bytes);
  for (float s : clip.samples) {
    put_u16(b, static_cast<std::uint16_t>(to_s16(s)));
    put_u16(b, static_cast<std::uint16_t>(to_s16(0.8 * s)));
  }
  return b;
}

std::string raw_form(const std::string& transcript) {
  std::string out = transcript;
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

}  // namespace

double tone_frequency(char32_t c) {
  // Roughly equal steps on the mel scale between 250 Hz and 3.5 kHz.
  int slot = 0;
  if (c == U' ') {
    slot = 0;
  } else if (c == U'\'') {
    slot = 27;
  } else if (c >= U'a' && c <= U'z') {
    slot = static_cast<int>(c - U'a') + 1;
  } else {
    throw Error(Errc::UnknownSymbol, "no tone for character");
  }
  const double lo = 2595.0 * std::log10(1.0 + 250.0 / 700.0);
  const double hi = 2595.0 * std::log10(1.0 + 3500.0 / 700.0);
  const double mel = lo + (hi - lo) * slot / 27.0;
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

audio::AudioClip synthesize(std::string_view transcript, const SynthOptions& options) {
  const auto chars = text::utf8_decode(transcript);
  const double rate = options.sample_rate_hz;
  const auto tone = static_cast<std::size_t>(std::lround(options.tone_ms * rate / 1000.0));
  const auto gap = static_cast<std::size_t>(std::lround(options.gap_ms * rate / 1000.0));
  const auto edge = static_cast<std::size_t>(std::lround(options.edge_ms * rate / 1000.0));
  const std::size_t ramp = std::min<std::size_t>(tone / 8, static_cast<std::size_t>(rate / 200.0));

  audio::AudioClip clip;
  clip.sample_rate_hz = options.sample_rate_hz;
  const std::size_t total = 2 * edge + chars.size() * tone + (chars.empty() ? 0 : (chars.size() - 1) * gap);
  clip.samples.assign(total, 0.0f);

  std::size_t pos = edge;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const double f = tone_frequency(chars[i]);
    for (std::size_t n = 0; n < tone; ++n) {
      double env = 1.0;
      if (n < ramp) env = static_cast<double>(n) / ramp;
      if (tone - n <= ramp) env = static_cast<double>(tone - n) / ramp;
      clip.samples[pos + n] = static_cast<float>(options.amplitude * env *
                                                 std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / rate));
    }
    pos += tone + gap;
  }
  rng::CounterStream noise(rng::key({options.seed, text::utf8_decode(transcript).size(), total}));
  for (auto& s : clip.samples) s = static_cast<float>(std::clamp(s + options.dither * noise.uniform(-1.0, 1.0), -1.0, 1.0));
  return clip;
}

const std::vector<std::string>& overfit_transcripts() {
  static const std::vector<std::string> t = {"ab", "cab", "bead", "dace", "ed"};
  return t;
}

const std::vector<std::string>& smoke_transcripts() {
  static const std::vector<std::string> t = {
      "a bad cab",  "dead beef", "face",      "cafe bag",  "bead",     "fade",      "ace",
      "head",       "bag",       "deaf",      "he had",    "bed",      "dab",       "each",
      "gab",        "had a bee", "feed",      "cage",      "badge",    "a deed",
  };
  return t;
}

fs::path write_corpus(const fs::path& dir, const std::vector<std::string>& transcripts, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir / "audio" / "spk1", ec);
  fs::create_directories(dir / "audio" / "spk2", ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());

  const fs::path index = dir / "index.tsv";
  std::ofstream idx(index, std::ios::binary | std::ios::trunc);
  if (!idx) throw Error(Errc::IoFailure, "cannot write " + index.string());
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "utt%03zu", i + 1);
    SynthOptions opt;
    opt.seed = seed + i;
    opt.sample_rate_hz = i % 5 == 4 ? 44100 : 48000;
    const auto clip = synthesize(transcripts[i], opt);
    const fs::path wav = dir / "audio" / (i % 2 == 0 ? "spk1" : "spk2") / (std::string(id) + ".wav");
    if (i % 3 == 1) {
      const auto bytes = encode_stereo(clip);
      std::ofstream out(wav, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(Errc::IoFailure, "cannot write " + wav.string());
    } else {
      audio::write_wav(wav, clip);
    }
    idx << id << '\t' << raw_form(transcripts[i]) << '\n';
  }
  return index;
}

}  // namespace asr::fixture
