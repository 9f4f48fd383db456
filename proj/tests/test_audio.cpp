#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "asr/audio.hpp"
#include "asr/error.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace asr;
using audio::AudioClip;

namespace {

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Hand-built RIFF stream; data_bytes_declared may lie about the payload.
std::vector<std::uint8_t> wav_bytes(int format, int channels, int rate, int bits, const std::vector<std::uint8_t>& payload,
                                    std::uint32_t data_bytes_declared) {
  std::vector<std::uint8_t> b = {'R', 'I', 'F', 'F'};
  put32(b, 36 + static_cast<std::uint32_t>(payload.size()));
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<std::uint8_t>(c));
  put32(b, 16);
  put16(b, static_cast<std::uint16_t>(format));
  put16(b, static_cast<std::uint16_t>(channels));
  put32(b, static_cast<std::uint32_t>(rate));
  put32(b, static_cast<std::uint32_t>(rate * channels * bits / 8));
  put16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put16(b, static_cast<std::uint16_t>(bits));
  for (char c : std::string("data")) b.push_back(static_cast<std::uint8_t>(c));
  put32(b, data_bytes_declared);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

std::vector<std::uint8_t> s16(std::initializer_list<std::int16_t> values) {
  std::vector<std::uint8_t> out;
  for (auto v : values) put16(out, static_cast<std::uint16_t>(v));
  return out;
}

AudioClip sine(double freq, int rate, std::size_t n, double amp = 1.0) {
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate));
  }
  return c;
}

}  // namespace

TEST_CASE("16-bit mono samples scale by 1/32768") {
  const auto payload = s16({0, 16384, -32768});
  const auto clip = audio::decode_wav(wav_bytes(1, 1, 48000, 16, payload, 6));
  CHECK(clip.sample_rate_hz == 48000);
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == 0.0f);
  CHECK(clip.samples[1] == 0.5f);
  CHECK(clip.samples[2] == -1.0f);
}

TEST_CASE("stereo frames mix down by channel mean") {
  const auto payload = s16({16384, -16384});
  const auto clip = audio::decode_wav(wav_bytes(1, 2, 16000, 16, payload, 4));
  REQUIRE(clip.samples.size() == 1);
  CHECK(clip.samples[0] == 0.0f);
}

TEST_CASE("declared data longer than the stream is TruncatedData") {
  const auto payload = s16({1, 2});
  try {
    audio::decode_wav(wav_bytes(1, 1, 16000, 16, payload, 400));
    FAIL("expected TruncatedData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TruncatedData);
  }
}

TEST_CASE("non-RIFF input is MalformedHeader and compressed formats are UnsupportedEncoding") {
  std::vector<std::uint8_t> junk(64, 0x41);
  CHECK_THROWS_AS(audio::decode_wav(junk), Error);
  try {
    audio::decode_wav(junk);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedHeader);
  }
  try {
    audio::decode_wav(wav_bytes(2, 1, 16000, 4, s16({0}), 2));  // ADPCM tag
    FAIL("expected UnsupportedEncoding");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnsupportedEncoding);
  }
}

TEST_CASE("8, 24 and 32-bit PCM plus float formats decode") {
  SUBCASE("8-bit unsigned") {
    const auto clip = audio::decode_wav(wav_bytes(1, 1, 8000, 8, {128, 255, 0}, 3));
    REQUIRE(clip.samples.size() == 3);
    CHECK(clip.samples[0] == 0.0f);
    CHECK(clip.samples[1] == doctest::Approx(127.0 / 128.0));
    CHECK(clip.samples[2] == -1.0f);
  }
  SUBCASE("24-bit") {
    // 0x400000 = 0.5 full scale
    const auto clip = audio::decode_wav(wav_bytes(1, 1, 16000, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0x80}, 6));
    REQUIRE(clip.samples.size() == 2);
    CHECK(clip.samples[0] == 0.5f);
    CHECK(clip.samples[1] == -1.0f);
  }
  SUBCASE("32-bit integer") {
    std::vector<std::uint8_t> p;
    put32(p, 0x40000000u);
    const auto clip = audio::decode_wav(wav_bytes(1, 1, 16000, 32, p, 4));
    CHECK(clip.samples.at(0) == 0.5f);
  }
  SUBCASE("32-bit float is clamped") {
    std::vector<std::uint8_t> p;
    for (float f : {0.25f, 3.0f, -7.0f}) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put32(p, bits);
    }
    const auto clip = audio::decode_wav(wav_bytes(3, 1, 16000, 32, p, 12));
    REQUIRE(clip.samples.size() == 3);
    CHECK(clip.samples[0] == 0.25f);
    CHECK(clip.samples[1] == 1.0f);
    CHECK(clip.samples[2] == -1.0f);
  }
  SUBCASE("64-bit float") {
    std::vector<std::uint8_t> p;
    const double d = -0.125;
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put32(p, static_cast<std::uint32_t>(bits));
    put32(p, static_cast<std::uint32_t>(bits >> 32));
    const auto clip = audio::decode_wav(wav_bytes(3, 1, 16000, 64, p, 8));
    CHECK(clip.samples.at(0) == -0.125f);
  }
}

TEST_CASE("encode_wav emits the canonical header and saturates") {
  const auto zero = audio::encode_wav(AudioClip{{0.0f}, 16000});
  REQUIRE(zero.size() == 46);
  CHECK(std::memcmp(zero.data(), "RIFF", 4) == 0);
  CHECK(zero[44] == 0x00);
  CHECK(zero[45] == 0x00);

  const auto full = audio::encode_wav(AudioClip{{1.0f}, 16000});
  const int word = full[44] | (full[45] << 8);
  CHECK(word == 32767);

  const auto info = audio::inspect_wav(zero);
  CHECK(info.format_tag == 1);
  CHECK(info.channels == 1);
  CHECK(info.sample_rate_hz == 16000);
  CHECK(info.bits_per_sample == 16);
  CHECK(info.data_bytes == 2);
}

TEST_CASE("decode(encode(c)) is within one 16-bit quantum") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  AudioClip c;
  c.sample_rate_hz = 22050;
  c.samples.resize(5000);
  for (auto& s : c.samples) s = dist(gen);
  const auto back = audio::decode_wav(audio::encode_wav(c));
  CHECK(back.sample_rate_hz == 22050);
  REQUIRE(back.samples.size() == c.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) worst = std::max(worst, std::abs(double(back.samples[i]) - c.samples[i]));
  CHECK(worst <= 1.0 / 32768.0);
}

TEST_CASE("resample length arithmetic and identity") {
  AudioClip c = sine(440.0, 48000, 48000, 0.5);
  const auto down = audio::resample(c, 16000);
  CHECK(down.sample_rate_hz == 16000);
  CHECK(down.samples.size() == 16000);

  AudioClip same = sine(300.0, 16000, 1234, 0.3);
  CHECK(audio::resample(same, 16000) == same);
}

TEST_CASE("resampled length stays within one sample of round(n * target / source)") {
  std::mt19937_64 gen(5);
  const int rates[] = {8000, 11025, 16000, 22050, 32000, 44100, 48000};
  for (int trial = 0; trial < 60; ++trial) {
    const int src = rates[gen() % 7];
    const int dst = rates[gen() % 7];
    const std::size_t n = 1 + gen() % 3000;
    AudioClip c = sine(200.0, src, n, 0.5);
    const auto out = audio::resample(c, dst);
    const double expected = std::round(static_cast<double>(n) * dst / src);
    CHECK(std::abs(static_cast<double>(out.samples.size()) - expected) <= 1.0);
    for (float s : out.samples) REQUIRE(std::abs(s) <= 1.0f);
  }
}

TEST_CASE("1 kHz tone survives 48 kHz to 16 kHz with its frequency and level") {
  const auto in = sine(1000.0, 48000, 48000, 1.0);
  const auto out = audio::resample(in, 16000);
  REQUIRE(out.samples.size() == 16000);
  const std::size_t peak = oracle::dft_peak_bin(out.samples);
  CHECK(peak >= 999);
  CHECK(peak <= 1001);
  // Unit sine: |X[k]| = N/2 at the tone bin.
  const double db = 20.0 * std::log10(oracle::dft_magnitude(out.samples, 1000) / 8000.0);
  CHECK(std::abs(db) <= 0.5);
}

TEST_CASE("tones above the new Nyquist are attenuated") {
  const auto in = sine(10000.0, 48000, 48000, 1.0);  // aliases to 6 kHz without a filter
  const auto out = audio::resample(in, 16000);
  double energy = 0.0;
  for (float s : out.samples) energy += double(s) * s;
  const double rms = std::sqrt(energy / out.samples.size());
  CHECK(rms < 0.01);
}

TEST_CASE("to_canonical yields 16 kHz and write/read round-trips through disk") {
  testing_support::TempDir dir;
  const auto in = sine(500.0, 44100, 4410, 0.4);
  const auto canon = audio::to_canonical(in);
  CHECK(canon.sample_rate_hz == audio::kCanonicalRate);
  CHECK(canon.samples.size() == 1600);
  audio::write_wav(dir / "x.wav", canon);
  const auto back = audio::read_wav(dir / "x.wav");
  CHECK(back.samples.size() == canon.samples.size());
  CHECK(std::filesystem::file_size(dir / "x.wav") == 44 + 2 * canon.samples.size());
}
