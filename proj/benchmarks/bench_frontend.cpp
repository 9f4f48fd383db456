#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "asr/audio.hpp"
#include "asr/features.hpp"

namespace {

asr::audio::AudioClip noise(std::size_t n, int rate) {
  std::mt19937_64 gen(1);
  std::normal_distribution<float> d(0.0f, 0.1f);
  asr::audio::AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(n);
  for (auto& s : c.samples) s = d(gen);
  return c;
}

void BM_Resample48kTo16k(benchmark::State& state) {
  const auto clip = noise(static_cast<std::size_t>(state.range(0)) * 48000, 48000);
  for (auto _ : state) benchmark::DoNotOptimize(asr::audio::resample(clip, 16000));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clip.samples.size()));
}
BENCHMARK(BM_Resample48kTo16k)->Arg(1)->Arg(5);

void BM_Resample44k1To16k(benchmark::State& state) {
  const auto clip = noise(44100, 44100);
  for (auto _ : state) benchmark::DoNotOptimize(asr::audio::resample(clip, 16000));
}
BENCHMARK(BM_Resample44k1To16k);

void BM_Mfcc(benchmark::State& state) {
  const auto clip = noise(static_cast<std::size_t>(state.range(0)) * 16000, 16000);
  const asr::features::MfccPlan plan({}, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(plan.compute(clip));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clip.samples.size()));
}
BENCHMARK(BM_Mfcc)->Arg(1)->Arg(10);

}  // namespace
