#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "asr/ctc.hpp"
#include "asr/eval.hpp"
#include "asr/lm.hpp"
#include "asr/model.hpp"
#include "asr/text.hpp"

namespace {

const asr::text::Alphabet& alphabet() {
  static const asr::text::Alphabet a(U" 'abcdefghijklmnopqrstuvwxyz");
  return a;
}

asr::Matrix random_log_probs(std::size_t T) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> d(0.0, 2.0);
  asr::Matrix m(T, alphabet().size() + 1);
  for (double& v : m.data) v = d(gen);
  return asr::model::log_softmax(m);
}

void BM_GreedyDecode(benchmark::State& state) {
  const auto lp = random_log_probs(250);
  for (auto _ : state) benchmark::DoNotOptimize(asr::ctc::greedy_decode(lp, alphabet()));
}
BENCHMARK(BM_GreedyDecode);

void BM_BeamDecode(benchmark::State& state) {
  const auto lp = random_log_probs(250);
  const std::vector<std::string> corpus = {"the quick brown fox", "jumps over the lazy dog", "a bad cab"};
  const auto lm = asr::lm::train_ngram(corpus, 5, 0.5);
  asr::ctc::BeamConfig cfg;
  cfg.beam_width = static_cast<int>(state.range(0));
  cfg.lm = state.range(1) ? &lm : nullptr;
  if (!cfg.lm) cfg.lm_weight = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(asr::ctc::beam_decode(lp, cfg, alphabet()));
}
BENCHMARK(BM_BeamDecode)->Args({8, 0})->Args({32, 0})->Args({32, 1});

void BM_EditDistanceChars(benchmark::State& state) {
  const std::string a(static_cast<std::size_t>(state.range(0)), 'a');
  std::string b = a;
  for (std::size_t i = 0; i < b.size(); i += 3) b[i] = 'b';
  for (auto _ : state) benchmark::DoNotOptimize(asr::eval::edit_distance(a, b));
}
BENCHMARK(BM_EditDistanceChars)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
