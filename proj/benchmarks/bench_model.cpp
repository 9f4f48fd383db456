#include <benchmark/benchmark.h>

#include <random>

#include "asr/ctc.hpp"
#include "asr/model.hpp"

namespace {

asr::Matrix random_features(std::size_t rows, std::size_t cols) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> d(0.0, 1.0);
  asr::Matrix m(rows, cols);
  for (double& v : m.data) v = d(gen);
  return m;
}

// 50 frames per second of audio at the default 20 ms step.
void BM_Forward(benchmark::State& state) {
  asr::model::ModelConfig cfg;
  cfg.n_hidden = static_cast<int>(state.range(0));
  const auto params = asr::model::init_model(cfg);
  const auto x = random_features(250, 26);
  for (auto _ : state) benchmark::DoNotOptimize(asr::model::forward(params, cfg, x));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(128);

void BM_ForwardBackwardCtc(benchmark::State& state) {
  asr::model::ModelConfig cfg;
  cfg.n_hidden = static_cast<int>(state.range(0));
  const auto params = asr::model::init_model(cfg);
  const auto x = random_features(250, 26);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 28);
  for (auto _ : state) {
    const auto fwd = asr::model::forward(params, cfg, x);
    const auto loss = asr::ctc::ctc_loss_grad(fwd.log_probs, labels, 28);
    benchmark::DoNotOptimize(asr::model::backward(params, cfg, fwd.cache, loss.grad));
  }
}
BENCHMARK(BM_ForwardBackwardCtc)->Arg(64)->Arg(128);

void BM_CtcLoss(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const auto lp = asr::model::log_softmax(random_features(T, 29));
  std::vector<int> labels(T / 5);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>((i * 7) % 28);
  for (auto _ : state) benchmark::DoNotOptimize(asr::ctc::ctc_loss_grad(lp, labels, 28));
}
BENCHMARK(BM_CtcLoss)->Arg(100)->Arg(1000);

}  // namespace
