#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "asr/lm.hpp"
#include "asr/matrix.hpp"
#include "asr/text.hpp"

namespace asr::ctc {

double log_sum_exp(double a, double b) noexcept;

// Minimum number of frames able to emit `labels`: one per label plus one
// separating blank per adjacent repeat.
std::size_t min_frames(std::span<const int> labels) noexcept;

struct CtcResult {
  double loss = 0.0;     // -ln P(labels | x)
  Matrix grad;           // dLoss / dLogits, T x K
  Matrix posteriors;     // per-frame posterior mass of each output symbol
};

// Forward-backward over the blank-interleaved label sequence, all in log
// space. `log_probs` rows must be log-softmax outputs.
// Throws Error{InvalidLabel | Infeasible}.
CtcResult ctc_loss_grad(const Matrix& log_probs, std::span<const int> labels, int blank);

// Per-frame argmax (lowest index on ties), collapse repeats, drop blanks.
std::vector<int> greedy_path(const Matrix& log_probs, int blank);
std::string greedy_decode(const Matrix& log_probs, const text::Alphabet& alphabet);

struct BeamConfig {
  int beam_width = 32;
  double lm_weight = 0.75;        // alpha
  double insertion_bonus = 1.0;   // beta, per emitted character
  const lm::NgramModel* lm = nullptr;
};

// CTC prefix beam search. Each prefix keeps blank- and non-blank-ending log
// masses merged with log-sum-exp; a prefix scores
//   log P_ctc + alpha * log P_lm(prefix) + beta * |prefix|.
// Pruning ranks prefixes by their best single alignment (so width 1 reduces
// to greedy decoding); the final answer is ranked by the full merged mass.
std::vector<int> beam_search(const Matrix& log_probs, const BeamConfig& cfg, int blank,
                             const text::Alphabet* alphabet = nullptr);
std::string beam_decode(const Matrix& log_probs, const BeamConfig& cfg, const text::Alphabet& alphabet);

}  // namespace asr::ctc
