#pragma once

// Slow, obviously-correct reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "asr/matrix.hpp"

namespace oracle {

// Collapse repeats, then drop blanks.
inline std::vector<int> collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

// Calls fn(path) for every path in K^T.
inline void for_each_path(std::size_t T, int K, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(T, 0);
  while (true) {
    fn(path);
    std::size_t i = 0;
    while (i < T && ++path[i] == K) path[i++] = 0;
    if (i == T) return;
  }
}

inline double path_probability(const asr::Matrix& log_probs, const std::vector<int>& path) {
  double p = 1.0;
  for (std::size_t t = 0; t < path.size(); ++t) p *= std::exp(log_probs(t, static_cast<std::size_t>(path[t])));
  return p;
}

// Total probability of every alignment that collapses to labels.
inline double ctc_probability(const asr::Matrix& log_probs, const std::vector<int>& labels, int blank) {
  double total = 0.0;
  for_each_path(log_probs.rows, static_cast<int>(log_probs.cols), [&](const std::vector<int>& path) {
    if (collapse(path, blank) == labels) total += path_probability(log_probs, path);
  });
  return total;
}

// Label sequence with the largest summed alignment probability.
inline std::vector<int> max_marginal(const asr::Matrix& log_probs, int blank, double* best_mass = nullptr,
                                     double* runner_up = nullptr) {
  std::map<std::vector<int>, double> mass;
  for_each_path(log_probs.rows, static_cast<int>(log_probs.cols), [&](const std::vector<int>& path) {
    mass[collapse(path, blank)] += path_probability(log_probs, path);
  });
  std::vector<int> best;
  double top = -1.0, second = -1.0;
  for (const auto& [labels, m] : mass) {
    if (m > top) {
      second = top;
      top = m;
      best = labels;
    } else if (m > second) {
      second = m;
    }
  }
  if (best_mass) *best_mass = top;
  if (runner_up) *runner_up = second;
  return best;
}

// Exponential-time Levenshtein recursion. A matching head is always taken,
// which is optimal and keeps the recursion tractable for short strings.
template <typename Seq>
std::size_t naive_edit_distance(const Seq& a, const Seq& b, std::size_t i = 0, std::size_t j = 0) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  if (a[i] == b[j]) return naive_edit_distance(a, b, i + 1, j + 1);
  const std::size_t sub = naive_edit_distance(a, b, i + 1, j + 1);
  const std::size_t del = naive_edit_distance(a, b, i + 1, j);
  const std::size_t ins = naive_edit_distance(a, b, i, j + 1);
  return 1 + std::min({sub, del, ins});
}

// |X[k]| of the length-N DFT (direct summation, double accumulation).
inline double dft_magnitude(const std::vector<float>& x, std::size_t k) {
  const double N = static_cast<double>(x.size());
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(n) / N;
    re += x[n] * std::cos(phase);
    im += x[n] * std::sin(phase);
  }
  return std::hypot(re, im);
}

// Goertzel power for every bin in [0, N/2]; argmax returned.
inline std::size_t dft_peak_bin(const std::vector<float>& x) {
  const std::size_t N = x.size();
  std::size_t best = 0;
  double best_power = -1.0;
  for (std::size_t k = 0; k <= N / 2; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(N);
    const double c = 2.0 * std::cos(w);
    double s1 = 0.0, s2 = 0.0;
    for (float v : x) {
      const double s0 = v + c * s1 - s2;
      s2 = s1;
      s1 = s0;
    }
    const double power = s1 * s1 + s2 * s2 - c * s1 * s2;
    if (power > best_power) {
      best_power = power;
      best = k;
    }
  }
  return best;
}

// Central difference of f with respect to x[i].
inline double central_difference(std::vector<double>& x, std::size_t i, double h,
                                 const std::function<double()>& f) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero pairs sane.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Textbook row-wise log-softmax.
inline asr::Matrix log_softmax(const asr::Matrix& logits) {
  asr::Matrix out(logits.rows, logits.cols);
  for (std::size_t t = 0; t < logits.rows; ++t) {
    double m = logits(t, 0);
    for (std::size_t k = 1; k < logits.cols; ++k) m = std::max(m, logits(t, k));
    double z = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) z += std::exp(logits(t, k) - m);
    for (std::size_t k = 0; k < logits.cols; ++k) out(t, k) = logits(t, k) - m - std::log(z);
  }
  return out;
}

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

}  // namespace oracle
