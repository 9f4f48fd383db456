#include "asr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <unordered_map>

#include "asr/error.hpp"

namespace asr::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double log_sum_exp(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double top = std::max(a, b);
  return top + std::log1p(std::exp(-std::abs(a - b)));
}

std::size_t min_frames(std::span<const int> labels) noexcept {
  std::size_t needed = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++needed;
  }
  return needed;
}

CtcResult ctc_loss_grad(const Matrix& log_probs, std::span<const int> labels, int blank) {
  const std::size_t frames = log_probs.rows;
  const std::size_t symbols = log_probs.cols;
  if (blank < 0 || static_cast<std::size_t>(blank) >= symbols) {
    throw Error(Errc::InvalidLabel, "blank index outside the output layer");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= symbols || l == blank) {
      throw Error(Errc::InvalidLabel, "label " + std::to_string(l));
    }
  }
  const std::size_t needed = min_frames(labels);
  if (frames < needed || (frames == 0 && !labels.empty())) {
    throw Error(Errc::Infeasible, std::to_string(labels.size()) + " labels need " + std::to_string(needed) +
                                      " frames, got " + std::to_string(frames));
  }

  CtcResult result;
  result.grad = Matrix(frames, symbols);
  result.posteriors = Matrix(frames, symbols);
  if (frames == 0) return result;

  // Extended sequence: blank, l0, blank, l1, ..., blank.
  const std::size_t states = 2 * labels.size() + 1;
  auto ext = [&](std::size_t s) { return s % 2 == 0 ? blank : labels[s / 2]; };
  auto can_skip = [&](std::size_t s) { return s >= 2 && s % 2 == 1 && ext(s) != ext(s - 2); };

  Matrix alpha(frames, states, kNegInf);
  Matrix beta(frames, states, kNegInf);
  alpha(0, 0) = log_probs(0, static_cast<std::size_t>(blank));
  if (states > 1) alpha(0, 1) = log_probs(0, static_cast<std::size_t>(ext(1)));
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_sum_exp(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_sum_exp(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + log_probs(t, static_cast<std::size_t>(ext(s)));
    }
  }
  const std::size_t last = frames - 1;
  beta(last, states - 1) = log_probs(last, static_cast<std::size_t>(ext(states - 1)));
  if (states > 1) beta(last, states - 2) = log_probs(last, static_cast<std::size_t>(ext(states - 2)));
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < states) acc = log_sum_exp(acc, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) acc = log_sum_exp(acc, beta(t + 1, s + 2));
      if (acc != kNegInf) beta(t, s) = acc + log_probs(t, static_cast<std::size_t>(ext(s)));
    }
  }

  double log_total = alpha(last, states - 1);
  if (states > 1) log_total = log_sum_exp(log_total, alpha(last, states - 2));
  if (log_total == kNegInf) throw Error(Errc::Infeasible, "label sequence has zero probability");
  result.loss = std::max(0.0, -log_total);

  std::vector<double> mass(symbols);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(mass.begin(), mass.end(), kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      const auto k = static_cast<std::size_t>(ext(s));
      const double gamma = alpha(t, s) + beta(t, s) - log_probs(t, k);
      if (gamma != kNegInf) mass[k] = log_sum_exp(mass[k], gamma);
    }
    for (std::size_t k = 0; k < symbols; ++k) {
      const double posterior = mass[k] == kNegInf ? 0.0 : std::exp(mass[k] - log_total);
      result.posteriors(t, k) = posterior;
      result.grad(t, k) = std::exp(log_probs(t, k)) - posterior;
    }
  }
  return result;
}

std::vector<int> greedy_path(const Matrix& log_probs, int blank) {
  std::vector<int> out;
  int previous = -1;
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    const auto row = log_probs.row(t);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != previous && best != blank) out.push_back(best);
    previous = best;
  }
  return out;
}

std::string greedy_decode(const Matrix& log_probs, const text::Alphabet& alphabet) {
  if (log_probs.cols != alphabet.size() + 1) {
    throw Error(Errc::ShapeMismatch, "output width does not match alphabet size + blank");
  }
  const auto ids = greedy_path(log_probs, alphabet.blank_index());
  return text::decode_labels(ids, alphabet);
}

namespace {

// Prefixes share storage as nodes of a trie; node 0 is the empty prefix.
class PrefixTrie {
public:
  static constexpr int kRoot = 0;

  PrefixTrie() : parent_{-1}, symbol_{-1}, length_{0} {}

  int child(int node, int symbol) {
    const auto key = (static_cast<std::uint64_t>(node) << 32) | static_cast<std::uint32_t>(symbol);
    auto [it, inserted] = children_.try_emplace(key, static_cast<int>(parent_.size()));
    if (inserted) {
      parent_.push_back(node);
      symbol_.push_back(symbol);
      length_.push_back(length_[static_cast<std::size_t>(node)] + 1);
    }
    return it->second;
  }
  int symbol(int node) const { return symbol_[static_cast<std::size_t>(node)]; }
  std::size_t length(int node) const { return length_[static_cast<std::size_t>(node)]; }

  // Last `n` symbols of the prefix, oldest first.
  std::vector<int> tail(int node, std::size_t n) const {
    std::vector<int> out;
    for (; node != kRoot && out.size() < n; node = parent_[static_cast<std::size_t>(node)]) {
      out.push_back(symbol(node));
    }
    std::reverse(out.begin(), out.end());
    return out;
  }
  std::vector<int> sequence(int node) const { return tail(node, length(node)); }
  // Lexicographic order of the spelled-out prefixes.
  bool less(int a, int b) const { return a != b && sequence(a) < sequence(b); }

private:
  std::vector<int> parent_;
  std::vector<int> symbol_;
  std::vector<std::size_t> length_;
  std::unordered_map<std::uint64_t, int> children_;
};

struct BeamEntry {
  int node = PrefixTrie::kRoot;
  double blank_mass = kNegInf;      // log P of alignments ending in blank
  double label_mass = kNegInf;      // ... ending in the last label
  double blank_best = kNegInf;      // best single alignment ending in blank
  double label_best = kNegInf;
  double lm_score = 0.0;
  int via = std::numeric_limits<int>::max();  // lowest symbol giving `best` this frame

  double total() const { return log_sum_exp(blank_mass, label_mass); }
  double best() const { return std::max(blank_best, label_best); }
};

// Record alignments arriving in `e` through `symbol`. `via` keeps the lowest
// symbol index that produced the entry's best alignment at this frame.
void arrive(BeamEntry& e, bool ends_in_blank, double add_mass, double add_best, int symbol) {
  double& mass = ends_in_blank ? e.blank_mass : e.label_mass;
  double& best = ends_in_blank ? e.blank_best : e.label_best;
  mass = log_sum_exp(mass, add_mass);
  if (add_best == kNegInf) return;
  const double before = e.best();
  best = std::max(best, add_best);
  if (add_best > before) {
    e.via = symbol;
  } else if (add_best == before) {
    e.via = std::min(e.via, symbol);
  }
}

}  // namespace

std::vector<int> beam_search(const Matrix& log_probs, const BeamConfig& cfg, int blank,
                             const text::Alphabet* alphabet) {
  if (cfg.beam_width < 1) throw Error(Errc::InvalidConfig, "beam_width must be >= 1");
  if (blank < 0 || static_cast<std::size_t>(blank) >= log_probs.cols) {
    throw Error(Errc::InvalidLabel, "blank index outside the output layer");
  }
  const std::size_t width = static_cast<std::size_t>(cfg.beam_width);
  const int n_symbols = static_cast<int>(log_probs.cols);
  const lm::NgramModel* lm = cfg.lm_weight != 0.0 ? cfg.lm : nullptr;

  // Decoder label id -> LM symbol id (-1 when the LM has never seen it).
  std::vector<int> lm_ids(log_probs.cols, -1);
  if (lm) {
    if (!alphabet) throw Error(Errc::InvalidConfig, "LM fusion needs the decoder alphabet");
    for (int id = 0; id < n_symbols; ++id) {
      if (id == blank) continue;
      if (const auto found = lm->id(alphabet->symbol(id))) lm_ids[static_cast<std::size_t>(id)] = *found;
    }
  }

  PrefixTrie trie;
  auto lm_extend = [&](int node, int symbol) {
    if (!lm) return 0.0;
    const int target = lm_ids[static_cast<std::size_t>(symbol)];
    if (target < 0) return -std::log(static_cast<double>(lm->vocab_size()));
    std::vector<int> history = trie.tail(node, static_cast<std::size_t>(lm->order() - 1));
    for (int& h : history) {
      const int mapped = lm_ids[static_cast<std::size_t>(h)];
      h = mapped < 0 ? lm->boundary_id() : mapped;
    }
    return lm->log_prob_after(history, target);
  };
  auto rank_score = [&](const BeamEntry& e, double acoustic) {
    return acoustic + cfg.lm_weight * (lm ? e.lm_score : 0.0) +
           cfg.insertion_bonus * static_cast<double>(trie.length(e.node));
  };

  std::vector<BeamEntry> beam(1);
  beam[0].node = PrefixTrie::kRoot;
  beam[0].blank_mass = 0.0;
  beam[0].blank_best = 0.0;

  std::vector<BeamEntry> next;
  std::unordered_map<int, std::size_t> slot_of;  // trie node -> index in `next`
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    const auto lp = log_probs.row(t);
    next.clear();
    slot_of.clear();
    auto slot = [&](int node, const auto& lm_score) -> BeamEntry& {
      auto [it, inserted] = slot_of.try_emplace(node, next.size());
      if (inserted) {
        BeamEntry fresh;
        fresh.node = node;
        fresh.lm_score = lm_score();
        next.push_back(fresh);
      }
      return next[it->second];
    };
    for (std::size_t b = 0; b < beam.size(); ++b) {
      // `next` may reallocate below, so work from a copy.
      const BeamEntry e = beam[b];
      const double total = e.total();
      const double best = e.best();
      {
        BeamEntry& stay = slot(e.node, [&] { return e.lm_score; });
        const double p_blank = lp[static_cast<std::size_t>(blank)];
        arrive(stay, true, total + p_blank, best + p_blank, blank);
        if (e.node != PrefixTrie::kRoot) {
          const int tail = trie.symbol(e.node);
          const double p = lp[static_cast<std::size_t>(tail)];
          arrive(stay, false, e.label_mass + p, e.label_best + p, tail);
        }
      }
      for (int c = 0; c < n_symbols; ++c) {
        if (c == blank) continue;
        const double p = lp[static_cast<std::size_t>(c)];
        const int child = trie.child(e.node, c);
        BeamEntry& grown = slot(child, [&] { return e.lm_score + lm_extend(e.node, c); });
        if (e.node != PrefixTrie::kRoot && trie.symbol(e.node) == c) {
          arrive(grown, false, e.blank_mass + p, e.blank_best + p, c);
        } else {
          arrive(grown, false, total + p, best + p, c);
        }
      }
    }

    std::vector<std::size_t> ranked;
    ranked.reserve(next.size());
    std::vector<double> score(next.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (next[i].best() == kNegInf) continue;
      score[i] = rank_score(next[i], next[i].best());
      ranked.push_back(i);
    }
    const std::size_t keep = std::min(width, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (score[a] != score[b]) return score[a] > score[b];
                        if (next[a].via != next[b].via) return next[a].via < next[b].via;
                        return trie.less(next[a].node, next[b].node);
                      });
    beam.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      BeamEntry entry = next[ranked[i]];
      entry.via = std::numeric_limits<int>::max();
      beam.push_back(entry);
    }
  }

  const BeamEntry* winner = nullptr;
  double winner_score = kNegInf;
  for (const auto& e : beam) {
    const double score = rank_score(e, e.total());
    if (!winner || score > winner_score ||
        (score == winner_score && trie.less(e.node, winner->node))) {
      winner = &e;
      winner_score = score;
    }
  }
  return winner ? trie.sequence(winner->node) : std::vector<int>{};
}

std::string beam_decode(const Matrix& log_probs, const BeamConfig& cfg, const text::Alphabet& alphabet) {
  if (log_probs.cols != alphabet.size() + 1) {
    throw Error(Errc::ShapeMismatch, "output width does not match alphabet size + blank");
  }
  return text::decode_labels(beam_search(log_probs, cfg, alphabet.blank_index(), &alphabet), alphabet);
}

}  // namespace asr::ctc
