#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asr::lm {

// Character n-gram model with add-k smoothing:
//   P(c | h) = (count(h, c) + k) / (count(h) + k * |vocab|)
// where h is the previous order-1 characters, padded with the boundary
// symbol at the start of a sentence. The vocabulary is the symbol set plus
// that boundary symbol.
class NgramModel {
public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<int, std::uint64_t> next;
    bool operator==(const ContextCounts&) const = default;
  };
  using Context = std::vector<int>;

  // Throws Error{InvalidConfig}.
  NgramModel(int order, double k, std::u32string symbols);

  int order() const noexcept { return order_; }
  double k() const noexcept { return k_; }
  const std::u32string& symbols() const noexcept { return symbols_; }
  std::size_t vocab_size() const noexcept { return symbols_.size() + 1; }
  int boundary_id() const noexcept { return static_cast<int>(symbols_.size()); }
  std::optional<int> id(char32_t c) const noexcept;

  void add(const Context& context, int next, std::uint64_t count = 1);
  const std::map<Context, ContextCounts>& counts() const noexcept { return counts_; }

  // Context (order-1 ids) for predicting the symbol after `history`.
  Context context_for(std::span<const int> history) const;
  double log_prob(const Context& context, int next) const;
  double log_prob_after(std::span<const int> history, int next) const {
    return log_prob(context_for(history), next);
  }

  // Sum of ln P over every character; 0 for the empty string.
  // Throws Error{UnknownSymbol}.
  double score(std::string_view text) const;

  bool operator==(const NgramModel&) const = default;

private:
  int order_;
  double k_;
  std::u32string symbols_;
  std::map<Context, ContextCounts> counts_;
};

// Throws Error{EmptyCorpus | InvalidConfig}.
NgramModel train_ngram(std::span<const std::string> transcripts, int order, double k);

// Header `ngram<TAB>order=<n><TAB>k=<k><TAB>vocab=<symbols>` followed by
// sorted `context<TAB>symbol<TAB>count` lines; '^' marks the boundary.
std::string format_ngram(const NgramModel& model);
NgramModel parse_ngram(std::string_view contents);
void save_ngram(const NgramModel& model, const std::filesystem::path& path);
NgramModel load_ngram(const std::filesystem::path& path);

}  // namespace asr::lm
