#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asr::text {

// UTF-8 <-> code points. Invalid bytes decode to U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

// Lowercase a-z, space and apostrophe only; everything else becomes a word
// boundary. Whitespace runs collapse and the result is trimmed. Idempotent.
std::string normalize_transcript(std::string_view raw);

bool is_normalized(std::string_view s);

using LabelSequence = std::vector<int>;

// Ordered character set; label id = position. The CTC blank is not a symbol,
// its index is size().
class Alphabet {
public:
  Alphabet() = default;
  explicit Alphabet(std::u32string symbols);

  std::size_t size() const noexcept { return symbols_.size(); }
  int blank_index() const noexcept { return static_cast<int>(symbols_.size()); }
  const std::u32string& symbols() const noexcept { return symbols_; }
  char32_t symbol(int id) const;
  std::optional<int> find(char32_t c) const noexcept;
  bool covers(std::string_view utf8) const;

  bool operator==(const Alphabet&) const = default;

private:
  std::u32string symbols_;
};

// Sorted set of observed characters (space sorts first).
// Throws Error{EmptyCorpus} when no transcripts are given.
Alphabet build_alphabet(std::span<const std::string> transcripts);

// Throws Error{UnknownSymbol}.
LabelSequence encode_labels(std::string_view text, const Alphabet& alphabet);
// Throws Error{IndexOutOfRange}.
std::string decode_labels(std::span<const int> ids, const Alphabet& alphabet);

// One symbol per line, '#' lines are comments, blank is implicit.
std::string format_alphabet(const Alphabet& alphabet);
Alphabet parse_alphabet(std::string_view contents);
void save_alphabet(const Alphabet& alphabet, const std::filesystem::path& path);
Alphabet load_alphabet(const std::filesystem::path& path);

}  // namespace asr::text
