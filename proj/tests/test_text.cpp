#include <random>

#include "asr/error.hpp"
#include "asr/text.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace asr;
using text::Alphabet;

namespace {

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::IoFailure;
}

// Random UTF-8 drawn from a pool mixing ASCII, punctuation, digits and
// multi-byte code points.
std::string random_unicode(std::mt19937_64& gen) {
  static const std::u32string pool = U"aZq' \t\n.,!?-_09éßक中\U0001F600 \"";
  std::string out;
  const std::size_t n = gen() % 24;
  for (std::size_t i = 0; i < n; ++i) out += text::utf8_encode(pool[gen() % pool.size()]);
  return out;
}

}  // namespace

TEST_CASE("normalization examples") {
  CHECK(text::normalize_transcript("Hello, World!") == "hello world");
  CHECK(text::normalize_transcript("  a   b ") == "a b");
  CHECK(text::normalize_transcript("India's 22 languages.") == "india's languages");
  CHECK(text::normalize_transcript("mid-day") == "mid day");
  CHECK(text::normalize_transcript("") == "");
  CHECK(text::normalize_transcript("...") == "");
}

TEST_CASE("normalization is idempotent and stays inside the default alphabet") {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 2000; ++i) {
    const std::string raw = random_unicode(gen);
    const std::string once = text::normalize_transcript(raw);
    REQUIRE(text::normalize_transcript(once) == once);
    REQUIRE(text::is_normalized(once));
    for (char c : once) REQUIRE(((c >= 'a' && c <= 'z') || c == ' ' || c == '\''));
  }
}

TEST_CASE("build_alphabet orders space first and rejects empty input") {
  const std::vector<std::string> ab = {"ab", "ba"};
  const auto a1 = text::build_alphabet(ab);
  CHECK(a1.symbols() == U"ab");
  CHECK(a1.blank_index() == 2);

  const std::vector<std::string> spaced = {"a b"};
  const auto a2 = text::build_alphabet(spaced);
  CHECK(a2.symbols() == U" ab");
  CHECK(a2.blank_index() == 3);

  const std::vector<std::string> none;
  CHECK(code_of([&] { text::build_alphabet(none); }) == Errc::EmptyCorpus);
}

TEST_CASE("duplicate symbols are rejected") {
  CHECK(code_of([] { Alphabet(U"aba"); }) == Errc::InvalidConfig);
}

TEST_CASE("encode and decode labels") {
  const Alphabet ab(U"ab");
  CHECK(text::encode_labels("ab", ab) == text::LabelSequence{0, 1});
  CHECK(text::encode_labels("", ab).empty());
  CHECK(code_of([&] { text::encode_labels("ax", ab); }) == Errc::UnknownSymbol);

  const std::vector<int> ids = {0, 1};
  CHECK(text::decode_labels(ids, ab) == "ab");
  CHECK(text::decode_labels(std::vector<int>{}, ab) == "");
  const std::vector<int> bad = {5};
  CHECK(code_of([&] { text::decode_labels(bad, ab); }) == Errc::IndexOutOfRange);
  const std::vector<int> blank = {2};
  CHECK(code_of([&] { text::decode_labels(blank, ab); }) == Errc::IndexOutOfRange);
}

TEST_CASE("encode/decode are inverse on normalized strings") {
  std::mt19937_64 gen(17);
  const Alphabet full(U" 'abcdefghijklmnopqrstuvwxyz");
  for (int i = 0; i < 500; ++i) {
    const std::string s = text::normalize_transcript(random_unicode(gen) + "xy z'");
    const auto ids = text::encode_labels(s, full);
    REQUIRE(ids.size() == s.size());
    for (int id : ids) REQUIRE((id >= 0 && id < full.blank_index()));
    REQUIRE(text::decode_labels(ids, full) == s);
  }
}

TEST_CASE("alphabet file round trip keeps space and skips comments") {
  const Alphabet a(U" 'az");
  const std::string body = text::format_alphabet(a);
  CHECK(text::parse_alphabet(body) == a);
  CHECK(text::parse_alphabet("# header\na\n#another\nb\n") == Alphabet(U"ab"));

  testing_support::TempDir dir;
  text::save_alphabet(a, dir / "alphabet.txt");
  CHECK(text::load_alphabet(dir / "alphabet.txt") == a);
}

TEST_CASE("utf8 helpers round trip multi-byte code points") {
  const std::u32string s = U"aé中\U0001F600";
  CHECK(text::utf8_decode(text::utf8_encode(s)) == s);
  CHECK(text::utf8_decode("\xff") == U"�");
}
