#include <algorithm>
#include <cmath>
#include <random>

#include "asr/error.hpp"
#include "asr/lm.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace asr;

namespace {

double p_after(const lm::NgramModel& m, const std::string& history, char32_t next) {
  std::vector<int> ids;
  for (char c : history) ids.push_back(*m.id(static_cast<char32_t>(c)));
  return std::exp(m.log_prob_after(ids, *m.id(next)));
}

}  // namespace

TEST_CASE("unsmoothed estimates follow the counts") {
  const std::vector<std::string> one = {"ab"};
  CHECK(p_after(lm::train_ngram(one, 2, 0.0), "a", U'b') == doctest::Approx(1.0));
  const std::vector<std::string> two = {"ab", "ac"};
  const auto m = lm::train_ngram(two, 2, 0.0);
  CHECK(p_after(m, "a", U'b') == doctest::Approx(0.5));
  CHECK(p_after(m, "a", U'c') == doctest::Approx(0.5));
}

TEST_CASE("add-k estimate by hand") {
  const std::vector<std::string> corpus = {"ab"};
  const auto m = lm::train_ngram(corpus, 2, 0.5);
  CHECK(m.vocab_size() == 3);
  CHECK(p_after(m, "a", U'b') == doctest::Approx(0.6).epsilon(1e-12));
  // P(a | boundary) = (1 + 0.5) / (1 + 1.5)
  const double expected = std::log(0.6) + std::log(0.6);
  CHECK(m.score("ab") == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.score("") == 0.0);
}

TEST_CASE("conditional distributions normalize and are never zero with k > 0") {
  const std::vector<std::string> corpus = {"the cat", "the hat", "a cat's hat", "that"};
  for (int order : {1, 2, 3, 5}) {
    const auto m = lm::train_ngram(corpus, order, 0.5);
    for (const auto& [context, counts] : m.counts()) {
      double total = 0.0;
      for (std::size_t v = 0; v < m.vocab_size(); ++v) {
        const double p = std::exp(m.log_prob(context, static_cast<int>(v)));
        CHECK(p > 0.0);
        total += p;
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("unseen contexts are uniform") {
  const std::vector<std::string> corpus = {"ab"};
  const auto m = lm::train_ngram(corpus, 2, 0.5);
  CHECK(p_after(m, "b", U'a') == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("score is invariant to corpus order") {
  std::vector<std::string> corpus = {"one two", "three", "two one", "o'neill", "tee"};
  const auto a = lm::train_ngram(corpus, 3, 0.5);
  std::mt19937_64 gen(1);
  std::shuffle(corpus.begin(), corpus.end(), gen);
  const auto b = lm::train_ngram(corpus, 3, 0.5);
  CHECK(a == b);
  CHECK(a.score("two tree") == b.score("two tree"));
}

TEST_CASE("errors") {
  const std::vector<std::string> none;
  CHECK_THROWS_AS(lm::train_ngram(none, 2, 0.5), Error);
  const std::vector<std::string> corpus = {"ab"};
  CHECK_THROWS_AS(lm::train_ngram(corpus, 0, 0.5), Error);
  const auto m = lm::train_ngram(corpus, 2, 0.5);
  try {
    m.score("abz");
    FAIL("expected UnknownSymbol");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownSymbol);
  }
}

TEST_CASE("text format round trip is exact and sorted") {
  const std::vector<std::string> corpus = {"it's a cat", "a bat", "tab"};
  const auto m = lm::train_ngram(corpus, 3, 0.25);
  const std::string body = lm::format_ngram(m);
  CHECK(body.rfind("ngram\torder=3\tk=0.25\tvocab=", 0) == 0);
  CHECK(lm::parse_ngram(body) == m);
  CHECK(lm::format_ngram(lm::parse_ngram(body)) == body);
  // count lines after the header are sorted
  std::vector<std::string> lines;
  std::size_t pos = body.find('\n') + 1;
  while (pos < body.size()) {
    const auto end = body.find('\n', pos);
    lines.push_back(body.substr(pos, end - pos));
    pos = end + 1;
  }
  CHECK(std::is_sorted(lines.begin(), lines.end()));

  testing_support::TempDir dir;
  lm::save_ngram(m, dir / "lm.txt");
  CHECK(lm::load_ngram(dir / "lm.txt") == m);
  CHECK_THROWS_AS(lm::parse_ngram("bogus\n"), Error);
}
