// Writes a synthetic tone corpus (WAV files plus transcript index).
#include <iostream>

#include "CLI11.hpp"
#include "asr/error.hpp"
#include "fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic tone corpus", "asr-fixture"};
  std::string out;
  std::string set = "smoke";
  std::uint64_t seed = 7;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--set", set, "smoke (20 utterances) or overfit (5 utterances)")
      ->check(CLI::IsMember({"smoke", "overfit"}));
  app.add_option("--seed", seed, "dither seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto& transcripts =
        set == "smoke" ? asr::fixture::smoke_transcripts() : asr::fixture::overfit_transcripts();
    std::cout << asr::fixture::write_corpus(out, transcripts, seed).string() << "\n";
  } catch (const asr::Error& e) {
    std::cerr << "asr-fixture: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
