#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asr/ctc.hpp"
#include "asr/lm.hpp"

namespace asr::eval {

// Levenshtein distance with unit costs.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diagonal = above;
    }
  }
  return row[b.size()];
}

std::size_t edit_distance(std::string_view a, std::string_view b);

std::vector<std::string> split_words(std::string_view s);

// Edit distance over words / characters divided by the reference length.
// Throws Error{EmptyReference}.
double word_error_rate(std::string_view ref, std::string_view hyp);
double char_error_rate(std::string_view ref, std::string_view hyp);

struct EvalRecord {
  std::string wav_filename;
  std::string reference;
  std::string hypothesis;
  double wer = 0.0;
  double cer = 0.0;
  double loss = 0.0;  // +inf when the frames cannot fit the reference
};

struct EvalReport {
  std::size_t count = 0;
  std::size_t infeasible = 0;  // rows left out of mean_loss
  double mean_wer = 0.0;
  double mean_cer = 0.0;
  double mean_loss = 0.0;
  EvalRecord best;
  EvalRecord median;
  EvalRecord worst;
  std::string decoder;
};

// Total order used for ranking: WER, then CER, then file name.
bool ranks_before(const EvalRecord& a, const EvalRecord& b);

// Means plus best/median/worst; the median is element floor((n-1)/2) of the
// ranked list. Throws Error{EmptyCorpus} for no records.
EvalReport summarize(std::vector<EvalRecord> records, std::string decoder = "greedy");

std::string format_report_text(const EvalReport& report);
std::string format_report_json(const EvalReport& report);
// wav_filename,wer,cer,loss,reference,hypothesis
std::string format_records_csv(const std::vector<EvalRecord>& records);

enum class DecoderKind { Greedy, Beam };

struct EvalOptions {
  DecoderKind decoder = DecoderKind::Greedy;
  ctc::BeamConfig beam;
  unsigned workers = 1;
};

struct Evaluation {
  std::vector<EvalRecord> records;  // manifest order
  EvalReport report;
};

// Features -> forward -> CTC loss + decoded hypothesis per manifest row.
Evaluation evaluate(const std::filesystem::path& manifest, const std::filesystem::path& checkpoint,
                    const EvalOptions& options);

// Writes records.csv, report.txt and report.json into dir.
void write_evaluation(const Evaluation& evaluation, const std::filesystem::path& dir);

}  // namespace asr::eval
