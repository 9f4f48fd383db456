#include "asr/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>

#include "asr/checkpoint.hpp"
#include "asr/error.hpp"
#include "asr/features.hpp"
#include "asr/model.hpp"
#include "asr/parallel.hpp"
#include "asr/text.hpp"
#include "asr/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace asr::eval {
namespace {

std::string fixed6(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

nlohmann::json record_json(const EvalRecord& r) {
  return {{"wav_filename", r.wav_filename}, {"reference", r.reference}, {"hypothesis", r.hypothesis},
          {"wer", r.wer}, {"cer", r.cer},
          {"loss", std::isfinite(r.loss) ? nlohmann::json(r.loss) : nlohmann::json(nullptr)}};
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << body;
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const auto ca = text::utf8_decode(a);
  const auto cb = text::utf8_decode(b);
  return edit_distance<char32_t>(ca, cb);
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(' ', start);
    if (end == std::string_view::npos) end = s.size();
    if (end > start) words.emplace_back(s.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

double word_error_rate(std::string_view ref, std::string_view hyp) {
  const auto r = split_words(ref);
  const auto h = split_words(hyp);
  if (r.empty()) throw Error(Errc::EmptyReference, "reference has no words");
  return static_cast<double>(edit_distance<std::string>(r, h)) / static_cast<double>(r.size());
}

double char_error_rate(std::string_view ref, std::string_view hyp) {
  const auto r = text::utf8_decode(ref);
  const auto h = text::utf8_decode(hyp);
  if (r.empty()) throw Error(Errc::EmptyReference, "reference has no characters");
  return static_cast<double>(edit_distance<char32_t>(r, h)) / static_cast<double>(r.size());
}

bool ranks_before(const EvalRecord& a, const EvalRecord& b) {
  if (a.wer != b.wer) return a.wer < b.wer;
  if (a.cer != b.cer) return a.cer < b.cer;
  return a.wav_filename < b.wav_filename;
}

EvalReport summarize(std::vector<EvalRecord> records, std::string decoder) {
  if (records.empty()) throw Error(Errc::EmptyCorpus, "no evaluation records");
  std::sort(records.begin(), records.end(), ranks_before);
  EvalReport report;
  report.count = records.size();
  report.decoder = std::move(decoder);
  double wer = 0.0, cer = 0.0, loss = 0.0;
  std::size_t finite = 0;
  for (const auto& r : records) {
    wer += r.wer;
    cer += r.cer;
    if (std::isfinite(r.loss)) {
      loss += r.loss;
      ++finite;
    }
  }
  const auto n = static_cast<double>(records.size());
  report.infeasible = records.size() - finite;
  report.mean_wer = wer / n;
  report.mean_cer = cer / n;
  report.mean_loss = finite > 0 ? loss / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  report.best = records.front();
  report.median = records[(records.size() - 1) / 2];
  report.worst = records.back();
  return report;
}

std::string format_report_text(const EvalReport& report) {
  auto line = [](const char* label, const EvalRecord& r) {
    return std::string(label) + " " + r.wav_filename + " WER " + fixed6(r.wer) + " CER " + fixed6(r.cer) + " loss " +
           fixed6(r.loss) + "\n" + "  ref: " + r.reference + "\n" + "  hyp: " + r.hypothesis + "\n";
  };
  std::string out;
  out += "decoder " + report.decoder + "\n";
  out += "count " + std::to_string(report.count) + "\n";
  out += "mean WER " + fixed6(report.mean_wer) + "\n";
  out += "mean CER " + fixed6(report.mean_cer) + "\n";
  out += "mean loss " + fixed6(report.mean_loss) + "\n";
  if (report.infeasible > 0) out += "infeasible " + std::to_string(report.infeasible) + "\n";
  out += line("best", report.best);
  out += line("median", report.median);
  out += line("worst", report.worst);
  return out;
}

std::string format_report_json(const EvalReport& report) {
  nlohmann::json j;
  j["count"] = report.count;
  j["decoder"] = report.decoder;
  j["mean_wer"] = report.mean_wer;
  j["mean_cer"] = report.mean_cer;
  j["mean_loss"] = std::isfinite(report.mean_loss) ? nlohmann::json(report.mean_loss) : nlohmann::json(nullptr);
  j["infeasible"] = report.infeasible;
  j["best"] = record_json(report.best);
  j["median"] = record_json(report.median);
  j["worst"] = record_json(report.worst);
  return j.dump(2) + "\n";
}

std::string format_records_csv(const std::vector<EvalRecord>& records) {
  std::string out = "wav_filename,wer,cer,loss,reference,hypothesis\n";
  for (const auto& r : records) {
    out += csv_field(r.wav_filename) + "," + fixed6(r.wer) + "," + fixed6(r.cer) + "," + fixed6(r.loss) + "," +
           csv_field(r.reference) + "," + csv_field(r.hypothesis) + "\n";
  }
  return out;
}

Evaluation evaluate(const fs::path& manifest_path, const fs::path& checkpoint, const EvalOptions& options) {
  const train::TrainState state = train::load_checkpoint(train::resolve_checkpoint(checkpoint));
  const auto data = train::load_dataset(manifest_path, options.workers);
  const features::MfccPlan plan(state.mfcc, audio::kCanonicalRate);
  const int blank = state.alphabet.blank_index();

  Evaluation out;
  out.records.resize(data.size());
  parallel_for(data.size(), options.workers, [&](std::size_t i) {
    const auto& utt = data[i];
    EvalRecord& rec = out.records[i];
    rec.wav_filename = utt.name;
    rec.reference = text::normalize_transcript(utt.transcript);
    const auto feats = plan.compute(utt.clip);
    const auto fwd = model::forward(state.params, state.model_config, feats.frames);
    const std::string raw_hyp = options.decoder == DecoderKind::Greedy
                                    ? ctc::greedy_decode(fwd.log_probs, state.alphabet)
                                    : ctc::beam_decode(fwd.log_probs, options.beam, state.alphabet);
    rec.hypothesis = text::normalize_transcript(raw_hyp);
    rec.wer = word_error_rate(rec.reference, rec.hypothesis);
    rec.cer = char_error_rate(rec.reference, rec.hypothesis);
    if (!state.alphabet.covers(rec.reference)) {
      throw Error(Errc::AlphabetMismatch, utt.name + ": reference not covered by checkpoint alphabet");
    }
    const auto labels = text::encode_labels(rec.reference, state.alphabet);
    try {
      rec.loss = ctc::ctc_loss_grad(fwd.log_probs, labels, blank).loss;
    } catch (const Error& e) {
      if (e.code() != Errc::Infeasible) throw;
      rec.loss = std::numeric_limits<double>::infinity();
    }
  });
  out.report = summarize(out.records, options.decoder == DecoderKind::Greedy ? "greedy" : "beam");
  return out;
}

void write_evaluation(const Evaluation& evaluation, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());
  write_text(dir / "records.csv", format_records_csv(evaluation.records));
  write_text(dir / "report.txt", format_report_text(evaluation.report));
  write_text(dir / "report.json", format_report_json(evaluation.report));
}

}  // namespace asr::eval
