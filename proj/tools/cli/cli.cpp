#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "asr/audio.hpp"
#include "asr/error.hpp"
#include "asr/eval.hpp"
#include "asr/lm.hpp"
#include "asr/manifest.hpp"
#include "asr/text.hpp"
#include "asr/train.hpp"
#include "config.hpp"

namespace fs = std::filesystem;

namespace asr::cli {
namespace {

// Exclusive marker in the output directory; removed on scope exit.
class OutputLock {
public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".asr.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw Error(Errc::IoFailure, "output directory " + dir.string() + " is locked by another run (remove " +
                                       path_.string() + " if stale)");
    }
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

private:
  fs::path path_;
};

struct Flags {
  std::string config_path;
  std::map<std::string, std::string> scalars;
  std::vector<std::string> augment;
  std::map<std::string, CLI::Option*> options;
};

const char* type_label(ValueType type) {
  switch (type) {
    case ValueType::Integer: return "INT";
    case ValueType::Real: return "FLOAT";
    case ValueType::Boolean: return "BOOL";
    case ValueType::String: return "TEXT";
    case ValueType::StringList: return "SPEC";
  }
  return "TEXT";
}

void add_config_flags(CLI::App& sub, Flags& flags) {
  sub.add_option("--config", flags.config_path, "JSON configuration file");
  for (const auto& key : config_keys()) {
    const std::string flag = "--" + key.name;
    CLI::Option* opt = nullptr;
    if (key.type == ValueType::StringList) {
      opt = sub.add_option(flag, flags.augment, key.help)->take_all();
    } else {
      opt = sub.add_option(flag, flags.scalars[key.name], key.help);
    }
    opt->default_str(format_value(key.fallback));
    opt->type_name(type_label(key.type));
    flags.options[key.name] = opt;
  }
}

// defaults < config file < flags
PipelineConfig merge(const Flags& flags) {
  PipelineConfig cfg = flags.config_path.empty() ? PipelineConfig() : load_config(flags.config_path);
  for (const auto& key : config_keys()) {
    if (flags.options.at(key.name)->count() == 0) continue;
    if (key.type == ValueType::StringList) {
      cfg.set(key.name, flags.augment);
    } else {
      cfg.set_from_text(key.name, flags.scalars.at(key.name));
    }
  }
  return cfg;
}

const std::string& required(const PipelineConfig& cfg, const char* key) {
  const std::string& v = cfg.string(key);
  if (v.empty()) throw Error(Errc::InvalidConfig, std::string("--") + key + " is required");
  return v;
}

eval::EvalOptions decoder_options(const PipelineConfig& cfg, std::optional<lm::NgramModel>& lm_storage) {
  eval::EvalOptions opts;
  opts.workers = cfg.workers();
  const std::string& decoder = cfg.string("decoder");
  if (decoder == "greedy") {
    opts.decoder = eval::DecoderKind::Greedy;
  } else if (decoder == "beam") {
    opts.decoder = eval::DecoderKind::Beam;
    opts.beam = cfg.beam();
    if (!cfg.string("lm.path").empty()) {
      lm_storage = lm::load_ngram(cfg.string("lm.path"));
      opts.beam.lm = &*lm_storage;
    }
  } else {
    throw Error(Errc::InvalidConfig, "decoder must be greedy or beam, got '" + decoder + "'");
  }
  return opts;
}

int cmd_prepare(const PipelineConfig& cfg, std::ostream& err) {
  const fs::path corpus = required(cfg, "corpus");
  const fs::path index = required(cfg, "index");
  const auto split = cfg.split();
  const fs::path out = cfg.out_dir();
  OutputLock lock(out);

  manifest::ScanOptions options;
  options.converted_root = out / "wav";
  options.manifest_dir = out;
  options.workers = cfg.workers();
  const auto scan = manifest::scan_corpus(corpus, index, options, err);
  const auto splits = manifest::split_corpus(scan.rows, split);
  manifest::write_manifest(splits.train, out / "train.csv");
  manifest::write_manifest(splits.dev, out / "dev.csv");
  manifest::write_manifest(splits.test, out / "test.csv");

  std::vector<std::string> transcripts;
  for (const auto& row : scan.rows) transcripts.push_back(row.transcript);
  text::save_alphabet(text::build_alphabet(transcripts), out / "alphabet.txt");

  err << "prepared " << scan.rows.size() << " utterances: train=" << splits.train.size()
      << " dev=" << splits.dev.size() << " test=" << splits.test.size() << " skipped="
      << scan.skipped_missing_audio + scan.skipped_empty_transcript + scan.skipped_bad_audio +
             scan.skipped_duplicate
      << "\n";
  return 0;
}

int cmd_train(const PipelineConfig& cfg, std::ostream& err) {
  const auto tcfg = cfg.train();
  const auto mfcc = cfg.mfcc();
  const auto model = cfg.model();
  OutputLock lock(cfg.out_dir());

  const auto train_set = train::load_dataset(cfg.path("train_manifest"), cfg.workers());
  std::vector<train::Utterance> dev_set;
  if (fs::exists(cfg.path("dev_manifest"))) dev_set = train::load_dataset(cfg.path("dev_manifest"), cfg.workers());

  text::Alphabet alphabet;
  if (fs::exists(cfg.path("alphabet"))) {
    alphabet = text::load_alphabet(cfg.path("alphabet"));
  } else {
    std::vector<std::string> transcripts;
    for (const auto& u : train_set) transcripts.push_back(u.transcript);
    alphabet = text::build_alphabet(transcripts);
  }
  const auto result = train::run_training(train_set, dev_set, alphabet, mfcc, model, tcfg, err);
  if (!result.last_checkpoint.empty()) err << "checkpoint " << result.last_checkpoint.string() << "\n";
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, std::ostream& out) {
  std::optional<lm::NgramModel> lm_storage;
  const auto opts = decoder_options(cfg, lm_storage);
  OutputLock lock(cfg.out_dir());
  const auto evaluation = eval::evaluate(cfg.path("manifest"), cfg.path("checkpoint"), opts);
  eval::write_evaluation(evaluation, cfg.path("report_dir"));
  out << eval::format_report_text(evaluation.report);
  return 0;
}

int cmd_transcribe(const PipelineConfig& cfg, std::ostream& out) {
  const fs::path wav = required(cfg, "wav");
  std::optional<lm::NgramModel> lm_storage;
  const auto opts = decoder_options(cfg, lm_storage);
  const auto state = train::load_checkpoint(train::resolve_checkpoint(cfg.path("checkpoint")));
  const auto clip = audio::to_canonical(audio::read_wav(wav));
  const auto feats = features::MfccPlan(state.mfcc, audio::kCanonicalRate).compute(clip);
  const auto fwd = model::forward(state.params, state.model_config, feats.frames);
  const std::string hyp = opts.decoder == eval::DecoderKind::Greedy
                              ? ctc::greedy_decode(fwd.log_probs, state.alphabet)
                              : ctc::beam_decode(fwd.log_probs, opts.beam, state.alphabet);
  out << text::normalize_transcript(hyp) << "\n";
  return 0;
}

int cmd_lm_train(const PipelineConfig& cfg, std::ostream& err) {
  OutputLock lock(cfg.out_dir());
  std::vector<std::string> transcripts;
  for (const auto& row : manifest::read_manifest(cfg.path("train_manifest"))) transcripts.push_back(row.transcript);
  const auto model = lm::train_ngram(transcripts, static_cast<int>(cfg.integer("lm.order")), cfg.real("lm.k"));
  lm::save_ngram(model, cfg.path("lm.path"));
  err << "wrote " << cfg.path("lm.path").string() << " (" << model.counts().size() << " contexts)\n";
  return 0;
}

int cmd_validate(const PipelineConfig& cfg, std::ostream& out) {
  const auto problems = manifest::validate_manifest(cfg.path("manifest"));
  for (const auto& p : problems) out << "row " << p.line << " " << p.wav_filename << ": " << p.reason << "\n";
  return problems.empty() ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Character-level CTC speech recognition pipeline", "asr"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"prepare", "scan a corpus, convert audio and write train/dev/test manifests plus alphabet.txt"},
      {"train", "train or fine-tune the acoustic model"},
      {"evaluate", "score a manifest and write records.csv, report.txt and report.json"},
      {"transcribe", "print the hypothesis for one WAV file"},
      {"lm-train", "train a character n-gram model on the train manifest"},
      {"validate", "check every manifest row; exit 1 if any is invalid"},
  };
  std::map<std::string, Flags> flags;
  for (const auto& s : subs) add_config_flags(*app.add_subcommand(s.name, s.help), flags[s.name]);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "asr: " << e.what() << "\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const PipelineConfig cfg = merge(flags.at(name));
    if (name == "prepare") return cmd_prepare(cfg, err);
    if (name == "train") return cmd_train(cfg, err);
    if (name == "evaluate") return cmd_evaluate(cfg, out);
    if (name == "transcribe") return cmd_transcribe(cfg, out);
    if (name == "lm-train") return cmd_lm_train(cfg, err);
    return cmd_validate(cfg, out);
  } catch (const Error& e) {
    err << "asr " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "asr " << name << ": internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace asr::cli
