#include "asr/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "asr/audio.hpp"
#include "asr/error.hpp"
#include "asr/parallel.hpp"
#include "asr/text.hpp"

namespace fs = std::filesystem;

namespace asr::manifest {
namespace {

constexpr char kHeader[] = "wav_filename,wav_filesize,transcript";

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

// RFC-4180 record splitter; `pos` advances past the record terminator.
std::vector<std::string> next_record(const std::string& s, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < s.size()) {
    const char c = s[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < s.size() && s[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
      } else {
        field.push_back(c);
      }
      ++pos;
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      ++pos;
      if (c == '\r' && pos < s.size() && s[pos] == '\n') ++pos;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
    }
    ++pos;
  }
  if (quoted) throw Error(Errc::ParseError, "unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void SplitSpec::validate() const {
  for (double f : {train_fraction, dev_fraction, test_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(Errc::InvalidConfig, "split fractions must lie in [0,1]");
  }
  if (std::abs(train_fraction + dev_fraction + test_fraction - 1.0) > 1e-9) {
    throw Error(Errc::InvalidConfig, "split fractions must sum to 1");
  }
}

SplitSpec parse_split(const std::string& text, std::uint64_t seed) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "bad split fraction '" + item + "'");
    }
  }
  if (parts.size() != 3) throw Error(Errc::ParseError, "split needs three fractions: train,dev,test");
  SplitSpec spec{parts[0], parts[1], parts[2], seed};
  spec.validate();
  return spec;
}

std::vector<std::pair<std::string, std::string>> read_transcript_index(const fs::path& index) {
  std::ifstream in(index, std::ios::binary);
  if (!in) throw Error(Errc::MissingIndex, "cannot open transcript index " + index.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    auto sep = line.find('\t');
    std::size_t sep_len = 1;
    if (sep == std::string::npos) {
      sep = line.find("\\t");
      sep_len = 2;
    }
    if (sep == std::string::npos) {
      throw Error(Errc::ParseError, "index line without separator: " + line);
    }
    entries.emplace_back(line.substr(0, sep), line.substr(sep + sep_len));
  }
  return entries;
}

ScanResult scan_corpus(const fs::path& root, const fs::path& transcript_index, const ScanOptions& options,
                       std::ostream& diag) {
  const auto index = read_transcript_index(transcript_index);

  // Stem -> source path, lexicographically first on collisions.
  std::map<std::string, fs::path> audio;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
      const auto stem = entry.path().stem().string();
      auto [it, inserted] = audio.emplace(stem, entry.path());
      if (!inserted && entry.path() < it->second) it->second = entry.path();
    }
  }

  struct Job {
    std::string id;
    fs::path source;
    std::string transcript;
  };
  ScanResult result;
  std::vector<Job> jobs;
  std::map<std::string, bool> seen;
  for (const auto& [id, raw] : index) {
    if (seen.count(id)) {
      diag << "SKIP " << id << " duplicate_id\n";
      ++result.skipped_duplicate;
      continue;
    }
    seen[id] = true;
    const auto found = audio.find(id);
    if (found == audio.end()) {
      diag << "SKIP " << id << " missing_audio\n";
      ++result.skipped_missing_audio;
      continue;
    }
    auto transcript = text::normalize_transcript(raw);
    if (transcript.empty()) {
      diag << "SKIP " << id << " empty_transcript\n";
      ++result.skipped_empty_transcript;
      continue;
    }
    jobs.push_back({id, found->second, std::move(transcript)});
  }

  std::vector<std::optional<ManifestRow>> converted(jobs.size());
  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    try {
      const auto clip = audio::to_canonical(audio::read_wav(job.source));
      auto target = options.converted_root / fs::relative(job.source, root);
      fs::create_directories(target.parent_path());
      audio::write_wav(target, clip);
      ManifestRow row;
      row.wav_filename = fs::relative(target, options.manifest_dir).generic_string();
      row.wav_filesize = fs::file_size(target);
      row.transcript = job.transcript;
      converted[i] = std::move(row);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (converted[i]) {
      result.rows.push_back(std::move(*converted[i]));
    } else {
      diag << "SKIP " << jobs[i].id << " bad_audio (" << failures[i] << ")\n";
      ++result.skipped_bad_audio;
    }
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.wav_filename < b.wav_filename; });
  if (result.rows.empty()) throw Error(Errc::NoUsableUtterances, "no audio/transcript pairs survived");
  return result;
}

double split_position(std::uint64_t seed, const std::string& wav_filename) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) feed(static_cast<unsigned char>((seed >> (8 * i)) & 0xFF));
  for (char c : wav_filename) feed(static_cast<unsigned char>(c));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Splits split_corpus(const std::vector<ManifestRow>& rows, const SplitSpec& spec) {
  spec.validate();
  Splits out;
  const double train_edge = spec.train_fraction;
  const double dev_edge = spec.train_fraction + spec.dev_fraction;
  for (const auto& row : rows) {
    const double u = split_position(spec.seed, row.wav_filename);
    if (u < train_edge) {
      out.train.push_back(row);
    } else if (u < dev_edge) {
      out.dev.push_back(row);
    } else {
      out.test.push_back(row);
    }
  }
  return out;
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::string out = kHeader;
  out.push_back('\n');
  for (const auto& row : rows) {
    out += csv_field(row.wav_filename);
    out.push_back(',');
    out += std::to_string(row.wav_filesize);
    out.push_back(',');
    out += csv_field(row.transcript);
    out.push_back('\n');
  }
  return out;
}

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& out) {
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(Errc::IoFailure, "cannot write " + out.string());
  file << format_manifest(rows);
  if (!file) throw Error(Errc::IoFailure, "short write to " + out.string());
}

std::vector<ManifestRow> parse_manifest(const std::string& contents) {
  std::size_t pos = 0;
  const auto header = next_record(contents, pos);
  if (header != std::vector<std::string>{"wav_filename", "wav_filesize", "transcript"}) {
    throw Error(Errc::ParseError, std::string("manifest header must be '") + kHeader + "'");
  }
  std::vector<ManifestRow> rows;
  while (pos < contents.size()) {
    const auto fields = next_record(contents, pos);
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 3) {
      throw Error(Errc::ParseError, "manifest row " + std::to_string(rows.size() + 1) + " has " +
                                        std::to_string(fields.size()) + " fields");
    }
    ManifestRow row;
    row.wav_filename = fields[0];
    try {
      std::size_t used = 0;
      row.wav_filesize = std::stoull(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument(fields[1]);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "bad wav_filesize '" + fields[1] + "'");
    }
    row.transcript = fields[2];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

fs::path resolve_wav(const fs::path& manifest_path, const ManifestRow& row) {
  fs::path wav(row.wav_filename);
  if (wav.is_absolute()) return wav;
  return manifest_path.parent_path() / wav;
}

std::vector<RowProblem> validate_manifest(const fs::path& path) {
  const auto rows = read_manifest(path);
  std::vector<RowProblem> problems;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto report = [&](std::string reason) { problems.push_back({i + 1, row.wav_filename, std::move(reason)}); };
    if (row.transcript.empty()) report("empty transcript");
    else if (!text::is_normalized(row.transcript)) report("transcript not normalized");
    const auto wav = resolve_wav(path, row);
    std::error_code ec;
    const auto size = fs::file_size(wav, ec);
    if (ec) {
      report("file missing");
      continue;
    }
    if (row.wav_filesize == 0 || size != row.wav_filesize) {
      report("wav_filesize " + std::to_string(row.wav_filesize) + " != on-disk " + std::to_string(size));
    }
    try {
      const auto info = audio::inspect_wav(audio::read_file(wav));
      if (info.format_tag != 1 || info.bits_per_sample != 16 || info.channels != 1 ||
          info.sample_rate_hz != audio::kCanonicalRate) {
        report("audio is not mono 16 kHz s16le");
      }
    } catch (const Error& e) {
      report(e.what());
    }
  }
  return problems;
}

}  // namespace asr::manifest
