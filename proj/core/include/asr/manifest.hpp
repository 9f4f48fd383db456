#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace asr::manifest {

// One CSV line. wav_filename is stored as written in the CSV; relative paths
// resolve against the directory holding the manifest.
struct ManifestRow {
  std::string wav_filename;
  std::uint64_t wav_filesize = 0;
  std::string transcript;

  bool operator==(const ManifestRow&) const = default;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 42;

  // Throws Error{InvalidConfig}.
  void validate() const;
};

// "0.8,0.1,0.1" -> fractions. Throws Error{ParseError | InvalidConfig}.
SplitSpec parse_split(const std::string& text, std::uint64_t seed);

struct Splits {
  std::vector<ManifestRow> train;
  std::vector<ManifestRow> dev;
  std::vector<ManifestRow> test;
};

struct ScanOptions {
  // Converted canonical audio is written below this directory, mirroring the
  // source tree. Manifest paths are relative to manifest_dir.
  std::filesystem::path converted_root;
  std::filesystem::path manifest_dir;
  unsigned workers = 1;
};

struct ScanResult {
  std::vector<ManifestRow> rows;  // sorted by wav_filename
  std::size_t skipped_missing_audio = 0;
  std::size_t skipped_empty_transcript = 0;
  std::size_t skipped_bad_audio = 0;
  std::size_t skipped_duplicate = 0;
};

// Reads `id<TAB>raw transcript` lines. A line without a TAB may use the two
// character escape "\t" as its separator.
std::vector<std::pair<std::string, std::string>> read_transcript_index(
    const std::filesystem::path& index);

// Pairs <id>.wav files found anywhere below `root` with index entries,
// converts audio to mono 16 kHz s16le and normalizes transcripts. Skipped ids
// are reported as `SKIP <id> <reason>` lines on `diag`.
// Throws Error{MissingIndex | NoUsableUtterances}.
ScanResult scan_corpus(const std::filesystem::path& root, const std::filesystem::path& transcript_index,
                       const ScanOptions& options, std::ostream& diag);

// Value in [0, 1) from FNV-1a over (seed, wav_filename).
double split_position(std::uint64_t seed, const std::string& wav_filename);

// Deterministic, order-independent three-way partition.
Splits split_corpus(const std::vector<ManifestRow>& rows, const SplitSpec& spec);

std::string format_manifest(const std::vector<ManifestRow>& rows);
void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& out);

// Throws Error{IoFailure | ParseError}.
std::vector<ManifestRow> parse_manifest(const std::string& contents);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

std::filesystem::path resolve_wav(const std::filesystem::path& manifest_path, const ManifestRow& row);

struct RowProblem {
  std::size_t line = 0;  // 1-based data row
  std::string wav_filename;
  std::string reason;
};

// Checks every ManifestRow invariant against the file system.
std::vector<RowProblem> validate_manifest(const std::filesystem::path& path);

}  // namespace asr::manifest
