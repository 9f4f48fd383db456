#include "asr/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asr/audio.hpp"
#include "asr/error.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace asr::train {
namespace {

constexpr char kMagic[4] = {'A', 'S', 'R', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return end_ - pos_; }

private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw Error(Errc::ChecksumMismatch, "checkpoint payload truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

json model_to_json(const model::ModelConfig& m) {
  return {{"n_input", m.n_input}, {"n_hidden", m.n_hidden}, {"n_output", m.n_output},
          {"relu_clip", m.relu_clip}, {"dropout", m.dropout}, {"seed", m.seed}};
}

model::ModelConfig model_from_json(const json& j) {
  model::ModelConfig m;
  m.n_input = j.at("n_input").get<int>();
  m.n_hidden = j.at("n_hidden").get<int>();
  m.n_output = j.at("n_output").get<int>();
  m.relu_clip = j.at("relu_clip").get<double>();
  m.dropout = j.at("dropout").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

json mfcc_to_json(const features::MfccConfig& c) {
  return {{"window_ms", c.window_ms}, {"step_ms", c.step_ms},       {"n_fft", c.n_fft},
          {"n_mels", c.n_mels},       {"n_coeffs", c.n_coeffs},     {"preemphasis", c.preemphasis},
          {"log_floor", c.log_floor}, {"context", c.context}};
}

features::MfccConfig mfcc_from_json(const json& j) {
  features::MfccConfig c;
  c.window_ms = j.at("window_ms").get<double>();
  c.step_ms = j.at("step_ms").get<double>();
  c.n_fft = j.at("n_fft").get<int>();
  c.n_mels = j.at("n_mels").get<int>();
  c.n_coeffs = j.at("n_coeffs").get<int>();
  c.preemphasis = j.at("preemphasis").get<double>();
  c.log_floor = j.at("log_floor").get<double>();
  c.context = j.at("context").get<int>();
  return c;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const TrainState& state) {
  json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["model"] = model_to_json(state.model_config);
  meta["mfcc"] = mfcc_to_json(state.mfcc);
  std::vector<std::uint32_t> symbols(state.alphabet.symbols().begin(), state.alphabet.symbols().end());
  meta["alphabet"] = symbols;
  meta["epoch"] = state.epoch;
  meta["step"] = state.step;
  meta["best_loss"] = state.best_loss ? json(*state.best_loss) : json(nullptr);
  meta["best_checkpoint"] = state.best_checkpoint;
  meta["epochs_since_improvement"] = state.epochs_since_improvement;
  json tensors = json::array();
  const auto names = model::ModelParams::tensor_names();
  const auto params = state.params.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"rows", params[i]->rows}, {"cols", params[i]->cols}});
  }
  meta["tensors"] = tensors;
  const std::string meta_text = meta.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, meta_text.size());
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  for (const model::ModelParams* set : {&state.params, &state.adam_m, &state.adam_v}) {
    for (const Matrix* m : set->tensors()) {
      for (double v : m->data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  put_u32(out, crc32_of(out.data(), out.size()));
  return out;
}

TrainState deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20) throw Error(Errc::ChecksumMismatch, "checkpoint too short");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(Errc::ChecksumMismatch, "not an ASRC checkpoint");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(i)]) << (8 * i);
  if (crc32_of(bytes.data(), body) != stored) throw Error(Errc::ChecksumMismatch, "CRC-32 does not match");

  Reader in(bytes, body);
  in.text(4);
  const auto version = static_cast<std::uint32_t>(in.u(4));
  if (version != kCheckpointVersion) {
    throw Error(Errc::VersionUnsupported, "checkpoint version " + std::to_string(version));
  }
  const auto meta_len = in.u(8);
  if (meta_len > in.remaining()) throw Error(Errc::ChecksumMismatch, "metadata length exceeds file");
  TrainState state;
  try {
    const json meta = json::parse(in.text(static_cast<std::size_t>(meta_len)));
    state.model_config = model_from_json(meta.at("model"));
    state.mfcc = mfcc_from_json(meta.at("mfcc"));
    std::u32string symbols;
    for (const auto& c : meta.at("alphabet")) symbols.push_back(static_cast<char32_t>(c.get<std::uint32_t>()));
    state.alphabet = text::Alphabet(std::move(symbols));
    state.epoch = meta.at("epoch").get<std::uint64_t>();
    state.step = meta.at("step").get<std::uint64_t>();
    if (!meta.at("best_loss").is_null()) state.best_loss = meta.at("best_loss").get<double>();
    state.best_checkpoint = meta.at("best_checkpoint").get<std::string>();
    state.epochs_since_improvement = meta.at("epochs_since_improvement").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::ChecksumMismatch, std::string("bad checkpoint metadata: ") + e.what());
  }
  state.params = model::zeros(state.model_config);
  state.adam_m = model::zeros(state.model_config);
  state.adam_v = model::zeros(state.model_config);
  for (model::ModelParams* set : {&state.params, &state.adam_m, &state.adam_v}) {
    for (Matrix* m : set->tensors()) {
      for (double& v : m->data) v = std::bit_cast<double>(in.u(8));
    }
  }
  if (in.remaining() != 0) throw Error(Errc::ChecksumMismatch, "trailing bytes after tensors");
  return state;
}

std::string checkpoint_name(std::uint64_t epoch) { return "ckpt-" + std::to_string(epoch) + ".bin"; }

fs::path save_checkpoint(const TrainState& state, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  const auto bytes = serialize_checkpoint(state);
  const fs::path target = dir / checkpoint_name(state.epoch);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoFailure, "short write to " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
  return target;
}

TrainState load_checkpoint(const fs::path& path) { return deserialize_checkpoint(audio::read_file(path)); }

void write_best_marker(const fs::path& dir, const std::string& name) {
  std::ofstream out(dir / "best", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write best marker in " + dir.string());
  out << name << "\n";
}

std::optional<std::string> read_best_marker(const fs::path& dir) {
  std::ifstream in(dir / "best", std::ios::binary);
  if (!in) return std::nullopt;
  std::string name;
  std::getline(in, name);
  if (name.empty()) return std::nullopt;
  return name;
}

fs::path resolve_checkpoint(const fs::path& path) {
  if (!fs::is_directory(path)) return path;
  const auto best = read_best_marker(path);
  if (!best) throw Error(Errc::IoFailure, "no best marker in " + path.string());
  return path / *best;
}

}  // namespace asr::train
