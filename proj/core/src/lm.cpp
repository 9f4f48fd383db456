#include "asr/lm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "asr/error.hpp"
#include "asr/text.hpp"

namespace asr::lm {
namespace {

constexpr char32_t kBoundaryGlyph = U'^';

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view field_value(std::string_view field, std::string_view key) {
  if (field.substr(0, key.size()) != key) throw Error(Errc::ParseError, "expected '" + std::string(key) + "'");
  return field.substr(key.size());
}

}  // namespace

NgramModel::NgramModel(int order, double k, std::u32string symbols)
    : order_(order), k_(k), symbols_(std::move(symbols)) {
  if (order_ < 1) throw Error(Errc::InvalidConfig, "n-gram order must be >= 1");
  if (!(k_ >= 0.0) || !std::isfinite(k_)) throw Error(Errc::InvalidConfig, "smoothing k must be >= 0");
  std::set<char32_t> seen;
  for (char32_t c : symbols_) {
    if (c == kBoundaryGlyph) throw Error(Errc::InvalidConfig, "'^' is reserved for the boundary symbol");
    if (!seen.insert(c).second) throw Error(Errc::InvalidConfig, "duplicate vocabulary symbol");
  }
}

std::optional<int> NgramModel::id(char32_t c) const noexcept {
  const auto pos = symbols_.find(c);
  if (pos == std::u32string::npos) return std::nullopt;
  return static_cast<int>(pos);
}

void NgramModel::add(const Context& context, int next, std::uint64_t count) {
  auto& entry = counts_[context];
  entry.total += count;
  entry.next[next] += count;
}

NgramModel::Context NgramModel::context_for(std::span<const int> history) const {
  const auto width = static_cast<std::size_t>(order_ - 1);
  Context ctx(width, boundary_id());
  const std::size_t take = std::min(width, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

double NgramModel::log_prob(const Context& context, int next) const {
  const double vocab = static_cast<double>(vocab_size());
  const auto found = counts_.find(context);
  if (found == counts_.end() || found->second.total == 0) return -std::log(vocab);
  const auto& entry = found->second;
  const auto hit = entry.next.find(next);
  const double count = hit == entry.next.end() ? 0.0 : static_cast<double>(hit->second);
  const double numerator = count + k_;
  if (numerator == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(numerator) - std::log(static_cast<double>(entry.total) + k_ * vocab);
}

double NgramModel::score(std::string_view text) const {
  std::vector<int> ids;
  for (char32_t c : text::utf8_decode(text)) {
    const auto sym = id(c);
    if (!sym) throw Error(Errc::UnknownSymbol, "'" + text::utf8_encode(c) + "' not in n-gram vocabulary");
    ids.push_back(*sym);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    total += log_prob_after(std::span<const int>(ids.data(), i), ids[i]);
  }
  return total;
}

NgramModel train_ngram(std::span<const std::string> transcripts, int order, double k) {
  if (transcripts.empty()) throw Error(Errc::EmptyCorpus, "no transcripts for n-gram training");
  const auto alphabet = text::build_alphabet(transcripts);
  NgramModel model(order, k, alphabet.symbols());
  for (const auto& line : transcripts) {
    std::vector<int> ids;
    for (char32_t c : text::utf8_decode(line)) ids.push_back(*model.id(c));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      model.add(model.context_for(std::span<const int>(ids.data(), i)), ids[i]);
    }
  }
  return model;
}

std::string format_ngram(const NgramModel& model) {
  auto glyph = [&](int id) {
    return id == model.boundary_id() ? text::utf8_encode(kBoundaryGlyph)
                                     : text::utf8_encode(model.symbols()[static_cast<std::size_t>(id)]);
  };
  std::ostringstream header;
  header.precision(17);
  header << "ngram\torder=" << model.order() << "\tk=" << model.k() << "\tvocab=" << text::utf8_encode(model.symbols())
         << "\n";
  std::vector<std::string> lines;
  for (const auto& [context, entry] : model.counts()) {
    std::string ctx;
    for (int id : context) ctx += glyph(id);
    for (const auto& [next, count] : entry.next) {
      lines.push_back(ctx + "\t" + glyph(next) + "\t" + std::to_string(count) + "\n");
    }
  }
  std::sort(lines.begin(), lines.end());
  std::string out = header.str();
  for (const auto& l : lines) out += l;
  return out;
}

NgramModel parse_ngram(std::string_view contents) {
  std::size_t pos = contents.find('\n');
  if (pos == std::string_view::npos) throw Error(Errc::ParseError, "n-gram file has no header line");
  const auto header = split_tabs(contents.substr(0, pos));
  if (header.size() != 4 || header[0] != "ngram") throw Error(Errc::ParseError, "bad n-gram header");
  int order = 0;
  const auto order_text = field_value(header[1], "order=");
  if (std::from_chars(order_text.data(), order_text.data() + order_text.size(), order).ec != std::errc()) {
    throw Error(Errc::ParseError, "bad n-gram order");
  }
  double k = 0.0;
  try {
    k = std::stod(std::string(field_value(header[2], "k=")));
  } catch (const std::invalid_argument&) {
    throw Error(Errc::ParseError, "bad smoothing constant");
  }
  NgramModel model(order, k, text::utf8_decode(field_value(header[3], "vocab=")));

  auto to_id = [&](char32_t c) {
    if (c == kBoundaryGlyph) return model.boundary_id();
    const auto id = model.id(c);
    if (!id) throw Error(Errc::ParseError, "n-gram symbol outside vocabulary");
    return *id;
  };
  ++pos;
  while (pos < contents.size()) {
    auto end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    const auto line = contents.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) throw Error(Errc::ParseError, "n-gram line needs 3 tab-separated fields");
    const auto ctx_cps = text::utf8_decode(fields[0]);
    const auto sym_cps = text::utf8_decode(fields[1]);
    if (ctx_cps.size() != static_cast<std::size_t>(order - 1) || sym_cps.size() != 1) {
      throw Error(Errc::ParseError, "n-gram line has wrong context or symbol width");
    }
    NgramModel::Context ctx;
    for (char32_t c : ctx_cps) ctx.push_back(to_id(c));
    std::uint64_t count = 0;
    if (std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count).ec != std::errc()) {
      throw Error(Errc::ParseError, "bad n-gram count");
    }
    model.add(ctx, to_id(sym_cps.front()), count);
  }
  return model;
}

void save_ngram(const NgramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << format_ngram(model);
}

NgramModel load_ngram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ngram(ss.str());
}

}  // namespace asr::lm
