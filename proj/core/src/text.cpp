#include "asr/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "asr/error.hpp"

namespace asr::text {

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(U'�');
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string utf8_encode(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) out += utf8_encode(c);
  return out;
}

std::string normalize_transcript(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  // Non-ASCII code points never survive, so a byte-level pass is enough:
  // every byte >= 0x80 belongs to such a code point and maps to a boundary.
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || c == '\'') {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

bool is_normalized(std::string_view s) { return normalize_transcript(s) == s; }

Alphabet::Alphabet(std::u32string symbols) : symbols_(std::move(symbols)) {
  std::set<char32_t> seen;
  for (char32_t c : symbols_) {
    if (!seen.insert(c).second) {
      throw Error(Errc::InvalidConfig, "duplicate alphabet symbol '" + utf8_encode(c) + "'");
    }
  }
}

char32_t Alphabet::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw Error(Errc::IndexOutOfRange, "label id " + std::to_string(id));
  }
  return symbols_[static_cast<std::size_t>(id)];
}

std::optional<int> Alphabet::find(char32_t c) const noexcept {
  const auto pos = symbols_.find(c);
  if (pos == std::u32string::npos) return std::nullopt;
  return static_cast<int>(pos);
}

bool Alphabet::covers(std::string_view utf8) const {
  for (char32_t c : utf8_decode(utf8)) {
    if (!find(c)) return false;
  }
  return true;
}

Alphabet build_alphabet(std::span<const std::string> transcripts) {
  if (transcripts.empty()) throw Error(Errc::EmptyCorpus, "no transcripts");
  std::set<char32_t> seen;
  for (const auto& t : transcripts) {
    for (char32_t c : utf8_decode(t)) seen.insert(c);
  }
  std::u32string symbols;
  if (seen.erase(U' ')) symbols.push_back(U' ');
  symbols.append(seen.begin(), seen.end());
  return Alphabet(std::move(symbols));
}

LabelSequence encode_labels(std::string_view text, const Alphabet& alphabet) {
  LabelSequence ids;
  for (char32_t c : utf8_decode(text)) {
    const auto id = alphabet.find(c);
    if (!id) throw Error(Errc::UnknownSymbol, "'" + utf8_encode(c) + "'");
    ids.push_back(*id);
  }
  return ids;
}

std::string decode_labels(std::span<const int> ids, const Alphabet& alphabet) {
  std::u32string out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(alphabet.symbol(id));
  return utf8_encode(out);
}

std::string format_alphabet(const Alphabet& alphabet) {
  std::string out = "# one symbol per line; the CTC blank is implicit\n";
  for (char32_t c : alphabet.symbols()) {
    out += utf8_encode(c);
    out.push_back('\n');
  }
  return out;
}

Alphabet parse_alphabet(std::string_view contents) {
  std::u32string symbols;
  std::size_t start = 0;
  int line_no = 0;
  while (start < contents.size()) {
    auto end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto cps = utf8_decode(line);
    if (cps.size() != 1) {
      throw Error(Errc::ParseError, "alphabet line " + std::to_string(line_no) +
                                        " must hold exactly one character");
    }
    symbols.push_back(cps.front());
  }
  return Alphabet(std::move(symbols));
}

void save_alphabet(const Alphabet& alphabet, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << format_alphabet(alphabet);
}

Alphabet load_alphabet(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_alphabet(ss.str());
}

}  // namespace asr::text
