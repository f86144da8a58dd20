#include "idiomkit/pvp.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "pvp";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

bool is_sentence_punct(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

Pattern::Pattern(std::string id, std::string template_text, std::string prompt_language)
    : id_(std::move(id)), template_(std::move(template_text)),
      prompt_language_(std::move(prompt_language)) {
  static const std::regex placeholder(R"(\b(X|BLANK|IDIOM(?:_[0-9]+)?)\b)");
  using Kind = Segment::Kind;
  std::size_t blanks = 0, sentences = 0, last = 0;
  for (auto it = std::sregex_iterator(template_.begin(), template_.end(), placeholder);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    if (pos > last) segments_.push_back({Kind::kText, template_.substr(last, pos - last), 0});
    const std::string name = m.str(1);
    Segment seg;
    if (name == "X") {
      seg.kind = Kind::kSentence;
      ++sentences;
    } else if (name == "BLANK") {
      seg.kind = Kind::kBlank;
      ++blanks;
    } else if (name == "IDIOM") {
      seg.kind = Kind::kIdiom;
    } else {
      seg.kind = Kind::kIdiomWord;
      seg.word = std::stoul(name.substr(6));
      if (seg.word == 0) {
        fail(ErrorKind::kInvariant, "pattern " + id_ + ": IDIOM_k requires k >= 1");
      }
    }
    segments_.push_back(seg);
    last = pos + static_cast<std::size_t>(m.length(0));
  }
  if (last < template_.size()) segments_.push_back({Kind::kText, template_.substr(last), 0});
  if (blanks != 1) {
    fail(ErrorKind::kInvariant, "pattern " + id_ + " must contain exactly one BLANK, found " +
                                    std::to_string(blanks));
  }
  if (sentences > 1) fail(ErrorKind::kInvariant, "pattern " + id_ + " has more than one X");
}

bool Pattern::uses_idiom() const {
  return std::any_of(segments_.begin(), segments_.end(), [](const Segment& s) {
    return s.kind == Segment::Kind::kIdiom || s.kind == Segment::Kind::kIdiomWord;
  });
}

PatternVerbalizerPair::PatternVerbalizerPair(Pattern p, Verbalizer v)
    : pattern(std::move(p)), verbalizer(std::move(v)) {
  if (verbalizer.literal_token.empty() || verbalizer.idiom_token.empty()) {
    fail(ErrorKind::kInvariant, "verbalizer of " + pattern.id() + " has an empty token");
  }
  if (verbalizer.literal_token == verbalizer.idiom_token) {
    fail(ErrorKind::kInvariant, "verbalizer of " + pattern.id() + " maps both classes to '" +
                                    verbalizer.literal_token + "'");
  }
}

std::vector<PatternVerbalizerPair> builtin_pvps(const std::string& prompt_language) {
  if (prompt_language == "EN") {
    return {
        {Pattern("P1", "X: BLANK", "EN"), {"literal", "phrase"}},
        {Pattern("P2", "(BLANK) X", "EN"), {"literal", "phrase"}},
        {Pattern("P3", "X. IDIOM is BLANK literal.", "EN"), {"actually", "not"}},
        {Pattern("P4", "X. BLANK, IDIOM is literal.", "EN"), {"yes", "no"}},
        {Pattern("P5", "X. IDIOM is BLANK IDIOM_2", "EN"), {"actually", "not"}},
    };
  }
  if (prompt_language == "PT") {
    return {{Pattern("P4", "X. BLANK, IDIOM é literal.", "PT"), {"sim", "não"}}};
  }
  if (prompt_language == "GL") {
    return {{Pattern("P4", "X. BLANK, IDIOM é literal.", "GL"), {"si", "non"}}};
  }
  fail(ErrorKind::kArgument, "no built-in patterns for prompt language '" + prompt_language + "'");
}

std::vector<PatternVerbalizerPair> select_pvps(const std::vector<PatternVerbalizerPair>& available,
                                               const std::vector<std::string>& ids) {
  std::vector<PatternVerbalizerPair> out;
  for (const auto& id : ids) {
    auto it = std::find_if(available.begin(), available.end(),
                           [&](const PatternVerbalizerPair& p) { return p.id() == id; });
    if (it == available.end()) fail(ErrorKind::kArgument, "unknown pattern id '" + id + "'");
    out.push_back(*it);
  }
  return out;
}

std::string idiom_component(const std::string& mwe, std::size_t k) {
  const auto words = text::split_whitespace(mwe);
  if (k == 0 || k > words.size()) {
    fail(ErrorKind::kArgument, "component " + std::to_string(k) + " requested from '" + mwe +
                                   "' which has " + std::to_string(words.size()) + " words");
  }
  return words[k - 1];
}

MaskedText render(const PatternVerbalizerPair& pvp, const Example& example,
                  const std::string& mask_marker) {
  using Kind = Pattern::Segment::Kind;
  if (example.sentence.empty()) fail(ErrorKind::kRender, "example '" + example.id + "' has an empty sentence");
  if (pvp.pattern.uses_idiom() && text::split_whitespace(example.mwe).empty()) {
    fail(ErrorKind::kRender, "pattern " + pvp.id() + " needs the MWE but example '" +
                                 example.id + "' has none");
  }

  const auto& segs = pvp.pattern.segments();
  MaskedText out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& seg = segs[i];
    switch (seg.kind) {
      case Kind::kText: {
        std::string_view t = seg.text;
        // Sentence-final punctuation is not doubled when the template
        // repeats it right after X ("X." on "... owl." gives "... owl.").
        if (i > 0 && segs[i - 1].kind == Kind::kSentence && !t.empty() &&
            is_sentence_punct(t.front()) && example.sentence.back() == t.front()) {
          t.remove_prefix(1);
        }
        out.text += t;
        break;
      }
      case Kind::kSentence: out.text += example.sentence; break;
      case Kind::kIdiom: out.text += example.mwe; break;
      case Kind::kIdiomWord:
        try {
          out.text += idiom_component(example.mwe, seg.word);
        } catch (const Error& e) {
          fail(ErrorKind::kRender, "pattern " + pvp.id() + ": " + e.what());
        }
        break;
      case Kind::kBlank: out.text += mask_marker; break;
    }
  }
  return out;
}

std::vector<PatternVerbalizerPair> load_patterns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open pattern file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, "pattern file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = text::split(line, '\t');
  const char* names[] = {"id", "template", "prompt_language", "literal_token", "idiom_token"};
  std::size_t cols[5];
  for (int c = 0; c < 5; ++c) {
    auto it = std::find(header.begin(), header.end(), names[c]);
    if (it == header.end()) {
      fail(ErrorKind::kFormat, std::string("pattern file missing column '") + names[c] + "'");
    }
    cols[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<PatternVerbalizerPair> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != header.size()) {
      fail(ErrorKind::kFormat, "pattern file row " + std::to_string(row) + ": wrong field count");
    }
    out.emplace_back(Pattern(f[cols[0]], f[cols[1]], f[cols[2]]),
                     Verbalizer{f[cols[3]], f[cols[4]]});
  }
  return out;
}

}  // namespace idiomkit
