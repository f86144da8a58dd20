#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idiomkit/corpus.hpp"

namespace idiomkit {

// A cloze template. Placeholders are whole words inside the template:
//   X        the example sentence
//   IDIOM    the MWE surface form
//   IDIOM_k  the k-th component word of the MWE (k >= 1)
//   BLANK    the mask slot, exactly once
class Pattern {
 public:
  struct Segment {
    enum class Kind { kText, kSentence, kIdiom, kIdiomWord, kBlank };
    Kind kind = Kind::kText;
    std::string text;      // kText only
    std::size_t word = 0;  // kIdiomWord only, 1-based
  };

  Pattern(std::string id, std::string template_text, std::string prompt_language);

  const std::string& id() const { return id_; }
  const std::string& template_text() const { return template_; }
  const std::string& prompt_language() const { return prompt_language_; }
  const std::vector<Segment>& segments() const { return segments_; }

  bool uses_idiom() const;

 private:
  std::string id_;
  std::string template_;
  std::string prompt_language_;
  std::vector<Segment> segments_;
};

struct Verbalizer {
  std::string literal_token;
  std::string idiom_token;

  const std::string& token_for(Label label) const {
    return label == Label::kIdiomatic ? idiom_token : literal_token;
  }
};

struct PatternVerbalizerPair {
  Pattern pattern;
  Verbalizer verbalizer;

  PatternVerbalizerPair(Pattern p, Verbalizer v);
  const std::string& id() const { return pattern.id(); }
};

struct MaskedText {
  std::string text;
  // Token position of the mask marker; set once an adapter tokenizes `text`.
  std::optional<std::size_t> mask_index;
};

// P1-P5 for EN; the translated P4 for PT and GL.
std::vector<PatternVerbalizerPair> builtin_pvps(const std::string& prompt_language);

// Looks up PVPs by id in `available`, preserving the requested order.
std::vector<PatternVerbalizerPair> select_pvps(const std::vector<PatternVerbalizerPair>& available,
                                               const std::vector<std::string>& ids);

std::string idiom_component(const std::string& mwe, std::size_t k);

MaskedText render(const PatternVerbalizerPair& pvp, const Example& example,
                  const std::string& mask_marker);

// TSV with header id, template, prompt_language, literal_token, idiom_token.
std::vector<PatternVerbalizerPair> load_patterns(const std::filesystem::path& path);

}  // namespace idiomkit
