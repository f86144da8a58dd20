#include "idiomkit/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

Vocabulary::Vocabulary() {
  add(kUnk);
  add(kMask);
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<TokenId> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::truncate(std::size_t size) {
  size = std::max<std::size_t>(size, 2);
  while (tokens_.size() > size) {
    index_.erase(tokens_.back());
    tokens_.pop_back();
  }
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = text::fnv1a("");
  for (const auto& t : tokens_) {
    h = text::fnv1a(t, h);
    h = text::fnv1a(std::string_view("\0", 1), h);
  }
  return h;
}

void Tokenizer::register_phrase(const std::string& normalized_form) {
  phrases_.insert(normalized_form);
  const auto words =
      static_cast<std::size_t>(std::count(normalized_form.begin(), normalized_form.end(), '_')) + 1;
  longest_phrase_ = std::max(longest_phrase_, words);
}

void Tokenizer::unregister_phrase(const std::string& normalized_form) {
  phrases_.erase(normalized_form);
}

std::vector<std::string> Tokenizer::units(std::string_view text) const {
  std::vector<std::string> out;
  for (auto& chunk : text::split_whitespace(text)) {
    std::string word;
    std::size_t i = 0;
    while (i < chunk.size()) {
      if (chunk.compare(i, 6, Vocabulary::kMask) == 0) {
        if (!word.empty()) out.push_back(std::move(word)), word.clear();
        out.emplace_back(Vocabulary::kMask);
        i += 6;
        continue;
      }
      const auto c = static_cast<unsigned char>(chunk[i]);
      if (text::is_word_byte(c) || c == '_' || c == '\'' || c == '-') {
        word.push_back(lowercase_ ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
      } else {
        if (!word.empty()) out.push_back(std::move(word)), word.clear();
        out.emplace_back(1, static_cast<char>(c));
      }
      ++i;
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

void Tokenizer::wordpiece(const std::string& word, const Vocabulary& vocab,
                          std::vector<TokenId>& out) const {
  if (auto id = vocab.find(word)) {
    out.push_back(*id);
    return;
  }
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::optional<TokenId> hit;
    while (end > start) {
      std::string piece = word.substr(start, end - start);
      if (start > 0) piece = "##" + piece;
      if ((hit = vocab.find(piece))) break;
      --end;
    }
    if (!hit) {
      out.push_back(vocab.unk_id());
      return;
    }
    pieces.push_back(*hit);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<TokenId> Tokenizer::encode(std::string_view text, const Vocabulary& vocab) const {
  const auto words = units(text);
  std::vector<TokenId> out;
  out.reserve(words.size() + 4);
  std::size_t i = 0;
  while (i < words.size()) {
    bool merged = false;
    const std::size_t max_len = std::min(longest_phrase_, words.size() - i);
    for (std::size_t len = max_len; len >= 2; --len) {
      std::string form = text::to_lower(words[i]);
      for (std::size_t j = 1; j < len; ++j) form += "_" + text::to_lower(words[i + j]);
      if (phrases_.count(form) == 0) continue;
      if (auto id = vocab.find(form)) {
        out.push_back(*id);
        i += len;
        merged = true;
        break;
      }
    }
    if (merged) continue;
    if (words[i] == Vocabulary::kMask) {
      out.push_back(vocab.mask_id());
    } else {
      wordpiece(words[i], vocab, out);
    }
    ++i;
  }
  return out;
}

std::vector<std::string> Tokenizer::encode_strings(std::string_view text,
                                                   const Vocabulary& vocab) const {
  std::vector<std::string> out;
  for (auto id : encode(text, vocab)) out.push_back(vocab.token(id));
  return out;
}

}  // namespace idiomkit
