#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace idiomkit {

using TokenId = std::int32_t;

class Vocabulary {
 public:
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kMask = "[MASK]";

  Vocabulary();  // holds only the special tokens

  TokenId add(const std::string& token);  // existing id if already present
  std::optional<TokenId> find(const std::string& token) const;
  bool contains(const std::string& token) const { return find(token).has_value(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId unk_id() const { return 0; }
  TokenId mask_id() const { return 1; }

  // Drops every entry with id >= size. Special tokens are never dropped.
  void truncate(std::size_t size);

  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Whitespace + punctuation pre-split, optional ASCII lowercasing, phrase
// tokens for injected multiword entries, then greedy longest-match
// wordpiece ("##" continuations) with [UNK] fallback.
class Tokenizer {
 public:
  explicit Tokenizer(bool lowercase = true) : lowercase_(lowercase) {}

  bool lowercase() const { return lowercase_; }

  // A phrase token is a vocabulary entry "w1_w2_..." that the tokenizer
  // emits whenever the component words appear consecutively.
  void register_phrase(const std::string& normalized_form);
  void unregister_phrase(const std::string& normalized_form);
  bool is_phrase(const std::string& normalized_form) const { return phrases_.count(normalized_form) > 0; }
  const std::unordered_set<std::string>& phrases() const { return phrases_; }

  // Pre-tokenized word units (no wordpiece, no phrase merging).
  std::vector<std::string> units(std::string_view text) const;

  std::vector<TokenId> encode(std::string_view text, const Vocabulary& vocab) const;
  std::vector<std::string> encode_strings(std::string_view text, const Vocabulary& vocab) const;

 private:
  void wordpiece(const std::string& word, const Vocabulary& vocab, std::vector<TokenId>& out) const;

  bool lowercase_;
  std::unordered_set<std::string> phrases_;
  std::size_t longest_phrase_ = 0;  // in words
};

}  // namespace idiomkit
