#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "idiomkit/corpus.hpp"

// Toy idiomaticity data with a known generating process, for demos and
// tests. Each sentence holds one two-word MWE, a few filler words and a
// few cue words; cues come from the sentence's own class with probability
// `cue_purity`. Train and test use disjoint MWEs, so test is zero-shot.
namespace idiomkit::synthetic {

struct ToyOptions {
  std::uint64_t seed = 7;
  std::size_t train_rows = 2000;
  std::size_t test_rows = 400;
  std::size_t train_mwes = 20;
  std::size_t test_mwes = 20;
  std::size_t cues_per_class = 40;
  std::size_t cues_per_sentence = 3;
  std::size_t fillers = 30;
  std::size_t min_filler_words = 4;
  std::size_t max_filler_words = 8;
  double cue_purity = 0.9;
  std::vector<std::string> languages{"EN"};
  std::size_t corpus_lines = 3000;
};

struct ToyData {
  std::vector<Example> train;
  std::vector<Example> test;
  std::vector<std::string> train_mwes;
  std::vector<std::string> test_mwes;
  std::vector<std::string> idiomatic_cues;
  std::vector<std::string> literal_cues;
  std::vector<std::string> fillers;
};

// Distinct pronounceable nonsense words ("bakemo"), none of them English
// pattern or verbalizer words.
std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed,
                                      std::size_t min_syllables = 2, std::size_t max_syllables = 3);

// Balanced classes; ids "train-00001", "test-00001", ...
ToyData make_toy_data(const ToyOptions& options);

// Unlabeled lines built the same way, every MWE appearing repeatedly.
std::vector<std::string> make_toy_corpus(const ToyData& data, std::size_t lines, std::uint64_t seed);

// Writes train.tsv, test.tsv, corpus.txt and a ready-to-run pet.json.
std::vector<std::filesystem::path> write_toy_dataset(const std::filesystem::path& dir,
                                                     const ToyOptions& options);

}  // namespace idiomkit::synthetic
