#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace idiomkit {

enum class Label { kLiteral = 0, kIdiomatic = 1 };

const char* label_name(Label label);

// One MWE occurrence in context. `label` is empty for unlabeled rows.
struct Example {
  std::string id;
  std::string language;
  std::string mwe;
  std::string sentence;
  std::optional<Label> label;

  friend bool operator==(const Example&, const Example&) = default;
};

// On-disk spelling of the two classes. Which numeric value denotes
// idiomatic is not fixed by the task data, so it is configurable.
struct LabelEncoding {
  std::string idiomatic = "1";
  std::string literal = "0";

  std::optional<Label> parse(const std::string& value) const;
  const std::string& encode(Label label) const;
};

enum class SplitName { kTrain, kDev, kEval, kTest };

SplitName parse_split_name(const std::string& name);
const char* split_name(SplitName name);

struct DatasetSplit {
  SplitName name = SplitName::kTrain;
  std::vector<Example> examples;
};

struct LoadOptions {
  LabelEncoding encoding;
  // Reject rows whose sentence does not contain the MWE.
  bool require_mwe_in_sentence = true;
  // Empty means any language code is accepted.
  std::vector<std::string> languages;
};

// Headered TSV: id, language, mwe, sentence[, label]. Column order is free.
DatasetSplit load_dataset(const std::filesystem::path& path, SplitName split,
                          const LoadOptions& options = {});

// Writes the same format; the label column is emitted only when any example
// carries a label.
void write_dataset(const std::filesystem::path& path, const DatasetSplit& split,
                   const LabelEncoding& encoding = {});

struct LabeledSample {
  std::vector<Example> labeled;
  std::vector<Example> remainder;
};

// Draws n/2 idiomatic and n/2 literal examples uniformly without
// replacement from one pool spanning every language. Both outputs keep the
// split's original order.
LabeledSample sample_labeled(const std::vector<Example>& examples, std::size_t n,
                             std::uint64_t seed);

struct UnlabeledPool {
  std::vector<Example> examples;  // labels stripped
  // Gold labels of pool members, by id, for oracle backends and audits.
  std::unordered_map<std::string, Label> hidden_gold;
};

// Random subset of `source` of at most `size` examples, original order kept.
UnlabeledPool make_unlabeled_pool(const std::vector<Example>& source, std::size_t size,
                                  std::uint64_t seed);

struct ContextSet {
  std::string mwe;
  std::vector<std::string> contexts;
  std::string source;
};

// Scans a newline-delimited corpus in file order and returns up to k
// distinct lines containing the MWE (see text::find_mwe).
ContextSet harvest_contexts(const std::filesystem::path& corpus_path,
                            const std::string& mwe, std::size_t k);

// Same scan over several MWEs in one pass over the file. MWEs with no match
// get an empty context list rather than an error.
std::vector<ContextSet> harvest_contexts_many(const std::filesystem::path& corpus_path,
                                              const std::vector<std::string>& mwes,
                                              std::size_t k);

}  // namespace idiomkit
