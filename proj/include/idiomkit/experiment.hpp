#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "idiomkit/config.hpp"

namespace idiomkit {

// Loader for external pretrained backends. None is built in; a host
// program that links a real MLM registers one before running experiments.
using ExternalBackendLoader =
    std::function<std::unique_ptr<MlmAdapter>(const ExperimentConfig& config, std::uint64_t seed)>;
void register_external_backend(ExternalBackendLoader loader);

// Vocabulary covering every word of the given examples, the pattern text
// and the verbalizer tokens of `pvps`.
Vocabulary vocabulary_for(const std::vector<const std::vector<Example>*>& example_sets,
                          const std::vector<PatternVerbalizerPair>& pvps, const Tokenizer& tokenizer);

// Backend factory for `kind`. Tiny backends start from the configured
// checkpoint when one is set, otherwise from `vocab` with seeded weights.
AdapterFactory make_factory(const ExperimentConfig& config, BackendKind kind, const Vocabulary& vocab,
                            const std::unordered_map<std::string, Label>& hidden_gold);

struct ExperimentResult {
  Report report;  // empty for BERTRAM tasks
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::string> warnings;
};

// Validates, then runs `config.task` writing artifacts under output_dir:
//   pet/ipet:        predictions.tsv, soft_labels.tsv, report.json, report.txt,
//                    config.json (ipet also ipet_audit.tsv)
//   bertram-train:   bertram.ckpt, encoder.ckpt, config.json
//   bertram-inject:  embeddings.tsv, injected.ckpt, config.json
//   evaluate:        report.json, report.txt
ExperimentResult run_experiment(const ExperimentConfig& config);

// Scores a prediction file against a labeled split.
Report evaluate_predictions(const std::filesystem::path& predictions, const std::vector<Example>& gold,
                            const LabelEncoding& encoding, OverallMode mode);

// Word forms ranked by corpus frequency (ties alphabetical), restricted to
// single vocabulary tokens of `adapter`.
std::vector<std::string> frequent_words(const std::filesystem::path& corpus, const MlmAdapter& adapter,
                                        std::size_t count);

}  // namespace idiomkit
