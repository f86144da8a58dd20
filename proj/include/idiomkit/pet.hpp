#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "idiomkit/mlm.hpp"

namespace idiomkit {

struct EnsembleMember {
  PatternVerbalizerPair pvp;
  std::uint64_t seed = 0;
  std::unique_ptr<MlmAdapter> adapter;
  TrainingLog log;

  std::string name() const { return pvp.id() + "/" + std::to_string(seed); }
};

struct Ensemble {
  std::vector<EnsembleMember> members;
  std::string provenance;  // config hash of the producing run, if any
};

struct SoftLabel {
  Example example;
  ClassDistribution distribution;
};

struct SoftLabeledSet {
  std::vector<SoftLabel> entries;
};

struct AnnotationFailure {
  std::string example_id;
  std::string member;
  std::string message;
};

struct SoftAnnotation {
  SoftLabeledSet set;
  std::vector<AnnotationFailure> failures;
};

// Argmax over the two classes; an exact tie resolves to literal.
Label decide(const ClassDistribution& probs);

struct FinalClassifier {
  std::unique_ptr<MlmAdapter> adapter;
  PatternVerbalizerPair pvp;
  TrainingLog log;

  ClassDistribution probs(const Example& example) const;
};

// One fresh backend per (pvp, seed), fine-tuned on `labeled`. Backends that
// cannot be trained (the oracle) join the ensemble untouched.
Ensemble train_ensemble(const std::vector<PatternVerbalizerPair>& pvps,
                        const std::vector<Example>& labeled,
                        const std::vector<std::uint64_t>& seeds, const AdapterFactory& factory,
                        const TrainingHyper& hyper);

// Mean of member class_probs per example, in input order. `weights`, when
// given, must have one non-negative entry per member. An example is dropped
// only when every member fails on it; each failure is reported.
SoftAnnotation soft_annotate(const Ensemble& ensemble, const std::vector<Example>& unlabeled,
                             const std::vector<double>& weights = {});

// Trains `backend` against the soft targets through `pvp`'s cloze format.
FinalClassifier distill(const SoftLabeledSet& softset, std::unique_ptr<MlmAdapter> backend,
                        const PatternVerbalizerPair& pvp, const TrainingHyper& hyper,
                        std::uint64_t seed);

Label predict(const FinalClassifier& classifier, const Example& example);

// Prediction file: header "id\tlabel", one row per example in input order.
void write_predictions(const std::filesystem::path& path, const std::vector<Example>& examples,
                       const std::vector<Label>& labels, const LabelEncoding& encoding = {});

struct PredictionRow {
  std::string id;
  Label label;
};
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path,
                                            const LabelEncoding& encoding = {});

}  // namespace idiomkit
