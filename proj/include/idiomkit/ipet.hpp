#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "idiomkit/pet.hpp"

namespace idiomkit {

struct ClassRatio {
  double idiomatic = 1.0;
  double literal = 1.0;
};

struct GenerationPlan {
  std::size_t generations = 2;  // self-training rounds after generation 0
  double growth_factor = 5.0;
  ClassRatio ratio;

  void validate() const;
};

// One pseudo-labeled example and where its label came from.
struct PseudoLabel {
  std::size_t generation = 0;
  std::string member;
  std::size_t member_index = 0;
  std::string example_id;
  Label label = Label::kLiteral;
  double confidence = 0.0;
  std::string labeling_member;
  std::size_t labeling_index = 0;
};

struct NextTrainingSet {
  std::vector<Example> examples;          // seed set first, then pseudo-labeled
  std::vector<PseudoLabel> provenance;    // one per pseudo-labeled example
  std::size_t shortfall_idiomatic = 0;
  std::size_t shortfall_literal = 0;
  std::vector<std::string> warnings;
};

// min(floor(labeled * growth^generation), labeled + pool)
std::size_t generation_size(std::size_t labeled, std::size_t pool, double growth_factor,
                            std::size_t generation);

// Grows `labeled_seed_set` to `target_size` with examples from `unlabeled`
// labeled by other members. Each pool example is labeled by one member
// drawn uniformly (never `self_index`); candidates are then taken per
// class in descending confidence to meet `ratio`.
NextTrainingSet next_training_set(const Ensemble& models, std::size_t self_index,
                                  const std::vector<Example>& unlabeled,
                                  const std::vector<Example>& labeled_seed_set,
                                  std::size_t target_size, const ClassRatio& ratio,
                                  std::uint64_t seed);

struct IpetResult {
  Ensemble final_generation;
  std::vector<std::vector<std::size_t>> training_sizes;  // [generation][member]
  std::vector<PseudoLabel> audit;
  std::vector<std::string> warnings;
};

// Generation 0 trains on the labeled set; each later generation retrains
// every member from a fresh backend on its grown training set.
IpetResult ipet_run(const std::vector<PatternVerbalizerPair>& pvps,
                    const std::vector<Example>& labeled, const std::vector<Example>& unlabeled,
                    const GenerationPlan& plan, const std::vector<std::uint64_t>& seeds,
                    const AdapterFactory& factory, const TrainingHyper& hyper,
                    std::uint64_t run_seed);

// TSV: generation, member, example_id, pseudo_label, confidence, labeling_member
void write_audit_log(const std::filesystem::path& path, const std::vector<PseudoLabel>& audit,
                     const LabelEncoding& encoding = {});

}  // namespace idiomkit
