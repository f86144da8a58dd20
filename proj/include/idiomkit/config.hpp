#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idiomkit/bertram.hpp"
#include "idiomkit/ipet.hpp"
#include "idiomkit/metrics.hpp"
#include "idiomkit/tiny_mlm.hpp"

namespace idiomkit {

enum class Task { kPet, kIpet, kBertramTrain, kBertramInject, kEvaluate };

const char* task_name(Task task);
Task parse_task(const std::string& name);

// How ensembles over several seeds become a final model.
enum class SeedCombine {
  kPooled,   // one ensemble over every (pvp, seed), one distilled classifier
  kPerSeed,  // one ensemble and classifier per seed; probabilities averaged
};

struct BackendConfig {
  BackendKind kind = BackendKind::kTiny;
  // Backend for the distilled classifier; the oracle cannot be trained, so
  // an oracle run distills into the tiny backend unless told otherwise.
  std::optional<BackendKind> classifier_kind;
  TinyConfig tiny;
  bool lowercase = true;
  std::string checkpoint;  // start every instance from this tiny checkpoint
};

struct DataConfig {
  std::string train;
  std::string test;
  std::string unlabeled;     // optional; otherwise drawn from the train remainder
  std::string predictions;   // evaluate task input
  std::string corpus;        // raw text for context harvesting
  std::vector<std::string> languages;
  LabelEncoding encoding;
  bool require_mwe_in_sentence = true;
};

struct BertramConfig {
  std::size_t n_min = 3;
  std::size_t n_max = 5;
  double init_scale = 0.1;
  std::size_t contexts = 150;          // per MWE at inference time
  std::size_t frequent_words = 100;    // when no words file is given
  std::string words_file;              // one training word per line
  std::string checkpoint;              // bertram-inject input
  bool overwrite = false;
  MimicHyper hyper;
};

struct ExperimentConfig {
  Task task = Task::kPet;
  std::string name;
  std::vector<std::string> pvp_ids{"P1", "P2", "P3", "P4", "P5"};
  std::string prompt_language = "EN";
  std::string pattern_file;
  std::size_t labeled_size = 1000;
  std::size_t unlabeled_size = 3000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t sample_seed = 42;
  BackendConfig backend;
  TrainingHyper train;
  TrainingHyper distill;
  std::string distill_pvp = "P4";
  SeedCombine combine = SeedCombine::kPooled;
  std::vector<double> ensemble_weights;
  GenerationPlan ipet;
  DataConfig data;
  BertramConfig bertram;
  OverallMode overall_mode = OverallMode::kPooled;
  std::string output_dir = "out";
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// Checks that need no data files: PVP ids resolve, seeds are unique,
// labeled size is even, sizes are positive.
void validate(const ExperimentConfig& config);

// PVPs available to the run: the pattern file when given, else built-ins.
std::vector<PatternVerbalizerPair> available_pvps(const ExperimentConfig& config);

std::string config_hash(const ExperimentConfig& config);

}  // namespace idiomkit
