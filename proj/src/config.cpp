#include "idiomkit/config.hpp"

#include <fstream>
#include <set>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "harness";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

TrainingHyper hyper_from(const nlohmann::json& j, TrainingHyper h) {
  read(j, "steps", h.steps);
  read(j, "batch_size", h.batch_size);
  read(j, "learning_rate", h.learning_rate);
  read(j, "max_grad_norm", h.max_grad_norm);
  read(j, "temperature", h.temperature);
  return h;
}

nlohmann::json hyper_to(const TrainingHyper& h) {
  return {{"steps", h.steps},
          {"batch_size", h.batch_size},
          {"learning_rate", h.learning_rate},
          {"max_grad_norm", h.max_grad_norm},
          {"temperature", h.temperature}};
}

}  // namespace

const char* task_name(Task task) {
  switch (task) {
    case Task::kPet: return "pet";
    case Task::kIpet: return "ipet";
    case Task::kBertramTrain: return "bertram-train";
    case Task::kBertramInject: return "bertram-inject";
    case Task::kEvaluate: return "evaluate";
  }
  return "pet";
}

Task parse_task(const std::string& name) {
  if (name == "pet") return Task::kPet;
  if (name == "ipet") return Task::kIpet;
  if (name == "bertram-train") return Task::kBertramTrain;
  if (name == "bertram-inject") return Task::kBertramInject;
  if (name == "evaluate") return Task::kEvaluate;
  fail(ErrorKind::kConfig, "unknown task '" + name + "'");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    read(j, "name", c.name);
    read(j, "pvps", c.pvp_ids);
    read(j, "prompt_language", c.prompt_language);
    read(j, "pattern_file", c.pattern_file);
    read(j, "labeled_size", c.labeled_size);
    read(j, "unlabeled_size", c.unlabeled_size);
    read(j, "seeds", c.seeds);
    read(j, "sample_seed", c.sample_seed);
    read(j, "output_dir", c.output_dir);
    read(j, "ensemble_weights", c.ensemble_weights);
    if (j.contains("overall")) {
      const auto mode = j.at("overall").get<std::string>();
      if (mode == "pooled") c.overall_mode = OverallMode::kPooled;
      else if (mode == "language-mean") c.overall_mode = OverallMode::kLanguageMean;
      else fail(ErrorKind::kConfig, "overall must be 'pooled' or 'language-mean'");
    }
    if (j.contains("train")) c.train = hyper_from(j.at("train"), c.train);
    if (j.contains("distill")) {
      const auto& d = j.at("distill");
      c.distill = hyper_from(d, c.distill);
      read(d, "pvp", c.distill_pvp);
      if (d.contains("combine")) {
        const auto mode = d.at("combine").get<std::string>();
        if (mode == "pooled") c.combine = SeedCombine::kPooled;
        else if (mode == "per-seed") c.combine = SeedCombine::kPerSeed;
        else fail(ErrorKind::kConfig, "distill.combine must be 'pooled' or 'per-seed'");
      }
    }
    if (j.contains("ipet")) {
      const auto& p = j.at("ipet");
      read(p, "generations", c.ipet.generations);
      read(p, "growth_factor", c.ipet.growth_factor);
      if (p.contains("ratio")) {
        const auto r = p.at("ratio").get<std::vector<double>>();
        if (r.size() != 2) fail(ErrorKind::kConfig, "ipet.ratio must be [idiomatic, literal]");
        c.ipet.ratio = {r[0], r[1]};
      }
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      if (b.contains("kind")) c.backend.kind = parse_backend_kind(b.at("kind").get<std::string>());
      if (b.contains("classifier_kind")) {
        c.backend.classifier_kind = parse_backend_kind(b.at("classifier_kind").get<std::string>());
      }
      read(b, "embedding_dim", c.backend.tiny.dim);
      read(b, "layers", c.backend.tiny.layers);
      read(b, "ffn_dim", c.backend.tiny.ffn_dim);
      read(b, "max_positions", c.backend.tiny.max_positions);
      read(b, "init_scale", c.backend.tiny.init_scale);
      read(b, "lowercase", c.backend.lowercase);
      read(b, "checkpoint", c.backend.checkpoint);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read(d, "train", c.data.train);
      read(d, "test", c.data.test);
      read(d, "unlabeled", c.data.unlabeled);
      read(d, "predictions", c.data.predictions);
      read(d, "corpus", c.data.corpus);
      read(d, "languages", c.data.languages);
      read(d, "label_idiomatic", c.data.encoding.idiomatic);
      read(d, "label_literal", c.data.encoding.literal);
      read(d, "require_mwe_in_sentence", c.data.require_mwe_in_sentence);
    }
    if (j.contains("bertram")) {
      const auto& b = j.at("bertram");
      read(b, "n_min", c.bertram.n_min);
      read(b, "n_max", c.bertram.n_max);
      read(b, "init_scale", c.bertram.init_scale);
      read(b, "contexts", c.bertram.contexts);
      read(b, "frequent_words", c.bertram.frequent_words);
      read(b, "words_file", c.bertram.words_file);
      read(b, "checkpoint", c.bertram.checkpoint);
      read(b, "overwrite", c.bertram.overwrite);
      read(b, "steps", c.bertram.hyper.steps);
      read(b, "batch_words", c.bertram.hyper.batch_words);
      read(b, "contexts_per_word", c.bertram.hyper.contexts_per_word);
      read(b, "learning_rate", c.bertram.hyper.learning_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("invalid config field: ") + e.what());
  }
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json backend = {
      {"kind", backend_kind_name(c.backend.kind)},
      {"embedding_dim", c.backend.tiny.dim},
      {"layers", c.backend.tiny.layers},
      {"ffn_dim", c.backend.tiny.ffn_dim},
      {"max_positions", c.backend.tiny.max_positions},
      {"init_scale", c.backend.tiny.init_scale},
      {"lowercase", c.backend.lowercase},
      {"checkpoint", c.backend.checkpoint},
  };
  if (c.backend.classifier_kind) backend["classifier_kind"] = backend_kind_name(*c.backend.classifier_kind);
  auto distill = hyper_to(c.distill);
  distill["pvp"] = c.distill_pvp;
  distill["combine"] = c.combine == SeedCombine::kPooled ? "pooled" : "per-seed";
  return {
      {"task", task_name(c.task)},
      {"name", c.name},
      {"pvps", c.pvp_ids},
      {"prompt_language", c.prompt_language},
      {"pattern_file", c.pattern_file},
      {"labeled_size", c.labeled_size},
      {"unlabeled_size", c.unlabeled_size},
      {"seeds", c.seeds},
      {"sample_seed", c.sample_seed},
      {"output_dir", c.output_dir},
      {"ensemble_weights", c.ensemble_weights},
      {"overall", c.overall_mode == OverallMode::kPooled ? "pooled" : "language-mean"},
      {"train", hyper_to(c.train)},
      {"distill", distill},
      {"ipet",
       {{"generations", c.ipet.generations},
        {"growth_factor", c.ipet.growth_factor},
        {"ratio", {c.ipet.ratio.idiomatic, c.ipet.ratio.literal}}}},
      {"backend", backend},
      {"data",
       {{"train", c.data.train},
        {"test", c.data.test},
        {"unlabeled", c.data.unlabeled},
        {"predictions", c.data.predictions},
        {"corpus", c.data.corpus},
        {"languages", c.data.languages},
        {"label_idiomatic", c.data.encoding.idiomatic},
        {"label_literal", c.data.encoding.literal},
        {"require_mwe_in_sentence", c.data.require_mwe_in_sentence}}},
      {"bertram",
       {{"n_min", c.bertram.n_min},
        {"n_max", c.bertram.n_max},
        {"init_scale", c.bertram.init_scale},
        {"contexts", c.bertram.contexts},
        {"frequent_words", c.bertram.frequent_words},
        {"words_file", c.bertram.words_file},
        {"checkpoint", c.bertram.checkpoint},
        {"overwrite", c.bertram.overwrite},
        {"steps", c.bertram.hyper.steps},
        {"batch_words", c.bertram.hyper.batch_words},
        {"contexts_per_word", c.bertram.hyper.contexts_per_word},
        {"learning_rate", c.bertram.hyper.learning_rate}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read config '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false, true);
  if (j.is_discarded()) fail(ErrorKind::kConfig, "config '" + path.string() + "' is not valid JSON");
  auto config = config_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  for (auto* p : {&config.data.train, &config.data.test, &config.data.unlabeled, &config.data.predictions,
                  &config.data.corpus, &config.pattern_file, &config.backend.checkpoint,
                  &config.bertram.words_file, &config.bertram.checkpoint}) {
    resolve(*p);
  }
  return config;
}

std::vector<PatternVerbalizerPair> available_pvps(const ExperimentConfig& config) {
  if (!config.pattern_file.empty()) return load_patterns(config.pattern_file);
  return builtin_pvps(config.prompt_language);
}

void validate(const ExperimentConfig& c) {
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    fail(ErrorKind::kConfig, "seeds must be unique");
  }
  if (c.output_dir.empty()) fail(ErrorKind::kConfig, "output_dir is empty");
  if (c.task == Task::kEvaluate) {
    if (c.data.predictions.empty() || c.data.test.empty()) {
      fail(ErrorKind::kConfig, "evaluate needs data.predictions and data.test");
    }
    return;
  }
  if (c.seeds.empty()) fail(ErrorKind::kConfig, "at least one seed is required");
  if (c.task == Task::kPet || c.task == Task::kIpet) {
    if (c.labeled_size % 2 != 0) fail(ErrorKind::kConfig, "labeled_size must be even");
    if (c.labeled_size == 0) fail(ErrorKind::kConfig, "labeled_size must be positive");
    if (c.pvp_ids.empty()) fail(ErrorKind::kConfig, "no PVPs selected");
    if (c.data.train.empty() || c.data.test.empty()) fail(ErrorKind::kConfig, "data.train and data.test are required");
    if (c.train.batch_size == 0 || c.distill.batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be positive");
    const auto pvps = available_pvps(c);
    try {
      select_pvps(pvps, c.pvp_ids);
      select_pvps(pvps, {c.distill_pvp});
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, e.what());
    }
    if (!c.ensemble_weights.empty() && c.combine == SeedCombine::kPooled &&
        c.ensemble_weights.size() != c.pvp_ids.size() * c.seeds.size()) {
      fail(ErrorKind::kConfig, "ensemble_weights needs one entry per (pvp, seed) member");
    }
    if (c.task == Task::kIpet) {
      try {
        c.ipet.validate();
      } catch (const Error& e) {
        fail(ErrorKind::kConfig, e.what());
      }
      if (c.pvp_ids.size() * c.seeds.size() < 2) fail(ErrorKind::kConfig, "iPET needs at least two members");
    }
  }
  if (c.task == Task::kBertramTrain || c.task == Task::kBertramInject) {
    if (c.data.corpus.empty()) fail(ErrorKind::kConfig, "data.corpus is required for BERTRAM tasks");
    if (c.bertram.n_min == 0 || c.bertram.n_min > c.bertram.n_max) fail(ErrorKind::kConfig, "invalid n-gram range");
    if (c.backend.kind != BackendKind::kTiny) {
      fail(ErrorKind::kConfig, "BERTRAM tasks need an encoder backend (tiny)");
    }
  }
  if (c.task == Task::kBertramInject) {
    if (c.bertram.checkpoint.empty()) fail(ErrorKind::kConfig, "bertram.checkpoint is required for bertram-inject");
    if (c.backend.checkpoint.empty()) fail(ErrorKind::kConfig, "backend.checkpoint names the encoder to inject into");
    if (c.data.test.empty()) fail(ErrorKind::kConfig, "data.test lists the MWEs to inject");
    if (c.bertram.contexts == 0) fail(ErrorKind::kConfig, "bertram.contexts must be positive");
  }
}

std::string config_hash(const ExperimentConfig& config) {
  auto j = config_to_json(config);
  j.erase("output_dir");
  return text::hex64(text::fnv1a(j.dump()));
}

}  // namespace idiomkit
