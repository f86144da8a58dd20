#include "idiomkit/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <unordered_map>

#include "idiomkit/error.hpp"
#include "idiomkit/oracle_mlm.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "harness";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

ExternalBackendLoader& external_loader() {
  static ExternalBackendLoader loader;
  return loader;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<Example> strip_labels(std::vector<Example> examples) {
  for (auto& e : examples) e.label.reset();
  return examples;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << body;
}

void write_soft_labels(const std::filesystem::path& path, const SoftLabeledSet& set) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << "id\tp_idiomatic\tp_literal\n";
  char buf[64];
  for (const auto& e : set.entries) {
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f", e.distribution.p_idiomatic, e.distribution.p_literal);
    out << e.example.id << '\t' << buf << '\n';
  }
}

LoadOptions load_options(const ExperimentConfig& c) {
  LoadOptions opts;
  opts.encoding = c.data.encoding;
  opts.require_mwe_in_sentence = c.data.require_mwe_in_sentence;
  opts.languages = c.data.languages;
  return opts;
}

Tokenizer make_tokenizer(const ExperimentConfig& c) { return Tokenizer(c.backend.lowercase); }

// Mean of per-seed classifier probabilities, then argmax.
std::vector<Label> combine_predictions(const std::vector<std::vector<ClassDistribution>>& per_seed) {
  std::vector<Label> out;
  if (per_seed.empty()) return out;
  for (std::size_t i = 0; i < per_seed.front().size(); ++i) {
    ClassDistribution mean{0.0, 0.0};
    for (const auto& s : per_seed) {
      mean.p_idiomatic += s[i].p_idiomatic;
      mean.p_literal += s[i].p_literal;
    }
    mean.p_idiomatic /= static_cast<double>(per_seed.size());
    mean.p_literal /= static_cast<double>(per_seed.size());
    out.push_back(decide(mean));
  }
  return out;
}

struct PetData {
  std::vector<Example> labeled;
  UnlabeledPool pool;
  std::vector<Example> test;
};

PetData load_pet_data(const ExperimentConfig& c) {
  const auto opts = load_options(c);
  const auto train = load_dataset(c.data.train, SplitName::kTrain, opts);
  auto sample = sample_labeled(train.examples, c.labeled_size, c.sample_seed);
  PetData data;
  data.labeled = std::move(sample.labeled);
  if (!c.data.unlabeled.empty()) {
    auto pool_opts = opts;
    auto split = load_dataset(c.data.unlabeled, SplitName::kTrain, pool_opts);
    data.pool = make_unlabeled_pool(split.examples, c.unlabeled_size, c.sample_seed + 1);
  } else {
    data.pool = make_unlabeled_pool(sample.remainder, c.unlabeled_size, c.sample_seed + 1);
  }
  data.test = load_dataset(c.data.test, SplitName::kTest, opts).examples;
  return data;
}

Report finish_report(Report report, const ExperimentConfig& c) {
  report.name = c.name.empty() ? std::string(task_name(c.task)) : c.name;
  report.config_hash = config_hash(c);
  report.seeds = c.seeds;
  report.created_at = utc_now();
  return report;
}

void write_report(const Report& report, const std::filesystem::path& dir, ExperimentResult& result) {
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text(dir / "report.txt", render_table({report}));
  result.artifacts.push_back(dir / "report.json");
  result.artifacts.push_back(dir / "report.txt");
}

ExperimentResult run_pet(const ExperimentConfig& c, ExperimentResult result) {
  const auto data = load_pet_data(c);
  const auto available = available_pvps(c);
  const auto pvps = select_pvps(available, c.pvp_ids);
  const auto distill_pvp = select_pvps(available, {c.distill_pvp}).front();

  auto all_pvps = pvps;
  all_pvps.push_back(distill_pvp);
  const auto vocab = vocabulary_for({&data.labeled, &data.pool.examples, &data.test}, all_pvps,
                                    make_tokenizer(c));
  const auto member_factory = make_factory(c, c.backend.kind, vocab, data.pool.hidden_gold);
  const auto classifier_kind = c.backend.classifier_kind.value_or(
      c.backend.kind == BackendKind::kOracle ? BackendKind::kTiny : c.backend.kind);
  const auto classifier_factory = make_factory(c, classifier_kind, vocab, data.pool.hidden_gold);

  const auto test = strip_labels(data.test);
  const auto& dir = result.output_dir;

  auto annotate_and_distill = [&](const Ensemble& ensemble, const std::vector<double>& weights,
                                  std::uint64_t seed, SoftLabeledSet* keep) {
    auto annotation = soft_annotate(ensemble, data.pool.examples, weights);
    for (const auto& f : annotation.failures) {
      result.warnings.push_back("annotation failed for " + f.example_id + " (" + f.member + "): " + f.message);
    }
    if (annotation.set.entries.empty()) fail(ErrorKind::kCapacity, "no soft-labeled examples to distill on");
    auto classifier = distill(annotation.set, classifier_factory(seed), distill_pvp, c.distill, seed);
    std::vector<ClassDistribution> probs;
    probs.reserve(test.size());
    for (const auto& e : test) probs.push_back(classifier.probs(e));
    if (keep) *keep = std::move(annotation.set);
    return probs;
  };

  std::vector<std::vector<ClassDistribution>> per_seed;
  SoftLabeledSet soft;
  if (c.task == Task::kIpet) {
    auto run = ipet_run(pvps, data.labeled, data.pool.examples, c.ipet, c.seeds, member_factory, c.train,
                        c.sample_seed);
    result.warnings.insert(result.warnings.end(), run.warnings.begin(), run.warnings.end());
    write_audit_log(dir / "ipet_audit.tsv", run.audit, c.data.encoding);
    result.artifacts.push_back(dir / "ipet_audit.tsv");
    per_seed.push_back(annotate_and_distill(run.final_generation, {}, c.seeds.front(), &soft));
  } else if (c.combine == SeedCombine::kPooled) {
    auto ensemble = train_ensemble(pvps, data.labeled, c.seeds, member_factory, c.train);
    ensemble.provenance = config_hash(c);
    per_seed.push_back(annotate_and_distill(ensemble, c.ensemble_weights, c.seeds.front(), &soft));
  } else {
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
      auto ensemble = train_ensemble(pvps, data.labeled, {c.seeds[s]}, member_factory, c.train);
      ensemble.provenance = config_hash(c);
      per_seed.push_back(annotate_and_distill(ensemble, {}, c.seeds[s], s == 0 ? &soft : nullptr));
    }
  }

  const auto preds = combine_predictions(per_seed);
  write_predictions(dir / "predictions.tsv", test, preds, c.data.encoding);
  write_soft_labels(dir / "soft_labels.tsv", soft);
  result.artifacts.push_back(dir / "predictions.tsv");
  result.artifacts.push_back(dir / "soft_labels.tsv");

  std::vector<Label> golds;
  std::vector<std::string> languages;
  for (const auto& e : data.test) {
    if (!e.label) fail(ErrorKind::kFormat, "test example " + e.id + " has no gold label");
    golds.push_back(*e.label);
    languages.push_back(e.language);
  }
  result.report = finish_report(per_language_report(preds, golds, languages, c.overall_mode), c);
  write_report(result.report, dir, result);
  return result;
}

std::unique_ptr<MlmAdapter> load_encoder(const ExperimentConfig& c) {
  if (c.backend.checkpoint.empty()) fail(ErrorKind::kConfig, "backend.checkpoint names the encoder");
  return load_checkpoint(c.backend.checkpoint);
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read word list '" + path.string() + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

ExperimentResult run_bertram_train(const ExperimentConfig& c, ExperimentResult result) {
  std::shared_ptr<MlmAdapter> encoder;
  if (!c.backend.checkpoint.empty()) {
    encoder = load_encoder(c);
  } else {
    // Fresh encoder over the corpus vocabulary; mostly useful for smoke runs.
    std::ifstream in(c.data.corpus);
    if (!in) fail(ErrorKind::kIo, "cannot read corpus '" + c.data.corpus + "'");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    auto tok = make_tokenizer(c);
    auto vocab = build_vocabulary(lines, tok, {});
    encoder = std::make_unique<TinyMlm>(std::move(vocab), std::move(tok), c.backend.tiny, c.seeds.front());
  }

  const auto words = c.bertram.words_file.empty()
                         ? frequent_words(c.data.corpus, *encoder, c.bertram.frequent_words)
                         : read_word_list(c.bertram.words_file);
  std::vector<std::pair<std::string, Eigen::VectorXd>> gold;
  std::vector<std::string> forms;
  for (const auto& w : words) {
    const auto id = encoder->vocabulary().find(text::normalize_form(w));
    if (!id) {
      result.warnings.push_back("training word '" + w + "' is not a vocabulary token; skipped");
      continue;
    }
    gold.emplace_back(w, encoder->input_embedding(*id));
    forms.push_back(w);
  }
  if (gold.empty()) fail(ErrorKind::kCapacity, "no usable training words");

  auto table = build_ngram_table(forms, c.bertram.n_min, c.bertram.n_max, encoder->embedding_dim(),
                                 c.bertram.init_scale, c.seeds.front());
  auto model = make_bertram_model(encoder, std::move(table));
  auto trained = train_mimic(gold, c.data.corpus, std::move(model), c.bertram.hyper, c.seeds.front());
  for (const auto& w : trained.excluded) result.warnings.push_back("no contexts for training word '" + w + "'");

  const auto& dir = result.output_dir;
  save_bertram(trained.model, dir / "bertram.ckpt");
  save_checkpoint(*encoder, dir / "encoder.ckpt");
  result.artifacts.push_back(dir / "bertram.ckpt");
  result.artifacts.push_back(dir / "encoder.ckpt");
  char buf[128];
  std::snprintf(buf, sizeof buf, "mimic loss %.6f -> %.6f over %zu words\n", trained.initial_loss,
                trained.final_loss, gold.size());
  write_text(dir / "mimic.txt", buf);
  result.artifacts.push_back(dir / "mimic.txt");
  return result;
}

ExperimentResult run_bertram_inject(const ExperimentConfig& c, ExperimentResult result) {
  std::shared_ptr<const MlmAdapter> encoder = load_encoder(c);
  const auto model = load_bertram(c.bertram.checkpoint, encoder);

  const auto split = load_dataset(c.data.test, SplitName::kTest, load_options(c));
  std::vector<std::string> mwes;
  for (const auto& e : split.examples) {
    if (std::find(mwes.begin(), mwes.end(), e.mwe) == mwes.end()) mwes.push_back(e.mwe);
  }
  const auto sets = harvest_contexts_many(c.data.corpus, mwes, c.bertram.contexts);
  std::vector<MWEEmbedding> embeddings;
  for (std::size_t i = 0; i < mwes.size(); ++i) {
    if (sets[i].contexts.empty()) {
      result.warnings.push_back("no contexts for '" + mwes[i] + "'; not injected");
      continue;
    }
    auto inference = infer_embedding_traced(mwes[i], sets[i], model);
    for (auto& w : inference.warnings) result.warnings.push_back(std::move(w));
    embeddings.push_back(std::move(inference.embedding));
  }

  auto injected = encoder->clone();
  inject_embeddings(*injected, embeddings, c.bertram.overwrite);
  const auto& dir = result.output_dir;
  write_embeddings(dir / "embeddings.tsv", embeddings);
  save_checkpoint(*injected, dir / "injected.ckpt");
  result.artifacts.push_back(dir / "embeddings.tsv");
  result.artifacts.push_back(dir / "injected.ckpt");
  return result;
}

ExperimentResult run_evaluate(const ExperimentConfig& c, ExperimentResult result) {
  const auto gold = load_dataset(c.data.test, SplitName::kTest, load_options(c));
  result.report = finish_report(
      evaluate_predictions(c.data.predictions, gold.examples, c.data.encoding, c.overall_mode), c);
  write_report(result.report, result.output_dir, result);
  return result;
}

}  // namespace

void register_external_backend(ExternalBackendLoader loader) { external_loader() = std::move(loader); }

Vocabulary vocabulary_for(const std::vector<const std::vector<Example>*>& example_sets,
                          const std::vector<PatternVerbalizerPair>& pvps, const Tokenizer& tokenizer) {
  std::vector<std::string> texts;
  std::vector<std::string> extra;
  for (const auto& pvp : pvps) {
    extra.push_back(pvp.verbalizer.literal_token);
    extra.push_back(pvp.verbalizer.idiom_token);
  }
  for (const auto* set : example_sets) {
    for (const auto& e : *set) {
      texts.push_back(e.sentence);
      for (const auto& pvp : pvps) {
        try {
          texts.push_back(render(pvp, e, Vocabulary::kMask).text);
        } catch (const Error&) {
          // Unrenderable rows fail later, at the point of use.
        }
      }
    }
  }
  return build_vocabulary(texts, tokenizer, extra);
}

AdapterFactory make_factory(const ExperimentConfig& config, BackendKind kind, const Vocabulary& vocab,
                            const std::unordered_map<std::string, Label>& hidden_gold) {
  const auto tokenizer = make_tokenizer(config);
  switch (kind) {
    case BackendKind::kTiny:
      if (!config.backend.checkpoint.empty()) {
        std::shared_ptr<const MlmAdapter> base = load_checkpoint(config.backend.checkpoint);
        return [base](std::uint64_t) { return base->clone(); };
      }
      return [vocab, tokenizer, tiny = config.backend.tiny](std::uint64_t seed) {
        return std::unique_ptr<MlmAdapter>(std::make_unique<TinyMlm>(vocab, tokenizer, tiny, seed));
      };
    case BackendKind::kOracle:
      return [vocab, tokenizer, dim = config.backend.tiny.dim, hidden_gold](std::uint64_t) {
        return std::unique_ptr<MlmAdapter>(std::make_unique<OracleMlm>(vocab, tokenizer, dim, hidden_gold));
      };
    case BackendKind::kExternal:
      if (!external_loader()) {
        fail(ErrorKind::kCapability, "no external pretrained backend is registered in this build");
      }
      return [config, loader = external_loader()](std::uint64_t seed) { return loader(config, seed); };
  }
  fail(ErrorKind::kConfig, "unknown backend");
}

Report evaluate_predictions(const std::filesystem::path& predictions, const std::vector<Example>& gold,
                            const LabelEncoding& encoding, OverallMode mode) {
  const auto rows = read_predictions(predictions, encoding);
  std::unordered_map<std::string, Label> by_id;
  for (const auto& r : rows) {
    if (!by_id.emplace(r.id, r.label).second) fail(ErrorKind::kFormat, "duplicate prediction for " + r.id);
  }
  std::vector<Label> preds, golds;
  std::vector<std::string> languages;
  for (const auto& e : gold) {
    if (!e.label) fail(ErrorKind::kFormat, "gold example " + e.id + " has no label");
    auto it = by_id.find(e.id);
    if (it == by_id.end()) fail(ErrorKind::kFormat, "no prediction for " + e.id);
    preds.push_back(it->second);
    golds.push_back(*e.label);
    languages.push_back(e.language);
    by_id.erase(it);
  }
  if (!by_id.empty()) fail(ErrorKind::kFormat, "prediction for unknown id " + by_id.begin()->first);
  return per_language_report(preds, golds, languages, mode);
}

std::vector<std::string> frequent_words(const std::filesystem::path& corpus, const MlmAdapter& adapter,
                                        std::size_t count) {
  std::ifstream in(corpus);
  if (!in) fail(ErrorKind::kIo, "cannot read corpus '" + corpus.string() + "'");
  std::map<std::string, std::size_t> counts;
  const auto& vocab = adapter.vocabulary();
  for (std::string line; std::getline(in, line);) {
    for (const auto& u : adapter.tokenizer().units(line)) {
      if (u.size() < 2 || u == Vocabulary::kMask || u == Vocabulary::kUnk) continue;
      if (!std::all_of(u.begin(), u.end(), [](char ch) { return text::is_word_byte(ch); })) continue;
      if (vocab.contains(u)) ++counts[u];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < count; ++i) out.push_back(ranked[i].first);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  ExperimentResult result;
  result.output_dir = config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(result.output_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create output directory '" + config.output_dir + "'");
  write_text(result.output_dir / "config.json", config_to_json(config).dump(2) + "\n");
  result.artifacts.push_back(result.output_dir / "config.json");

  switch (config.task) {
    case Task::kPet:
    case Task::kIpet: result = run_pet(config, std::move(result)); break;
    case Task::kBertramTrain: result = run_bertram_train(config, std::move(result)); break;
    case Task::kBertramInject: result = run_bertram_inject(config, std::move(result)); break;
    case Task::kEvaluate: result = run_evaluate(config, std::move(result)); break;
  }
  if (!result.warnings.empty()) {
    std::string body;
    for (const auto& w : result.warnings) body += w + "\n";
    write_text(result.output_dir / "warnings.txt", body);
    result.artifacts.push_back(result.output_dir / "warnings.txt");
  }
  return result;
}

}  // namespace idiomkit
