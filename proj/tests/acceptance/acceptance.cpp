// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "bertram_fixture.hpp"
#include "helpers.hpp"
#include "idiomkit/error.hpp"
#include "idiomkit/experiment.hpp"
#include "idiomkit/oracle_mlm.hpp"
#include "idiomkit/synthetic.hpp"
#include "idiomkit/text.hpp"

using namespace idiomkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::filesystem::path kFixtures = IDIOMKIT_FIXTURES;
const std::filesystem::path kConfigs = IDIOMKIT_CONFIGS;

// ---------------------------------------------------------------- criteria

Outcome reproduction_configs() {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kConfigs / "repro")) {
    if (entry.path().extension() != ".json") continue;
    const auto c = load_config(entry.path());
    validate(c);
    ++n;
  }
  return {n >= 10, std::to_string(n) + " reproduction configs parse and validate; not run (needs a pretrained encoder)"};
}

Outcome pattern_goldens() {
  LoadOptions opts;
  const auto examples = load_dataset(kFixtures / "pattern_examples.tsv", SplitName::kTest, opts).examples;
  std::map<std::string, const Example*> by_id;
  for (const auto& e : examples) by_id[e.id] = &e;
  std::ifstream in(kFixtures / "pattern_goldens.tsv");
  std::string line;
  std::getline(in, line);
  std::size_t total = 0, matched = 0;
  std::string first_mismatch;
  while (std::getline(in, line)) {
    const auto f = text::split(line, '\t');
    const auto pvps = select_pvps(builtin_pvps(f[0]), {f[1]});
    const auto got = render(pvps[0], *by_id.at(f[2]), "[MASK]").text;
    ++total;
    if (got == f[3]) ++matched;
    else if (first_mismatch.empty()) first_mismatch = f[0] + "/" + f[1] + "/" + f[2] + ": '" + got + "'";
  }
  return {total == 70 && matched == total,
          std::to_string(matched) + "/" + std::to_string(total) + " renders byte-exact" +
              (first_mismatch.empty() ? "" : ", first mismatch " + first_mismatch)};
}

Outcome probability_law() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  std::map<std::string, LabelLogits> logits;
  std::vector<Example> examples;
  for (int i = 0; i < 1000; ++i) {
    const auto id = "x" + std::to_string(i);
    logits[id] = {u(rng), u(rng)};
    examples.push_back({id, "EN", "night owl", "He is a night owl.", std::nullopt});
  }
  testing::StubMlm stub(logits);
  const auto pvp = select_pvps(builtin_pvps("EN"), {"P3"}).front();
  double worst_sum = 0.0, worst_ref = 0.0;
  for (const auto& e : examples) {
    const auto p = class_probs(stub, pvp, e);
    const auto& l = logits.at(e.id);
    // independent two-term softmax: p_literal = 1 / (1 + e^(idiom - literal))
    const double ref_literal = 1.0 / (1.0 + std::exp(l.idiom - l.literal));
    const double ref_idiom = 1.0 / (1.0 + std::exp(l.literal - l.idiom));
    worst_sum = std::max(worst_sum, std::abs(p.p_literal + p.p_idiomatic - 1.0));
    worst_ref = std::max({worst_ref, std::abs(p.p_literal - ref_literal), std::abs(p.p_idiomatic - ref_idiom)});
  }
  return {worst_sum <= 1e-9 && worst_ref <= 1e-12,
          "max |sum-1| " + fmt("%.1e", worst_sum) + " (tol 1e-9), max |p-ref| " + fmt("%.1e", worst_ref) +
              " (tol 1e-12) over 1000 pairs"};
}

Outcome distillation_oracle() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 2.0);
  const auto pvps = builtin_pvps("EN");
  std::vector<Example> examples;
  std::vector<std::map<std::string, LabelLogits>> tables(5);
  for (int i = 0; i < 500; ++i) {
    const auto id = "u" + std::to_string(i);
    examples.push_back({id, "EN", "night owl", "A night owl " + id + ".", std::nullopt});
    for (auto& t : tables) t[id] = {n(rng), n(rng)};
  }
  Ensemble ensemble;
  for (std::size_t m = 0; m < 5; ++m) {
    ensemble.members.push_back({pvps[m], m, std::make_unique<testing::StubMlm>(tables[m]), {}});
  }
  const auto soft = soft_annotate(ensemble, examples);
  double worst = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    double mean_idiom = 0.0;
    for (const auto& t : tables) {
      const auto& l = t.at(examples[i].id);
      mean_idiom += std::exp(l.idiom) / (std::exp(l.idiom) + std::exp(l.literal));
    }
    mean_idiom /= 5.0;
    const auto& d = soft.set.entries[i].distribution;
    worst = std::max({worst, std::abs(d.p_idiomatic - mean_idiom), std::abs(d.p_literal - (1.0 - mean_idiom))});
  }
  return {soft.set.entries.size() == 500 && worst <= 1e-9,
          "max deviation " + fmt("%.1e", worst) + " from out-of-pipeline mean (tol 1e-9) on 500 examples, 5 members"};
}

// Toy dataset + config on disk; every pipeline criterion runs through
// run_experiment so the determinism check covers the same configs.
struct ToyRun {
  testing::TempDir dir;
  ExperimentConfig config;
};

std::unique_ptr<ToyRun> oracle_toy() {
  auto run = std::make_unique<ToyRun>();
  synthetic::ToyOptions toy;
  toy.seed = 31;
  toy.train_rows = 400;
  toy.test_rows = 100;
  toy.cues_per_class = 1;
  toy.cue_purity = 1.0;
  synthetic::write_toy_dataset(run->dir.path(), toy);
  auto& c = run->config;
  c = load_config(run->dir / "pet.json");
  c.backend.kind = BackendKind::kOracle;
  c.labeled_size = 100;
  c.unlabeled_size = 300;
  c.seeds = {1, 2, 3};
  c.output_dir = (run->dir / "run").string();
  return run;
}

std::unique_ptr<ToyRun> tiny_toy(std::size_t labeled, std::vector<std::uint64_t> seeds, std::uint64_t sample_seed) {
  auto run = std::make_unique<ToyRun>();
  synthetic::ToyOptions toy;  // 20 train-only + 20 test-only MWEs
  toy.seed = 5;
  toy.train_rows = 3000;
  toy.test_rows = 400;
  synthetic::write_toy_dataset(run->dir.path(), toy);
  auto& c = run->config;
  c = load_config(run->dir / "pet.json");
  c.labeled_size = labeled;
  c.unlabeled_size = 1000;
  c.seeds = std::move(seeds);
  c.sample_seed = sample_seed;
  c.output_dir = (run->dir / "run").string();
  return run;
}

Outcome oracle_end_to_end() {
  auto run = oracle_toy();
  const auto result = run_experiment(run->config);
  const double f1 = result.report.overall;
  return {f1 == 1.0 && result.report.total == 100,
          "macro F1 " + fmt("%.4f", f1) + " on " + std::to_string(result.report.total) +
              " held-out examples (5 PVPs x 3 seeds, oracle members, distilled tiny classifier)"};
}

Outcome tiny_zero_shot() {
  std::map<std::size_t, double> mean;
  std::ostringstream detail;
  for (std::size_t n : {10u, 100u, 1000u}) {
    double sum = 0.0;
    for (std::uint64_t s : {1u, 2u, 3u}) {
      auto run = tiny_toy(n, {s}, s);
      sum += run_experiment(run->config).report.overall;
    }
    mean[n] = sum / 3.0;
  }
  auto full = tiny_toy(1000, {1, 2, 3}, 42);
  const double f1_full = run_experiment(full->config).report.overall;
  detail << "PET-all 1000 (5 PVPs x 3 seeds) F1 " << fmt("%.4f", f1_full) << " (min 0.90); mean F1 over 3 seeds: "
         << "10 -> " << fmt("%.4f", mean[10]) << ", 100 -> " << fmt("%.4f", mean[100]) << ", 1000 -> "
         << fmt("%.4f", mean[1000]);
  return {f1_full >= 0.90 && mean[1000] > mean[100] && mean[100] > mean[10], detail.str()};
}

Outcome ipet_mechanics() {
  std::vector<Example> labeled, pool;
  std::unordered_map<std::string, Label> gold;
  for (int i = 0; i < 10; ++i) {
    labeled.push_back({"l" + std::to_string(i), "EN", "night owl", "a night owl " + std::to_string(i),
                       i % 2 ? Label::kLiteral : Label::kIdiomatic});
  }
  for (int i = 0; i < 300; ++i) {
    const auto id = "u" + std::to_string(i);
    pool.push_back({id, "EN", "night owl", "the night owl " + id, std::nullopt});
    gold[id] = i % 2 ? Label::kLiteral : Label::kIdiomatic;
  }
  const AdapterFactory factory = [&](std::uint64_t) {
    return std::make_unique<OracleMlm>(testing::verbalizer_vocabulary(), Tokenizer(), 8, gold);
  };
  GenerationPlan plan;
  plan.generations = 3;
  plan.growth_factor = 5.0;
  const auto pvps = select_pvps(builtin_pvps("EN"), {"P1", "P2"});
  const auto result = ipet_run(pvps, labeled, pool, plan, {1, 2, 3}, factory, {}, 9);

  bool sizes_ok = result.training_sizes.size() == 4;
  for (std::size_t g = 0; sizes_ok && g < result.training_sizes.size(); ++g) {
    const auto expected = std::min<std::size_t>(
        static_cast<std::size_t>(10 * std::pow(5.0, static_cast<double>(g))), 10 + 300);
    for (auto s : result.training_sizes[g]) sizes_ok = sizes_ok && s == expected;
  }
  std::size_t self_refs = 0, wrong = 0;
  std::map<std::pair<std::size_t, std::string>, std::pair<std::size_t, std::size_t>> per_member;
  for (const auto& a : result.audit) {
    if (a.labeling_index == a.member_index || a.labeling_member == a.member) ++self_refs;
    if (a.label != gold.at(a.example_id)) ++wrong;
    auto& counts = per_member[{a.generation, a.member}];
    (a.label == Label::kIdiomatic ? counts.first : counts.second)++;
  }
  std::size_t ratio_violations = 0;
  for (const auto& [key, counts] : per_member) {
    const double half = static_cast<double>(counts.first + counts.second) / 2.0;
    if (std::abs(static_cast<double>(counts.first) - half) > 1.0) ++ratio_violations;
  }
  std::ostringstream d;
  d << "sizes";
  for (const auto& g : result.training_sizes) d << " " << g.front();
  d << (sizes_ok ? " (exact)" : " (MISMATCH)") << "; " << result.audit.size() << " pseudo-labels, " << self_refs
    << " self-labeled, " << wrong << " differ from gold, " << ratio_violations << " ratio violations";
  return {sizes_ok && self_refs == 0 && wrong == 0 && ratio_violations == 0 && !result.audit.empty(), d.str()};
}

Outcome bertram_properties() {
  const auto f = testing::make_bertram_fixture(100, 0, 20, 16, 11);
  auto model = make_bertram_model(f.encoder, f.table);

  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_int_distribution<std::size_t> word(0, f.train_words.size() - 1), k(1, 20);
  double worst_sum = 0.0, worst_perm = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto probe = model;
    for (Eigen::Index i = 0; i < probe.query.size(); ++i) probe.query(i) = normal(rng);
    const auto w = word(rng);
    ContextSet set = f.train_contexts[w];
    set.contexts.resize(k(rng));
    const auto out = infer_embedding_traced(f.train_words[w].first, set, probe);
    double sum = 0.0;
    for (double a : out.attention) sum += a;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    std::shuffle(set.contexts.begin(), set.contexts.end(), rng);
    worst_perm = std::max(worst_perm,
                          (infer_embedding(f.train_words[w].first, set, probe).vector - out.embedding.vector).norm());
  }

  MimicHyper hyper;
  hyper.steps = 200;
  hyper.contexts_per_word = 20;
  const auto trained = train_mimic(f.train_words, f.train_contexts, model, hyper, 2);
  const double cos = testing::mean_cosine(trained.model, f.train_words, f.train_contexts);
  std::ostringstream d;
  d << "max |sum w - 1| " << fmt("%.1e", worst_sum) << " (tol 1e-6); permutation diff " << fmt("%.1e", worst_perm)
    << " (tol 1e-9); mimic loss " << fmt("%.4f", trained.initial_loss) << " -> " << fmt("%.4f", trained.final_loss)
    << ", training cosine " << fmt("%.4f", cos) << " (min 0.95)";
  return {worst_sum <= 1e-6 && worst_perm <= 1e-9 && cos >= 0.95 && trained.final_loss < 0.5 * trained.initial_loss,
          d.str()};
}

Outcome injection_round_trip() {
  testing::TempDir dir;
  synthetic::ToyOptions toy;
  toy.train_rows = 200;
  toy.test_rows = 40;
  toy.corpus_lines = 400;
  const auto data = synthetic::make_toy_data(toy);
  const auto corpus = synthetic::make_toy_corpus(data, toy.corpus_lines, 3);
  {
    std::ofstream out(dir / "corpus.txt");
    for (const auto& l : corpus) out << l << '\n';
  }
  const auto pvp = select_pvps(builtin_pvps("EN"), {"P4"}).front();
  Tokenizer tok;
  const auto vocab = vocabulary_for({&data.train, &data.test}, {pvp}, tok);
  TinyConfig cfg;
  cfg.dim = 16;
  auto encoder = std::make_shared<TinyMlm>(vocab, tok, cfg, 4);
  std::vector<std::string> forms;
  for (const auto& m : data.train_mwes) forms.push_back(m);
  const auto model = make_bertram_model(encoder, build_ngram_table(forms, 3, 5, cfg.dim, 0.1, 6));

  const std::vector<std::string> mwes(data.test_mwes.begin(), data.test_mwes.begin() + 10);
  const auto sets = harvest_contexts_many(dir / "corpus.txt", mwes, 150);
  std::vector<MWEEmbedding> embeddings;
  for (std::size_t i = 0; i < mwes.size(); ++i) embeddings.push_back(infer_embedding(mwes[i], sets[i], model));

  TinyMlm adapter = *encoder;
  const auto before = adapter.params();
  const auto size = adapter.vocabulary().size();
  inject_embeddings(adapter, embeddings);

  const auto& after = adapter.params();
  const auto rows = static_cast<Eigen::Index>(size);
  const bool rows_kept = after.embedding.topRows(rows) == before.embedding &&
                         after.output.topRows(rows) == before.output &&
                         after.output_bias.topRows(rows) == before.output_bias;
  bool vectors_ok = true;
  for (const auto& e : embeddings) {
    vectors_ok = vectors_ok && adapter.input_embedding(*adapter.vocabulary().find(text::normalize_form(e.mwe))) == e.vector;
  }

  // the MWE must reach the model as a single token
  const auto& probe = *std::find_if(data.test.begin(), data.test.end(),
                                    [&](const Example& e) { return e.mwe == mwes[0]; });
  auto masked = render(pvp, probe, adapter.mask_marker());
  const auto input = adapter.encode(masked);
  const auto phrase_id = *adapter.vocabulary().find(text::normalize_form(mwes[0]));
  const auto occurrences = std::count(input.ids.begin(), input.ids.end(), phrase_id);
  const auto p = class_probs(adapter, pvp, probe);
  const bool single_token = occurrences == 2;  // sentence and template both mention the MWE
  std::ostringstream d;
  d << "vocabulary " << size << " -> " << adapter.vocabulary().size() << "; prior rows "
    << (rows_kept ? "bit-exact" : "CHANGED") << "; injected vectors " << (vectors_ok ? "exact" : "DIFFER")
    << "; '" << mwes[0] << "' encoded as one token " << occurrences << "x in the P4 input; class_probs sum "
    << fmt("%.12f", p.p_idiomatic + p.p_literal);
  return {adapter.vocabulary().size() == size + 10 && rows_kept && vectors_ok && single_token, d.str()};
}

Outcome metric_correctness() {
  // brute force: 2x2 confusion matrix, per-class F1 = 2tp / (2tp + fp + fn)
  auto brute = [](const std::vector<Label>& p, const std::vector<Label>& g) {
    long m[2][2] = {{0, 0}, {0, 0}};  // [gold][pred]
    for (std::size_t i = 0; i < p.size(); ++i) ++m[static_cast<int>(g[i])][static_cast<int>(p[i])];
    double f[2];
    for (int c = 0; c < 2; ++c) {
      const long tp = m[c][c], fp = m[1 - c][c], fn = m[c][1 - c];
      f[c] = 2 * tp + fp + fn == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return (f[1] + f[0]) / 2.0;
  };
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> len(1, 60);
  std::uniform_real_distribution<double> bias(0.0, 1.0);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::bernoulli_distribution gp(bias(rng)), pp(bias(rng));
    std::vector<Label> p, g;
    for (std::size_t i = len(rng); i > 0; --i) {
      g.push_back(gp(rng) ? Label::kIdiomatic : Label::kLiteral);
      p.push_back(pp(rng) ? Label::kIdiomatic : Label::kLiteral);
    }
    if (macro_f1(p, g) != brute(p, g)) ++mismatches;
  }
  using L = Label;
  const std::vector<Label> golds{L::kIdiomatic, L::kIdiomatic, L::kLiteral, L::kLiteral};
  const std::vector<Label> preds{L::kIdiomatic, L::kLiteral, L::kLiteral, L::kLiteral};
  const double fixture = macro_f1(preds, golds);
  return {mismatches == 0 && fixture == brute(preds, golds) && std::abs(fixture - 0.7333) < 5e-5,
          std::to_string(mismatches) + " mismatches over 1000 random vectors (exact); fixture " +
              fmt("%.4f", fixture)};
}

Outcome determinism() {
  std::vector<std::string> notes;
  bool all = true;
  auto twice = [&](std::unique_ptr<ToyRun> run, const std::string& name) {
    run_experiment(run->config);
    const auto first = testing::read_file(std::filesystem::path(run->config.output_dir) / "predictions.tsv");
    run->config.output_dir += "_again";
    run_experiment(run->config);
    const auto second = testing::read_file(std::filesystem::path(run->config.output_dir) / "predictions.tsv");
    const bool same = !first.empty() && first == second;
    all = all && same;
    notes.push_back(name + (same ? " identical" : " DIFFER"));
  };
  twice(oracle_toy(), "oracle PET");
  twice(tiny_toy(100, {1, 2, 3}, 42), "tiny PET-all 100");
  std::string d = "prediction files on rerun: ";
  for (std::size_t i = 0; i < notes.size(); ++i) d += (i ? ", " : "") + notes[i];
  return {all, d};
}

struct Criterion {
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"reproduction-configs", 5, reproduction_configs},
      {"pattern-goldens", 1, pattern_goldens},
      {"probability-law", 1, probability_law},
      {"distillation-oracle", 5, distillation_oracle},
      {"oracle-end-to-end", 30, oracle_end_to_end},
      {"tiny-zero-shot", 300, tiny_zero_shot},
      {"ipet-mechanics", 30, ipet_mechanics},
      {"bertram-properties", 180, bertram_properties},
      {"injection-round-trip", 5, injection_round_trip},
      {"metric-correctness", 1, metric_correctness},
      {"determinism", 300, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const Error& e) {
      o = {false, std::string("error [") + e.module() + "] " + to_string(e.kind()) + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %-22s %s [%.2fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.limit_seconds, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
