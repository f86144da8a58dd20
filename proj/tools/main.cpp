#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "idiomkit/error.hpp"
#include "idiomkit/experiment.hpp"
#include "idiomkit/synthetic.hpp"

using namespace idiomkit;

namespace {

struct RunFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string backend;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", flags.out, "output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "labeled-sample seed (overrides config)");
  cmd->add_option("--backend", flags.backend, "backend kind")
      ->check(CLI::IsMember({"external", "tiny", "oracle"}));
}

ExperimentConfig resolve(const RunFlags& flags, Task task) {
  auto config = load_config(flags.config);
  config.task = task;
  if (!flags.out.empty()) config.output_dir = flags.out;
  if (flags.seed) config.sample_seed = *flags.seed;
  if (!flags.backend.empty()) config.backend.kind = parse_backend_kind(flags.backend);
  return config;
}

void print_result(const ExperimentResult& result, bool has_report) {
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  if (has_report) std::cout << render_table({result.report});
  for (const auto& a : result.artifacts) std::cout << "wrote " << a.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Idiomaticity detection with cloze-style few-shot learning"};
  app.require_subcommand(1);

  RunFlags pet_flags, ipet_flags, btrain_flags, binject_flags;
  auto* pet = app.add_subcommand("train-pet", "PET ensemble, soft labels, distilled classifier");
  add_run_flags(pet, pet_flags);
  auto* ipet = app.add_subcommand("train-ipet", "iterative PET over several generations");
  add_run_flags(ipet, ipet_flags);
  auto* btrain = app.add_subcommand("bertram-train", "train BERTRAM by mimicking frequent-word embeddings");
  add_run_flags(btrain, btrain_flags);
  auto* binject = app.add_subcommand("bertram-inject", "infer MWE embeddings and add them to the vocabulary");
  add_run_flags(binject, binject_flags);

  std::string harvest_corpus, harvest_mwes, harvest_out;
  std::size_t harvest_k = 150;
  auto* harvest = app.add_subcommand("harvest", "collect corpus contexts for the MWEs of a dataset");
  harvest->add_option("--corpus", harvest_corpus, "newline-delimited text")->required();
  harvest->add_option("--mwes", harvest_mwes, "dataset TSV whose MWEs are harvested")->required();
  harvest->add_option("-k", harvest_k, "contexts per MWE");
  harvest->add_option("--out", harvest_out, "output TSV (mwe, context)")->required();

  std::string eval_pred, eval_gold, eval_out, eval_overall = "pooled";
  std::string eval_idiomatic = "1", eval_literal = "0";
  auto* evaluate = app.add_subcommand("evaluate", "score a prediction file against gold labels");
  evaluate->add_option("--predictions", eval_pred)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gold", eval_gold)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "report JSON path");
  evaluate->add_option("--overall", eval_overall)->check(CLI::IsMember({"pooled", "language-mean"}));
  evaluate->add_option("--label-idiomatic", eval_idiomatic);
  evaluate->add_option("--label-literal", eval_literal);

  std::vector<std::string> report_files;
  auto* report = app.add_subcommand("report", "tabulate report.json files");
  report->add_option("reports", report_files)->required()->check(CLI::ExistingFile);

  std::string toy_out;
  std::uint64_t toy_seed = 7;
  std::size_t toy_train = 2000, toy_test = 400;
  auto* toy = app.add_subcommand("make-toy", "write a synthetic idiomaticity dataset and corpus");
  toy->add_option("--out", toy_out, "output directory")->required();
  toy->add_option("--seed", toy_seed);
  toy->add_option("--train", toy_train, "train rows");
  toy->add_option("--test", toy_test, "test rows");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pet->parsed()) {
      print_result(run_experiment(resolve(pet_flags, Task::kPet)), true);
    } else if (ipet->parsed()) {
      print_result(run_experiment(resolve(ipet_flags, Task::kIpet)), true);
    } else if (btrain->parsed()) {
      print_result(run_experiment(resolve(btrain_flags, Task::kBertramTrain)), false);
    } else if (binject->parsed()) {
      print_result(run_experiment(resolve(binject_flags, Task::kBertramInject)), false);
    } else if (harvest->parsed()) {
      LoadOptions opts;
      opts.require_mwe_in_sentence = false;
      const auto split = load_dataset(harvest_mwes, SplitName::kTest, opts);
      std::vector<std::string> mwes;
      for (const auto& e : split.examples) {
        if (std::find(mwes.begin(), mwes.end(), e.mwe) == mwes.end()) mwes.push_back(e.mwe);
      }
      const auto sets = harvest_contexts_many(harvest_corpus, mwes, harvest_k);
      std::ofstream out(harvest_out);
      if (!out) throw Error("corpus", ErrorKind::kIo, "cannot write '" + harvest_out + "'");
      out << "mwe\tcontext\n";
      for (const auto& s : sets) {
        if (s.contexts.empty()) std::cerr << "warning: no contexts for '" << s.mwe << "'\n";
        for (const auto& c : s.contexts) out << s.mwe << '\t' << c << '\n';
      }
    } else if (evaluate->parsed()) {
      LoadOptions opts;
      opts.encoding = {eval_idiomatic, eval_literal};
      opts.require_mwe_in_sentence = false;
      const auto gold = load_dataset(eval_gold, SplitName::kTest, opts);
      auto r = evaluate_predictions(eval_pred, gold.examples, opts.encoding,
                                    eval_overall == "pooled" ? OverallMode::kPooled : OverallMode::kLanguageMean);
      r.name = "evaluate";
      std::cout << render_table({r});
      if (!eval_out.empty()) {
        std::ofstream out(eval_out);
        out << report_to_json(r).dump(2) << "\n";
      }
    } else if (report->parsed()) {
      std::vector<Report> reports;
      for (const auto& f : report_files) {
        std::ifstream in(f);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw Error("harness", ErrorKind::kFormat, "'" + f + "' is not valid JSON");
        reports.push_back(report_from_json(j));
      }
      std::cout << render_table(reports);
    } else if (toy->parsed()) {
      synthetic::ToyOptions opts;
      opts.seed = toy_seed;
      opts.train_rows = toy_train;
      opts.test_rows = toy_test;
      for (const auto& p : synthetic::write_toy_dataset(toy_out, opts)) std::cout << "wrote " << p.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "] " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
