#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idiomkit/corpus.hpp"

namespace idiomkit {

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Precision, recall and F1 of one class; any 0/0 ratio counts as 0.
ClassScore class_score(const std::vector<Label>& preds, const std::vector<Label>& golds, Label cls);

// Unweighted mean of the idiomatic and literal F1.
double macro_f1(const std::vector<Label>& preds, const std::vector<Label>& golds);

enum class OverallMode {
  kPooled,        // macro F1 over all predictions together
  kLanguageMean,  // mean of per-language scores
};

struct LanguageScore {
  std::string language;
  double macro_f1 = 0.0;
  std::size_t count = 0;
};

struct Report {
  std::string name;
  std::vector<LanguageScore> per_language;  // EN, PT, GL first, then others A-Z
  double overall = 0.0;
  std::size_t total = 0;
  OverallMode overall_mode = OverallMode::kPooled;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::string created_at;

  const LanguageScore* language(const std::string& code) const;
};

Report per_language_report(const std::vector<Label>& preds, const std::vector<Label>& golds,
                           const std::vector<std::string>& languages,
                           OverallMode mode = OverallMode::kPooled);

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

// Markdown-style table, one row per report, language columns in the
// EN, PT, GL, ..., Overall order. Scores to four decimals.
std::string render_table(const std::vector<Report>& reports);

}  // namespace idiomkit
