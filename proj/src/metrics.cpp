#include "idiomkit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "idiomkit/error.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "harness";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

int language_rank(const std::string& code) {
  if (code == "EN") return 0;
  if (code == "PT") return 1;
  if (code == "GL") return 2;
  return 3;
}

bool language_before(const std::string& a, const std::string& b) {
  const int ra = language_rank(a), rb = language_rank(b);
  return ra != rb ? ra < rb : a < b;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassScore class_score(const std::vector<Label>& preds, const std::vector<Label>& golds, Label cls) {
  if (preds.size() != golds.size()) {
    fail(ErrorKind::kArgument, "predictions (" + std::to_string(preds.size()) + ") and golds (" +
                                   std::to_string(golds.size()) + ") differ in length");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == cls, g = golds[i] == cls;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  ClassScore s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  // 2PR/(P+R) in count form; zero whenever tp is zero.
  s.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return s;
}

double macro_f1(const std::vector<Label>& preds, const std::vector<Label>& golds) {
  if (preds.empty()) fail(ErrorKind::kArgument, "macro F1 of an empty prediction list");
  const double fi = class_score(preds, golds, Label::kIdiomatic).f1;
  const double fl = class_score(preds, golds, Label::kLiteral).f1;
  return (fi + fl) / 2.0;
}

const LanguageScore* Report::language(const std::string& code) const {
  for (const auto& l : per_language) {
    if (l.language == code) return &l;
  }
  return nullptr;
}

Report per_language_report(const std::vector<Label>& preds, const std::vector<Label>& golds,
                           const std::vector<std::string>& languages, OverallMode mode) {
  if (preds.size() != golds.size() || preds.size() != languages.size()) {
    fail(ErrorKind::kArgument, "predictions, golds and languages must be aligned");
  }
  if (preds.empty()) fail(ErrorKind::kArgument, "report over an empty prediction list");

  std::map<std::string, std::pair<std::vector<Label>, std::vector<Label>>> slices;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto& s = slices[languages[i]];
    s.first.push_back(preds[i]);
    s.second.push_back(golds[i]);
  }
  Report r;
  for (const auto& [lang, s] : slices) {
    r.per_language.push_back({lang, macro_f1(s.first, s.second), s.first.size()});
  }
  std::sort(r.per_language.begin(), r.per_language.end(),
            [](const LanguageScore& a, const LanguageScore& b) { return language_before(a.language, b.language); });
  r.total = preds.size();
  r.overall_mode = mode;
  if (mode == OverallMode::kPooled) {
    r.overall = macro_f1(preds, golds);
  } else {
    double sum = 0.0;
    for (const auto& l : r.per_language) sum += l.macro_f1;
    r.overall = sum / static_cast<double>(r.per_language.size());
  }
  return r;
}

nlohmann::json report_to_json(const Report& report) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& l : report.per_language) {
    langs.push_back({{"language", l.language}, {"macro_f1", l.macro_f1}, {"count", l.count}});
  }
  return {
      {"name", report.name},
      {"per_language", langs},
      {"overall", report.overall},
      {"total", report.total},
      {"overall_mode", report.overall_mode == OverallMode::kPooled ? "pooled" : "language-mean"},
      {"config_hash", report.config_hash},
      {"seeds", report.seeds},
      {"created_at", report.created_at},
  };
}

Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.name = j.value("name", "");
    for (const auto& l : j.at("per_language")) {
      r.per_language.push_back({l.at("language").get<std::string>(), l.at("macro_f1").get<double>(),
                                l.value("count", std::size_t{0})});
    }
    r.overall = j.at("overall").get<double>();
    r.total = j.value("total", std::size_t{0});
    r.overall_mode = j.value("overall_mode", "pooled") == "pooled" ? OverallMode::kPooled
                                                                   : OverallMode::kLanguageMean;
    r.config_hash = j.value("config_hash", "");
    r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    r.created_at = j.value("created_at", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed report: ") + e.what());
  }
}

std::string render_table(const std::vector<Report>& reports) {
  std::vector<std::string> langs;
  for (const auto& r : reports) {
    for (const auto& l : r.per_language) {
      if (std::find(langs.begin(), langs.end(), l.language) == langs.end()) langs.push_back(l.language);
    }
  }
  std::sort(langs.begin(), langs.end(), language_before);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Model"};
  head.insert(head.end(), langs.begin(), langs.end());
  head.push_back("Overall");
  rows.push_back(head);
  char buf[32];
  for (const auto& r : reports) {
    std::vector<std::string> row{r.name.empty() ? "model" : r.name};
    for (const auto& lang : langs) {
      const auto* s = r.language(lang);
      if (s) {
        std::snprintf(buf, sizeof buf, "%.4f", s->macro_f1);
        row.emplace_back(buf);
      } else {
        row.emplace_back("-");
      }
    }
    std::snprintf(buf, sizeof buf, "%.4f", r.overall);
    row.emplace_back(buf);
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    out += "|";
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += " " + row[c] + std::string(width[c] - row[c].size(), ' ') + " |";
    }
    out += "\n";
  };
  emit(rows.front());
  out += "|";
  for (auto w : width) out += std::string(w + 2, '-') + "|";
  out += "\n";
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return out;
}

}  // namespace idiomkit
