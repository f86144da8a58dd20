#include "idiomkit/pet.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "pet";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

}  // namespace

Label decide(const ClassDistribution& probs) {
  return probs.p_idiomatic > probs.p_literal ? Label::kIdiomatic : Label::kLiteral;
}

ClassDistribution FinalClassifier::probs(const Example& example) const {
  return class_probs(*adapter, pvp, example);
}

Ensemble train_ensemble(const std::vector<PatternVerbalizerPair>& pvps,
                        const std::vector<Example>& labeled,
                        const std::vector<std::uint64_t>& seeds, const AdapterFactory& factory,
                        const TrainingHyper& hyper) {
  if (pvps.empty()) fail(ErrorKind::kArgument, "train_ensemble needs at least one PVP");
  if (seeds.empty()) fail(ErrorKind::kArgument, "train_ensemble needs at least one seed");
  if (labeled.empty()) fail(ErrorKind::kArgument, "train_ensemble needs labeled examples");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    fail(ErrorKind::kArgument, "duplicate seeds");
  }
  std::set<std::string> ids;
  for (const auto& p : pvps) {
    if (!ids.insert(p.id()).second) fail(ErrorKind::kArgument, "duplicate PVP id " + p.id());
  }

  Ensemble ensemble;
  for (const auto& pvp : pvps) {
    for (const auto seed : seeds) {
      EnsembleMember member{pvp, seed, factory(seed), {}};
      if (member.adapter->trainable()) {
        member.log = fine_tune(*member.adapter, pvp, labeled, hyper, seed);
      } else {
        verbalizer_token_ids(*member.adapter, pvp);
      }
      ensemble.members.push_back(std::move(member));
    }
  }
  return ensemble;
}

SoftAnnotation soft_annotate(const Ensemble& ensemble, const std::vector<Example>& unlabeled,
                             const std::vector<double>& weights) {
  const auto& members = ensemble.members;
  if (members.empty()) fail(ErrorKind::kArgument, "soft_annotate needs a non-empty ensemble");
  if (!weights.empty()) {
    if (weights.size() != members.size()) {
      fail(ErrorKind::kArgument, "one weight per ensemble member is required");
    }
    if (std::any_of(weights.begin(), weights.end(), [](double w) { return w < 0.0; })) {
      fail(ErrorKind::kArgument, "ensemble weights must be non-negative");
    }
  }

  std::vector<LabelTokenIds> label_ids;
  for (const auto& m : members) label_ids.push_back(verbalizer_token_ids(*m.adapter, m.pvp));

  SoftAnnotation out;
  std::unordered_set<std::string> seen;
  for (const auto& ex : unlabeled) {
    if (!seen.insert(ex.id).second) fail(ErrorKind::kArgument, "duplicate example id '" + ex.id + "'");
    double sum_i = 0.0, sum_l = 0.0, total = 0.0;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto& m = members[k];
      try {
        auto masked = render(m.pvp, ex, m.adapter->mask_marker());
        const auto input = m.adapter->encode(masked);
        const auto p = two_way_softmax(m.adapter->label_logits(input, label_ids[k], ex));
        const double w = weights.empty() ? 1.0 : weights[k];
        sum_i += w * p.p_idiomatic;
        sum_l += w * p.p_literal;
        total += w;
      } catch (const Error& e) {
        out.failures.push_back({ex.id, m.name(), e.what()});
      }
    }
    if (total == 0.0) continue;
    out.set.entries.push_back({ex, {sum_i / total, sum_l / total}});
  }
  return out;
}

FinalClassifier distill(const SoftLabeledSet& softset, std::unique_ptr<MlmAdapter> backend,
                        const PatternVerbalizerPair& pvp, const TrainingHyper& hyper,
                        std::uint64_t seed) {
  if (softset.entries.empty()) fail(ErrorKind::kArgument, "distill needs a non-empty soft-labeled set");
  if (!backend || !backend->trainable()) {
    fail(ErrorKind::kCapability, "distillation needs a trainable backend");
  }
  std::vector<TrainTarget> targets;
  targets.reserve(softset.entries.size());
  for (const auto& e : softset.entries) targets.push_back({e.example, e.distribution});
  FinalClassifier classifier{std::move(backend), pvp, {}};
  classifier.log = fine_tune_soft(*classifier.adapter, pvp, targets, hyper, seed);
  return classifier;
}

Label predict(const FinalClassifier& classifier, const Example& example) {
  return decide(classifier.probs(example));
}

void write_predictions(const std::filesystem::path& path, const std::vector<Example>& examples,
                       const std::vector<Label>& labels, const LabelEncoding& encoding) {
  if (examples.size() != labels.size()) {
    fail(ErrorKind::kArgument, "predictions and examples differ in length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write predictions '" + path.string() + "'");
  out << "id\tlabel\n";
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out << examples[i].id << '\t' << encoding.encode(labels[i]) << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path,
                                            const LabelEncoding& encoding) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read predictions '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, "prediction file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id\tlabel") fail(ErrorKind::kFormat, "prediction file header must be 'id<TAB>label'");
  std::vector<PredictionRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 2) fail(ErrorKind::kFormat, "prediction row " + std::to_string(row) + ": expected 2 fields");
    const auto label = encoding.parse(f[1]);
    if (!label) fail(ErrorKind::kFormat, "prediction row " + std::to_string(row) + ": unparseable label '" + f[1] + "'");
    rows.push_back({f[0], *label});
  }
  return rows;
}

}  // namespace idiomkit
