#include "idiomkit/ipet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "idiomkit/error.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "ipet";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Candidate {
  std::size_t pool_index;
  std::size_t labeler;
  Label label;
  double confidence;
};

}  // namespace

void GenerationPlan::validate() const {
  if (generations == 0) fail(ErrorKind::kArgument, "iPET needs at least one generation");
  if (!(growth_factor > 1.0)) fail(ErrorKind::kArgument, "growth_factor must exceed 1");
  if (!(ratio.idiomatic > 0.0) || !(ratio.literal > 0.0)) {
    fail(ErrorKind::kArgument, "class ratio entries must be positive");
  }
}

std::size_t generation_size(std::size_t labeled, std::size_t pool, double growth_factor,
                            std::size_t generation) {
  const long double grown = static_cast<long double>(labeled) *
                            std::pow(static_cast<long double>(growth_factor),
                                     static_cast<long double>(generation));
  const std::size_t cap = labeled + pool;
  if (grown >= static_cast<long double>(cap)) return cap;
  return static_cast<std::size_t>(std::floor(grown + 1e-9L));
}

NextTrainingSet next_training_set(const Ensemble& models, std::size_t self_index,
                                  const std::vector<Example>& unlabeled,
                                  const std::vector<Example>& labeled_seed_set,
                                  std::size_t target_size, const ClassRatio& ratio,
                                  std::uint64_t seed) {
  const auto& members = models.members;
  if (members.size() < 2) {
    fail(ErrorKind::kArgument, "next_training_set needs at least two ensemble members");
  }
  if (self_index >= members.size()) fail(ErrorKind::kArgument, "member index out of range");
  if (target_size < labeled_seed_set.size()) {
    fail(ErrorKind::kArgument, "target size is smaller than the labeled seed set");
  }
  if (!(ratio.idiomatic > 0.0) || !(ratio.literal > 0.0)) {
    fail(ErrorKind::kArgument, "class ratio entries must be positive");
  }

  NextTrainingSet out;
  out.examples = labeled_seed_set;
  const std::size_t target = std::min(target_size, labeled_seed_set.size() + unlabeled.size());
  const std::size_t wanted = target - labeled_seed_set.size();
  if (wanted == 0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 2);
  std::vector<Candidate> idiomatic, literal;
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    std::size_t labeler = pick(rng);
    if (labeler >= self_index) ++labeler;
    const auto& m = members[labeler];
    try {
      const auto p = class_probs(*m.adapter, m.pvp, unlabeled[i]);
      const Label label = decide(p);
      (label == Label::kIdiomatic ? idiomatic : literal)
          .push_back({i, labeler, label, p.prob(label)});
    } catch (const Error& e) {
      out.warnings.push_back("example '" + unlabeled[i].id + "' skipped: " + e.what());
    }
  }
  auto by_confidence = [](const Candidate& a, const Candidate& b) {
    return a.confidence > b.confidence;
  };
  std::stable_sort(idiomatic.begin(), idiomatic.end(), by_confidence);
  std::stable_sort(literal.begin(), literal.end(), by_confidence);

  const double share = ratio.idiomatic / (ratio.idiomatic + ratio.literal);
  const auto quota_idiomatic =
      std::min(wanted, static_cast<std::size_t>(std::llround(static_cast<double>(wanted) * share)));
  const std::size_t quota_literal = wanted - quota_idiomatic;

  auto take = [&](const std::vector<Candidate>& pool, std::size_t quota, std::size_t& shortfall,
                  const char* name) {
    const std::size_t n = std::min(quota, pool.size());
    shortfall = quota - n;
    if (shortfall > 0) {
      out.warnings.push_back("short " + std::to_string(shortfall) + " " + name +
                             " pseudo-labels for member " + members[self_index].name());
    }
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = pool[k];
      Example ex = unlabeled[c.pool_index];
      ex.label = c.label;
      out.examples.push_back(std::move(ex));
      PseudoLabel pl;
      pl.member = members[self_index].name();
      pl.member_index = self_index;
      pl.example_id = unlabeled[c.pool_index].id;
      pl.label = c.label;
      pl.confidence = c.confidence;
      pl.labeling_member = members[c.labeler].name();
      pl.labeling_index = c.labeler;
      out.provenance.push_back(std::move(pl));
    }
  };
  take(idiomatic, quota_idiomatic, out.shortfall_idiomatic, "idiomatic");
  take(literal, quota_literal, out.shortfall_literal, "literal");
  return out;
}

IpetResult ipet_run(const std::vector<PatternVerbalizerPair>& pvps,
                    const std::vector<Example>& labeled, const std::vector<Example>& unlabeled,
                    const GenerationPlan& plan, const std::vector<std::uint64_t>& seeds,
                    const AdapterFactory& factory, const TrainingHyper& hyper,
                    std::uint64_t run_seed) {
  plan.validate();
  if (pvps.size() * seeds.size() < 2) {
    fail(ErrorKind::kArgument, "iPET needs at least two members (PVPs x seeds)");
  }

  IpetResult result;
  Ensemble current = train_ensemble(pvps, labeled, seeds, factory, hyper);
  result.training_sizes.emplace_back(current.members.size(), labeled.size());

  for (std::size_t g = 1; g <= plan.generations; ++g) {
    const std::size_t size = generation_size(labeled.size(), unlabeled.size(), plan.growth_factor, g);
    Ensemble next;
    next.provenance = current.provenance;
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < current.members.size(); ++i) {
      const auto& old = current.members[i];
      auto grown = next_training_set(current, i, unlabeled, labeled, size, plan.ratio,
                                     mix(mix(run_seed, g), i));
      for (auto& pl : grown.provenance) {
        pl.generation = g;
        result.audit.push_back(std::move(pl));
      }
      for (auto& w : grown.warnings) result.warnings.push_back("generation " + std::to_string(g) + ": " + w);
      sizes.push_back(grown.examples.size());

      EnsembleMember member{old.pvp, old.seed, factory(old.seed), {}};
      if (member.adapter->trainable()) {
        member.log = fine_tune(*member.adapter, member.pvp, grown.examples, hyper, old.seed);
      }
      next.members.push_back(std::move(member));
    }
    result.training_sizes.push_back(std::move(sizes));
    current = std::move(next);
  }
  result.final_generation = std::move(current);
  return result;
}

void write_audit_log(const std::filesystem::path& path, const std::vector<PseudoLabel>& audit,
                     const LabelEncoding& encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write audit log '" + path.string() + "'");
  out << "generation\tmember\texample_id\tpseudo_label\tconfidence\tlabeling_member\n";
  char buf[32];
  for (const auto& a : audit) {
    std::snprintf(buf, sizeof buf, "%.6f", a.confidence);
    out << a.generation << '\t' << a.member << '\t' << a.example_id << '\t'
        << encoding.encode(a.label) << '\t' << buf << '\t' << a.labeling_member << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace idiomkit
