#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "idiomkit/error.hpp"
#include "idiomkit/ipet.hpp"
#include "idiomkit/oracle_mlm.hpp"

using namespace idiomkit;
using testing::logits_for;
using testing::StubMlm;

namespace {

PatternVerbalizerPair pvp(const std::string& id) { return select_pvps(builtin_pvps("EN"), {id}).front(); }

Example ex(const std::string& id, std::optional<Label> label = std::nullopt) {
  return {id, "EN", "night owl", "He is a night owl " + id + ".", label};
}

Ensemble two_stubs(std::map<std::string, LabelLogits> labeler) {
  Ensemble e;
  e.members.push_back({pvp("P1"), 1, std::make_unique<StubMlm>(std::map<std::string, LabelLogits>{}), {}});
  e.members.push_back({pvp("P2"), 1, std::make_unique<StubMlm>(std::move(labeler)), {}});
  return e;
}

}  // namespace

TEST_CASE("generation_size follows the growth schedule with a cap") {
  CHECK(generation_size(4, 1000, 5.0, 0) == 4);
  CHECK(generation_size(4, 1000, 5.0, 1) == 20);
  CHECK(generation_size(4, 1000, 5.0, 2) == 100);
  CHECK(generation_size(4, 1000, 5.0, 3) == 500);
  CHECK(generation_size(4, 1000, 5.0, 4) == 1004);
  CHECK(generation_size(10, 30, 1000.0, 1) == 40);
  CHECK(generation_size(3, 100, 2.5, 1) == 7);
}

TEST_CASE("next_training_set takes the most confident candidates per class") {
  // confidences .99 .95 .9 .6 .55 .51, alternating predicted class
  const std::vector<double> conf{0.99, 0.95, 0.9, 0.6, 0.55, 0.51};
  std::map<std::string, LabelLogits> logits;
  std::vector<Example> pool;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const std::string id = "c" + std::to_string(i + 1);
    pool.push_back(ex(id));
    logits[id] = logits_for(i % 2 == 0 ? conf[i] : 1.0 - conf[i]);
  }
  std::reverse(pool.begin(), pool.end());  // pool order must not matter
  const auto models = two_stubs(logits);
  const std::vector<Example> seed_set{ex("s1", Label::kIdiomatic), ex("s2", Label::kLiteral)};

  const auto all = next_training_set(models, 0, pool, seed_set, 8, {}, 1);
  REQUIRE(all.examples.size() == 8);
  CHECK(all.examples[0].id == "s1");
  std::vector<std::string> order;
  for (const auto& p : all.provenance) order.push_back(p.example_id);
  CHECK(order == std::vector<std::string>{"c1", "c3", "c5", "c2", "c4", "c6"});
  CHECK(all.provenance[0].confidence == doctest::Approx(0.99));
  CHECK(all.examples[2].label == Label::kIdiomatic);
  CHECK(all.examples[5].label == Label::kLiteral);

  const auto top = next_training_set(models, 0, pool, seed_set, 4, {}, 1);
  CHECK(top.provenance[0].example_id == "c1");
  CHECK(top.provenance[1].example_id == "c2");

  const auto none = next_training_set(models, 0, pool, seed_set, 2, {}, 1);
  CHECK(none.examples == seed_set);
  CHECK(none.provenance.empty());
}

TEST_CASE("next_training_set errors and shortfalls") {
  Ensemble single;
  single.members.push_back({pvp("P1"), 1, std::make_unique<StubMlm>(std::map<std::string, LabelLogits>{}), {}});
  CHECK_THROWS_AS(next_training_set(single, 0, {ex("a")}, {}, 1, {}, 1), Error);

  // every pool example is predicted idiomatic: literal quota goes short
  std::map<std::string, LabelLogits> logits;
  std::vector<Example> pool;
  for (int i = 0; i < 10; ++i) {
    pool.push_back(ex("p" + std::to_string(i)));
    logits["p" + std::to_string(i)] = logits_for(0.8);
  }
  const auto out = next_training_set(two_stubs(logits), 0, pool, {}, 8, {}, 1);
  CHECK(out.examples.size() == 4);
  CHECK(out.shortfall_literal == 4);
  CHECK(out.shortfall_idiomatic == 0);
  CHECK_FALSE(out.warnings.empty());
}

TEST_CASE("pseudo-labels never come from the member itself and respect the ratio") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_int_distribution<std::size_t> members_dist(2, 5), target_dist(0, 60);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Example> pool;
    std::vector<std::map<std::string, LabelLogits>> tables(members_dist(rng));
    for (int i = 0; i < 80; ++i) {
      pool.push_back(ex("u" + std::to_string(i)));
      for (auto& t : tables) t["u" + std::to_string(i)] = {u(rng), u(rng)};
    }
    Ensemble e;
    for (std::size_t m = 0; m < tables.size(); ++m) {
      e.members.push_back({pvp("P1"), m, std::make_unique<StubMlm>(tables[m]), {}});
    }
    const ClassRatio ratio{1.0 + static_cast<double>(trial % 3), 1.0};
    const std::size_t wanted = target_dist(rng);
    for (std::size_t self = 0; self < tables.size(); ++self) {
      const auto out = next_training_set(e, self, pool, {}, wanted, ratio, static_cast<std::uint64_t>(trial));
      std::size_t idiomatic = 0;
      for (const auto& p : out.provenance) {
        CHECK(p.labeling_index != self);
        CHECK(p.member_index == self);
        if (p.label == Label::kIdiomatic) ++idiomatic;
      }
      const double share = ratio.idiomatic / (ratio.idiomatic + ratio.literal);
      const double expected = share * static_cast<double>(wanted);
      if (out.shortfall_idiomatic == 0 && out.shortfall_literal == 0) {
        CHECK(out.provenance.size() == wanted);
        CHECK(std::abs(static_cast<double>(idiomatic) - expected) <= 1.0);
      }
    }
  }
}

TEST_CASE("ipet_run with an oracle never corrupts labels") {
  std::vector<Example> labeled, pool;
  std::unordered_map<std::string, Label> gold;
  for (int i = 0; i < 4; ++i) labeled.push_back(ex("l" + std::to_string(i), i % 2 ? Label::kLiteral : Label::kIdiomatic));
  for (int i = 0; i < 60; ++i) {
    const auto id = "u" + std::to_string(i);
    pool.push_back(ex(id));
    gold[id] = i % 2 ? Label::kLiteral : Label::kIdiomatic;
  }
  const AdapterFactory factory = [&](std::uint64_t) {
    return std::make_unique<OracleMlm>(testing::verbalizer_vocabulary(), Tokenizer(), 4, gold);
  };
  GenerationPlan plan;
  plan.generations = 2;
  const auto result = ipet_run({pvp("P1"), pvp("P2")}, labeled, pool, plan, {1, 2}, factory, {}, 5);
  REQUIRE(result.training_sizes.size() == 3);
  CHECK(result.training_sizes[0] == std::vector<std::size_t>(4, 4));
  CHECK(result.training_sizes[1] == std::vector<std::size_t>(4, 20));
  CHECK(result.training_sizes[2] == std::vector<std::size_t>(4, 64));
  CHECK(result.final_generation.members.size() == 4);
  CHECK(result.audit.size() == 4 * 16 + 4 * 60);
  for (const auto& a : result.audit) {
    CHECK(a.label == gold.at(a.example_id));
    CHECK(a.labeling_member != a.member);
  }

  plan.generations = 0;
  CHECK_THROWS_AS(ipet_run({pvp("P1"), pvp("P2")}, labeled, pool, plan, {1}, factory, {}, 5), Error);
  plan.generations = 1;
  CHECK_THROWS_AS(ipet_run({pvp("P1")}, labeled, pool, plan, {1}, factory, {}, 5), Error);
}

TEST_CASE("audit log rows") {
  testing::TempDir dir;
  PseudoLabel p;
  p.generation = 2;
  p.member = "P1/3";
  p.example_id = "u7";
  p.label = Label::kIdiomatic;
  p.confidence = 0.875;
  p.labeling_member = "P2/3";
  write_audit_log(dir / "a.tsv", {p});
  CHECK(testing::read_file(dir / "a.tsv") ==
        "generation\tmember\texample_id\tpseudo_label\tconfidence\tlabeling_member\n"
        "2\tP1/3\tu7\t1\t0.875000\tP2/3\n");
}
