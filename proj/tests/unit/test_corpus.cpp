#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "idiomkit/corpus.hpp"
#include "idiomkit/error.hpp"

using namespace idiomkit;
using testing::TempDir;
using testing::write_file;

namespace {

std::vector<Example> mixed_examples(std::size_t idiomatic, std::size_t literal) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < idiomatic + literal; ++i) {
    const bool idiom = i < idiomatic;
    out.push_back({"r" + std::to_string(i), i % 3 == 0 ? "PT" : "EN", "night owl",
                   "a night owl number " + std::to_string(i), idiom ? Label::kIdiomatic : Label::kLiteral});
  }
  std::rotate(out.begin(), out.begin() + static_cast<long>(out.size() / 3), out.end());
  return out;
}

}  // namespace

TEST_CASE("load_dataset parses rows verbatim and in file order") {
  TempDir dir;
  write_file(dir / "d.tsv",
             "id\tlanguage\tmwe\tsentence\tlabel\n"
             "a\tEN\tnight owl\tHe is a night owl.\t1\n"
             "b\tPT\tolho gordo\tEla tem olho gordo.\t0\n"
             "c\tEN\tbig fish\tA big fish , really\t1\n");
  const auto split = load_dataset(dir / "d.tsv", SplitName::kTrain);
  REQUIRE(split.examples.size() == 3);
  CHECK(split.examples[0] == Example{"a", "EN", "night owl", "He is a night owl.", Label::kIdiomatic});
  CHECK(split.examples[1].label == Label::kLiteral);
  CHECK(split.examples[2].sentence == "A big fish , really");
}

TEST_CASE("load_dataset accepts any column order and unlabeled files") {
  TempDir dir;
  write_file(dir / "d.tsv", "sentence\tmwe\tid\tlanguage\nHe is a night owl.\tnight owl\tx1\tGL\n");
  const auto split = load_dataset(dir / "d.tsv", SplitName::kTest);
  REQUIRE(split.examples.size() == 1);
  CHECK(split.examples[0].id == "x1");
  CHECK_FALSE(split.examples[0].label.has_value());
}

TEST_CASE("load_dataset reports malformed input") {
  TempDir dir;
  SUBCASE("missing column is named") {
    write_file(dir / "d.tsv", "id\tlanguage\tsentence\na\tEN\tHe is a night owl.\n");
    try {
      load_dataset(dir / "d.tsv", SplitName::kTrain);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
      CHECK(std::string(e.what()).find("mwe") != std::string::npos);
    }
  }
  SUBCASE("label outside the alphabet gives the line number") {
    write_file(dir / "d.tsv",
               "id\tlanguage\tmwe\tsentence\tlabel\n"
               "a\tEN\tnight owl\tHe is a night owl.\t1\n"
               "b\tEN\tnight owl\tA night owl.\t2\n");
    try {
      load_dataset(dir / "d.tsv", SplitName::kTrain);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("empty file") {
    write_file(dir / "d.tsv", "");
    CHECK_THROWS_AS(load_dataset(dir / "d.tsv", SplitName::kTrain), Error);
  }
  SUBCASE("sentence without its MWE") {
    write_file(dir / "d.tsv", "id\tlanguage\tmwe\tsentence\na\tEN\tnight owl\tNo owls here.\n");
    CHECK_THROWS_AS(load_dataset(dir / "d.tsv", SplitName::kTrain), Error);
    LoadOptions lax;
    lax.require_mwe_in_sentence = false;
    CHECK(load_dataset(dir / "d.tsv", SplitName::kTrain, lax).examples.size() == 1);
  }
}

TEST_CASE("label encoding is configurable") {
  TempDir dir;
  write_file(dir / "d.tsv", "id\tlanguage\tmwe\tsentence\tlabel\na\tEN\tnight owl\tA night owl.\t1\n");
  LoadOptions flipped;
  flipped.encoding = {"0", "1"};
  CHECK(load_dataset(dir / "d.tsv", SplitName::kTrain, flipped).examples[0].label == Label::kLiteral);
}

TEST_CASE("write_dataset then load_dataset is the identity") {
  TempDir dir;
  const auto examples = mixed_examples(7, 5);
  write_dataset(dir / "d.tsv", {SplitName::kDev, examples});
  CHECK(load_dataset(dir / "d.tsv", SplitName::kDev).examples == examples);

  auto unlabeled = examples;
  for (auto& e : unlabeled) e.label.reset();
  write_dataset(dir / "u.tsv", {SplitName::kDev, unlabeled});
  CHECK(load_dataset(dir / "u.tsv", SplitName::kDev).examples == unlabeled);
}

TEST_CASE("sample_labeled draws a balanced, disjoint sample") {
  const auto examples = mixed_examples(40, 60);
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const auto s = sample_labeled(examples, 10, seed);
    CHECK(s.labeled.size() == 10);
    CHECK(std::count_if(s.labeled.begin(), s.labeled.end(),
                        [](const Example& e) { return e.label == Label::kIdiomatic; }) == 5);
    CHECK(s.labeled.size() + s.remainder.size() == examples.size());
    for (const auto& e : s.labeled) {
      CHECK(std::find(s.remainder.begin(), s.remainder.end(), e) == s.remainder.end());
    }
    // both outputs keep the split's order
    auto position = [&](const Example& e) { return std::find(examples.begin(), examples.end(), e) - examples.begin(); };
    CHECK(std::is_sorted(s.labeled.begin(), s.labeled.end(),
                         [&](const Example& a, const Example& b) { return position(a) < position(b); }));
  }
  CHECK(sample_labeled(examples, 10, 5).labeled == sample_labeled(examples, 10, 5).labeled);
  CHECK(sample_labeled(examples, 10, 5).labeled != sample_labeled(examples, 10, 6).labeled);
}

TEST_CASE("sample_labeled edge cases") {
  const auto examples = mixed_examples(1, 8);
  const auto none = sample_labeled(examples, 0, 1);
  CHECK(none.labeled.empty());
  CHECK(none.remainder == examples);
  CHECK_THROWS_AS(sample_labeled(examples, 3, 1), Error);
  try {
    sample_labeled(examples, 4, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCapacity);
  }
}

TEST_CASE("make_unlabeled_pool strips labels and keeps them aside") {
  const auto examples = mixed_examples(10, 10);
  const auto pool = make_unlabeled_pool(examples, 8, 4);
  CHECK(pool.examples.size() == 8);
  for (const auto& e : pool.examples) {
    CHECK_FALSE(e.label.has_value());
    auto it = std::find_if(examples.begin(), examples.end(), [&](const Example& x) { return x.id == e.id; });
    REQUIRE(it != examples.end());
    CHECK(pool.hidden_gold.at(e.id) == *it->label);
  }
  CHECK(make_unlabeled_pool(examples, 100, 4).examples.size() == 20);
}

TEST_CASE("harvest_contexts scans the corpus in order") {
  TempDir dir;
  write_file(dir / "c.txt",
             "the owl flew\n"
             "my brother is a night owl\n"
             "nightowl is one word\n"
             "Night Owl sightings rose.\n"
             "a knight owl\n");
  const auto set = harvest_contexts(dir / "c.txt", "night owl", 150);
  CHECK(set.contexts == std::vector<std::string>{"my brother is a night owl", "Night Owl sightings rose."});
  CHECK(harvest_contexts(dir / "c.txt", "night owl", 1).contexts.size() == 1);

  std::string big;
  for (int i = 0; i < 200; ++i) big += "line " + std::to_string(i) + " has a night owl\n";
  write_file(dir / "big.txt", big);
  CHECK(harvest_contexts(dir / "big.txt", "night owl", 150).contexts.size() == 150);

  try {
    harvest_contexts(dir / "c.txt", "big fish", 5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyContext);
  }
  CHECK_THROWS_AS(harvest_contexts(dir / "missing.txt", "night owl", 5), Error);

  const auto many = harvest_contexts_many(dir / "c.txt", {"night owl", "big fish", "owl"}, 10);
  CHECK(many[0].contexts.size() == 2);
  CHECK(many[1].contexts.empty());
  CHECK(many[2].contexts.size() == 4);
}
