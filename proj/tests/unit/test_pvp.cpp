#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"
#include "idiomkit/error.hpp"
#include "idiomkit/pvp.hpp"

using namespace idiomkit;

namespace {

const PatternVerbalizerPair& pvp_by_id(const std::vector<PatternVerbalizerPair>& pvps, const std::string& id) {
  for (const auto& p : pvps) {
    if (p.id() == id) return p;
  }
  throw std::runtime_error("no pvp " + id);
}

const Example kOwl{"e1", "EN", "night owl", "He is a night owl.", Label::kIdiomatic};

}  // namespace

TEST_CASE("built-in pattern sets per prompt language") {
  const auto en = builtin_pvps("EN");
  REQUIRE(en.size() == 5);
  CHECK(en[0].pattern.template_text() == "X: BLANK");
  CHECK(en[0].verbalizer.literal_token == "literal");
  CHECK(en[0].verbalizer.idiom_token == "phrase");

  const auto pt = builtin_pvps("PT");
  REQUIRE(pt.size() == 1);
  CHECK(pt[0].pattern.template_text() == "X. BLANK, IDIOM é literal.");
  CHECK(pt[0].verbalizer.literal_token == "sim");
  CHECK(pt[0].verbalizer.idiom_token == "não");

  const auto gl = builtin_pvps("GL");
  REQUIRE(gl.size() == 1);
  CHECK(gl[0].verbalizer.literal_token == "si");
  CHECK(gl[0].verbalizer.idiom_token == "non");

  CHECK_THROWS_AS(builtin_pvps("DE"), Error);
}

TEST_CASE("idiom_component picks the k-th word") {
  CHECK(idiom_component("night owl", 2) == "owl");
  CHECK(idiom_component("night owl", 1) == "night");
  CHECK_THROWS_AS(idiom_component("night owl", 3), Error);
  CHECK_THROWS_AS(idiom_component("night owl", 0), Error);
}

TEST_CASE("render fills the cloze templates") {
  const auto en = builtin_pvps("EN");
  CHECK(render(pvp_by_id(en, "P3"), kOwl, "[MASK]").text == "He is a night owl. night owl is [MASK] literal.");
  CHECK(render(pvp_by_id(en, "P4"), kOwl, "[MASK]").text == "He is a night owl. [MASK], night owl is literal.");
  CHECK(render(pvp_by_id(en, "P5"), kOwl, "[MASK]").text == "He is a night owl. night owl is [MASK] owl");
  CHECK(render(pvp_by_id(en, "P2"), kOwl, "<m>").text == "(<m>) He is a night owl.");
  CHECK_FALSE(render(pvp_by_id(en, "P1"), kOwl, "[MASK]").mask_index.has_value());
}

TEST_CASE("render errors") {
  const auto en = builtin_pvps("EN");
  Example no_mwe = kOwl;
  no_mwe.mwe.clear();
  CHECK_THROWS_AS(render(pvp_by_id(en, "P3"), no_mwe, "[MASK]"), Error);

  Example one_word = kOwl;
  one_word.mwe = "owl";
  try {
    render(pvp_by_id(en, "P5"), one_word, "[MASK]");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRender);
  }
}

TEST_CASE("pattern invariants are enforced at construction") {
  CHECK_THROWS_AS(Pattern("Q", "X is idiomatic", "EN"), Error);
  CHECK_THROWS_AS(Pattern("Q", "X BLANK BLANK", "EN"), Error);
  CHECK_THROWS_AS(Pattern("Q", "X X BLANK", "EN"), Error);
  CHECK_NOTHROW(Pattern("Q", "IDIOM_1 then BLANK", "EN"));
  CHECK_THROWS_AS(PatternVerbalizerPair(Pattern("Q", "X BLANK", "EN"), {"same", "same"}), Error);
  CHECK_THROWS_AS(PatternVerbalizerPair(Pattern("Q", "X BLANK", "EN"), {"", "b"}), Error);
}

TEST_CASE("render preserves the sentence and MWE and is injective in the sentence") {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcdefgh ,";
  std::uniform_int_distribution<std::size_t> len(1, 20), ch(0, alphabet.size() - 1);
  for (const auto& pvp : builtin_pvps("EN")) {
    std::set<std::string> seen_sentences, seen_outputs;
    for (int trial = 0; trial < 200; ++trial) {
      std::string prefix;
      for (std::size_t i = len(rng); i > 0; --i) prefix += alphabet[ch(rng)];
      const std::string sentence = "x" + prefix + " night owl";
      const Example e{"id", "EN", "night owl", sentence, std::nullopt};
      const auto out = render(pvp, e, "[MASK]").text;
      CHECK(out.find(sentence) != std::string::npos);
      CHECK(out.find("[MASK]") == out.rfind("[MASK]"));
      if (seen_sentences.insert(sentence).second) CHECK(seen_outputs.insert(out).second);
    }
  }
}

TEST_CASE("select_pvps keeps the requested order and rejects unknown ids") {
  const auto en = builtin_pvps("EN");
  const auto chosen = select_pvps(en, {"P2", "P1"});
  REQUIRE(chosen.size() == 2);
  CHECK(chosen[0].id() == "P2");
  CHECK(chosen[1].id() == "P1");
  CHECK_THROWS_AS(select_pvps(en, {"P9"}), Error);
}

TEST_CASE("load_patterns reads user-defined pairs") {
  testing::TempDir dir;
  testing::write_file(dir / "p.tsv",
                      "id\ttemplate\tprompt_language\tliteral_token\tidiom_token\n"
                      "D1\tX. BLANK, IDIOM ist wörtlich.\tDE\tja\tnein\n");
  const auto pvps = load_patterns(dir / "p.tsv");
  REQUIRE(pvps.size() == 1);
  CHECK(render(pvps[0], kOwl, "[MASK]").text == "He is a night owl. [MASK], night owl ist wörtlich.");
  CHECK(pvps[0].verbalizer.token_for(Label::kIdiomatic) == "nein");
}
