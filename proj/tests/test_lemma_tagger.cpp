#include <stdexcept>

#include <doctest.h>

#include "ckgen/lemma.hpp"
#include "ckgen/tagger.hpp"
#include "ckgen/tokenizer.hpp"

using namespace ckgen;

TEST_CASE("lemma suffix stripping") {
  // plain plural / 3sg s
  CHECK(lemma("combs") == "comb");
  CHECK(lemma("dogs") == "dog");
  CHECK(lemma("runs") == "run");
  CHECK(lemma("makes") == "make");
  // es after sibilants
  CHECK(lemma("catches") == "catch");
  CHECK(lemma("boxes") == "box");
  CHECK(lemma("dishes") == "dish");
  CHECK(lemma("glasses") == "glass");
  // ies -> y
  CHECK(lemma("carries") == "carry");
  CHECK(lemma("flies") == "fly");
  // ing with doubling / e-restoration
  CHECK(lemma("running") == "run");
  CHECK(lemma("sitting") == "sit");
  CHECK(lemma("combing") == "comb");
  CHECK(lemma("taking") == "take");
  CHECK(lemma("riding") == "ride");
  CHECK(lemma("walking") == "walk");
  CHECK(lemma("playing") == "play");
  CHECK(lemma("eating") == "eat");
  CHECK(lemma("falling") == "fall");
  CHECK(lemma("throwing") == "throw");
  // ed forms
  CHECK(lemma("combed") == "comb");
  CHECK(lemma("stopped") == "stop");
  CHECK(lemma("baked") == "bake");
  CHECK(lemma("carried") == "carry");
  CHECK(lemma("called") == "call");
  CHECK(lemma("missed") == "miss");
  // words that must not be mangled
  CHECK(lemma("sing") == "sing");
  CHECK(lemma("bring") == "bring");
  CHECK(lemma("thing") == "thing");
  CHECK(lemma("his") == "his");
  CHECK(lemma("is") == "is");
  CHECK(lemma("grass") == "grass");
  CHECK(lemma("bed") == "bed");
  CHECK(lemma("red") == "red");
  CHECK(lemma("comb") == "comb");
}

TEST_CASE("lexicon tagger: surface first, then lemma, then suffix rules") {
  LexiconTagger tagger;
  tagger.add("comb", Pos::V);
  tagger.add("dog", Pos::N);
  tagger.add("combs", Pos::V);

  CHECK(tagger.tag_word("comb") == Pos::V);
  CHECK(tagger.tag_word("combs") == Pos::V);   // surface hit
  CHECK(tagger.tag_word("combing") == Pos::V); // lemma hit
  CHECK(tagger.tag_word("dogs") == Pos::N);    // lemma hit
  // unknown words fall back to suffix rules
  CHECK(tagger.tag_word("quickly") == Pos::R);
  CHECK(tagger.tag_word("joyful") == Pos::A);
  CHECK(tagger.tag_word("gleaming") == Pos::V);
  CHECK(tagger.tag_word("zebra") == Pos::N);

  const auto tags = tagger.tag(tokenize("the dog combs"));
  REQUIRE(tags.size() == 3);
  CHECK(tags[1] == Pos::N);
  CHECK(tags[2] == Pos::V);
}

TEST_CASE("lexicon file loading validates format") {
  const LexiconTagger tagger =
      LexiconTagger::from_file(std::string(CKGEN_DATA_DIR) + "/pos_lexicon.tsv");
  CHECK(tagger.size() > 50);
  CHECK(tagger.tag_word("frisbee") == Pos::N);
  CHECK(tagger.tag_word("throws") == Pos::V);
  CHECK(tagger.tag_word("slowly") == Pos::R);
  CHECK_THROWS_AS(LexiconTagger::from_file("/no/such/lexicon.tsv"), std::runtime_error);
}

TEST_CASE("tokenize lowercases and splits on whitespace runs") {
  const auto tokens = tokenize("  The Dog\tRUNS  fast\n");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0] == "the");
  CHECK(tokens[1] == "dog");
  CHECK(tokens[2] == "runs");
  CHECK(tokens[3] == "fast");
  CHECK(tokenize("").empty());
}
