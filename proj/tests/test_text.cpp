#include <sstream>

#include "doctest.h"
#include "nvqa/error.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/text.hpp"

using namespace nvqa;
using namespace nvqa::text;

TEST_CASE("tokenize") {
  using V = std::vector<std::string>;
  CHECK(tokenize("Is the little dog wearing a necktie?") ==
        V{"is", "the", "little", "dog", "wearing", "a", "necktie"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("2 cats!!") == V{"2", "cats"});
  CHECK(tokenize("  multiple\tspaces\nand-dashes ") == V{"multiple", "spaces", "and", "dashes"});
}

TEST_CASE("build_vocab ordering and thresholding") {
  Counts c{{"a", 3}, {"b", 1}};
  auto v = Vocabulary::build(c, 2);
  CHECK(v.tokens() == std::vector<std::string>{"<unk>", "<bos>", "<eos>", "a"});
  auto all = Vocabulary::build(c, 1);
  CHECK(all.size() == 5);
  CHECK(all.token(4) == "b");

  Counts ties{{"zeta", 2}, {"alpha", 2}, {"mid", 5}};
  auto t = Vocabulary::build(ties, 1);
  CHECK(t.tokens() == std::vector<std::string>{"<unk>", "<bos>", "<eos>", "mid", "alpha", "zeta"});
  CHECK_THROWS_AS(Vocabulary::build(c, 0), ContractError);
}

TEST_CASE("build_vocab is insensitive to corpus order") {
  std::vector<std::string> sents = {"the dog runs", "a cat sleeps", "the dog and the cat",
                                    "red car", "the red dog"};
  Counts base;
  count_tokens(sents, base);
  auto ref = Vocabulary::build(base, 1);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(sents);
    Counts c;
    count_tokens(sents, c);
    CHECK(Vocabulary::build(c, 1) == ref);
  }
}

TEST_CASE("encode/decode round trip and UNK") {
  Counts c{{"dog", 2}, {"cat", 1}};
  auto v = Vocabulary::build(c, 1);
  auto seq = v.encode({"dog", "wolf", "cat"});
  CHECK(seq.ids == std::vector<std::size_t>{3, kUnkId, 4});
  CHECK(v.decode(seq.ids) == std::vector<std::string>{"dog", "<unk>", "cat"});
  CHECK(v.decode(v.encode({"cat", "dog"}).ids) == std::vector<std::string>{"cat", "dog"});
  CHECK_THROWS_AS(v.decode({99}), DataError);
}

TEST_CASE("vocabulary expansion, hashing and files") {
  Counts c{{"dog", 2}};
  auto v = Vocabulary::build(c, 1);
  auto o = v.expanded({"wolf", "dog"}, Provenance::kOracle);
  CHECK(o.size() == v.size() + 1);
  CHECK(o.id("wolf") == 4);
  CHECK(o.provenance() == Provenance::kOracle);
  CHECK(o.hash() != v.hash());
  CHECK(v.retagged(Provenance::kOracle).hash() == v.hash());

  std::stringstream ss;
  o.save(ss);
  CHECK(ss.str().rfind("<unk>\t0\n<bos>\t0\n<eos>\t0\ndog\t2\n", 0) == 0);
  auto back = Vocabulary::load(ss, Provenance::kOracle);
  CHECK(back == o);
  std::stringstream bad("dog\t1\n");
  CHECK_THROWS_AS(Vocabulary::load(bad, Provenance::kTrain), LoadError);
  CHECK(provenance_from_string(to_string(Provenance::kGeneralExpanded)) ==
        Provenance::kGeneralExpanded);
}

TEST_CASE("lexicon noun extraction") {
  auto tagger = LexiconTagger::bundled();
  using S = std::set<std::string>;
  CHECK(extract_nouns("is the little dog wearing a necktie", tagger) == S{"dog", "necktie"});
  CHECK(extract_nouns("what color is it", tagger) == S{"color"});
  CHECK(extract_nouns("", tagger).empty());
  // unknown open-class words default to nouns; digits and stopwords do not
  CHECK(extract_nouns("how many zorblax are there 3", tagger) == S{"zorblax"});
  CHECK(extract_nouns("is the dog red", tagger) == extract_nouns("is the dog red", tagger));

  CHECK(extract_nouns("two dogs", tagger) == S{"dogs"});
  auto folding = LexiconTagger::bundled({.fold_plurals = true});
  CHECK(extract_nouns("two horses", folding) == S{"horse"});

  CHECK_THROWS_AS(LexiconTagger::from_file("/nonexistent/lexicon.tsv"), ConfigError);
}
