#include <algorithm>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "nvqa/error.hpp"
#include "nvqa/pairs.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/text.hpp"

using namespace nvqa;
using namespace nvqa::pairs;

namespace {

Matrix random_rows(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

SentenceIndex numbered_sentences(const std::string& word, std::size_t n) {
  SentenceIndex idx;
  auto& v = idx[word];
  for (std::size_t i = 0; i < n; ++i) v.push_back({i, "a " + word + " sentence number " + std::to_string(i)});
  return idx;
}

}  // namespace

TEST_CASE("pair count is the product of the capped sample sizes") {
  Rng rng(1);
  ImageIndex images{{"cat", random_rows(10, 4, rng)}};
  const auto sentences = numbered_sentences("cat", 10);
  const auto res = generate_pairs({"cat"}, images, sentences, {.m = 2, .n = 3, .seed = 5});
  CHECK(res.pairs.size() == 6);
  CHECK(res.skipped.empty());
  for (const auto& p : res.pairs) {
    CHECK(p.word == "cat");
    CHECK(p.sentence.find("cat") != std::string::npos);
    CHECK(p.feature.size() == 4);
    const auto row = images.at("cat").row(p.image_row);
    CHECK(std::equal(row.begin(), row.end(), p.feature.begin()));
  }

  const auto skipped = generate_pairs({"cat", "wolf"}, images, sentences, {.m = 2, .n = 3});
  CHECK(skipped.pairs.size() == 6);
  REQUIRE(skipped.skipped.size() == 1);
  CHECK(skipped.skipped[0] == "wolf");
  CHECK_THROWS_AS(generate_pairs({"cat"}, images, sentences, {.m = 0, .n = 3}), ContractError);
}

TEST_CASE("five well-stocked objects at m = n = 20 give 2000 pairs") {
  Rng rng(2);
  ImageIndex images;
  SentenceIndex sentences;
  std::set<std::string> objects;
  for (const char* w : {"cat", "dog", "wolf", "fox", "bear"}) {
    images[w] = random_rows(35, 3, rng);
    sentences[w] = numbered_sentences(w, 28)[w];
    objects.insert(w);
  }
  CHECK(generate_pairs(objects, images, sentences, {.m = 20, .n = 20, .seed = 3}).pairs.size() == 2000);
}

TEST_CASE("pair counts follow min(m, images) * min(n, sentences) for random stock") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ImageIndex images;
    SentenceIndex sentences;
    std::set<std::string> objects;
    std::size_t expected = 0;
    const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(6);
    for (int k = 0; k < 6; ++k) {
      const std::string w = "obj" + std::to_string(k);
      objects.insert(w);
      const std::size_t ni = rng.below(8), ns = rng.below(8);
      if (ni) images[w] = random_rows(ni, 2, rng);
      if (ns) sentences[w] = numbered_sentences(w, ns)[w];
      expected += std::min(m, ni) * std::min(n, ns);
    }
    const auto res = generate_pairs(objects, images, sentences, {.m = m, .n = n, .seed = 9});
    CHECK(res.pairs.size() == expected);
  }
}

TEST_CASE("pair sampling is deterministic, order-free and parallel-safe") {
  Rng rng(4);
  ImageIndex images;
  SentenceIndex sentences;
  for (const char* w : {"cat", "dog", "owl"}) {
    images[w] = random_rows(30, 2, rng);
    sentences[w] = numbered_sentences(w, 30)[w];
  }
  auto key = [](const PairResult& r) {
    std::ostringstream os;
    write_pairs(os, r.pairs);
    return os.str();
  };
  const auto a = generate_pairs({"cat", "dog", "owl"}, images, sentences, {.m = 4, .n = 4, .seed = 1});
  const auto b = generate_pairs({"cat", "dog", "owl"}, images, sentences, {.m = 4, .n = 4, .seed = 1, .parallel = false});
  CHECK(key(a) == key(b));
  const auto c = generate_pairs({"dog"}, images, sentences, {.m = 4, .n = 4, .seed = 1});
  std::vector<WeakPair> dogs;
  for (const auto& p : a.pairs)
    if (p.word == "dog") dogs.push_back(p);
  CHECK(key(c) == key({dogs, {}}));
  const auto d = generate_pairs({"cat", "dog", "owl"}, images, sentences, {.m = 4, .n = 4, .seed = 2});
  CHECK(key(a) != key(d));
}

TEST_CASE("sentence mining matches whole tokens, keeps order, drops duplicates") {
  const std::vector<std::string> corpus = {"The wolf howled.", "A dog barked.", "wolves are not matched",
                                           "The wolf howled.", "dog and wolf", "werewolf"};
  const auto idx = sentence_mine(corpus, {"wolf", "dog", "yak"});
  REQUIRE(idx.at("wolf").size() == 2);
  CHECK(idx.at("wolf")[0].line == 0);
  CHECK(idx.at("wolf")[1].text == "dog and wolf");
  CHECK(idx.at("dog").size() == 2);
  CHECK(idx.at("yak").empty());

  // Brute-force recount on a random corpus: distinct lines with the token.
  Rng rng(5);
  const std::vector<std::string> words = {"cat", "sat", "on", "the", "mat", "dog"};
  std::vector<std::string> lines;
  for (int i = 0; i < 300; ++i) {
    std::string l;
    for (int k = 0; k < 4; ++k) l += words[rng.below(words.size())] + " ";
    lines.push_back(l);
  }
  const auto mined = sentence_mine(lines, {"cat", "dog"});
  for (const std::string w : {"cat", "dog"}) {
    std::set<std::string> distinct;
    for (const auto& l : lines) {
      const auto toks = text::tokenize(l);
      if (std::find(toks.begin(), toks.end(), w) != toks.end()) distinct.insert(l);
    }
    CHECK(mined.at(w).size() == distinct.size());
  }
}

TEST_CASE("pairs and image index round trip") {
  Rng rng(6);
  ImageIndex images{{"cat", random_rows(5, 3, rng)}, {"dog", random_rows(4, 3, rng)}};
  const auto dir = std::filesystem::temp_directory_path() / "nvqa_pairs_index";
  std::filesystem::remove_all(dir);
  save_image_index(dir, images);
  const auto back = load_image_index(dir);
  REQUIRE(back.size() == 2);
  const auto& bd = back.at("dog").values();
  const auto& id = images.at("dog").values();
  CHECK(std::equal(bd.begin(), bd.end(), id.begin(), id.end()));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_image_index(dir), LoadError);

  SentenceIndex s = numbered_sentences("cat", 3);
  s["dog"] = numbered_sentences("dog", 2)["dog"];
  const auto res = generate_pairs({"cat", "dog"}, images, s, {.m = 2, .n = 2});
  std::stringstream ss;
  write_pairs(ss, res.pairs);
  const auto read = read_pairs(ss, images);
  REQUIRE(read.size() == res.pairs.size());
  for (std::size_t i = 0; i < read.size(); ++i) {
    CHECK(read[i].feature == res.pairs[i].feature);
    CHECK(read[i].sentence == res.pairs[i].sentence);
  }
  std::istringstream bad("{\"word\":\"cat\",\"image_row_ref\":{\"word\":\"cat\",\"row\":99},\"sentence\":\"x\",\"sentence_line\":0}\n");
  CHECK_THROWS_AS(read_pairs(bad, images), DataError);
}
