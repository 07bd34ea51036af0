#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "nvqa/error.hpp"
#include "nvqa/kmeans.hpp"
#include "nvqa/splitgen.hpp"

using namespace nvqa;
using namespace nvqa::splitgen;

namespace {

class SetTagger : public text::NounTagger {
 public:
  explicit SetTagger(std::set<std::string> nouns) : nouns_(std::move(nouns)) {}
  std::string name() const override { return "set"; }
  std::set<std::string> nouns(const std::vector<std::string>& tokens) const override {
    std::set<std::string> out;
    for (const auto& t : tokens)
      if (nouns_.count(t)) out.insert(t);
    return out;
  }

 private:
  std::set<std::string> nouns_;
};

VqaExample make_ex(std::string qid, std::size_t image, std::string q, std::string type,
                   std::string answer = "yes") {
  VqaExample ex;
  ex.qid = std::move(qid);
  ex.image_id = image;
  ex.question = std::move(q);
  ex.question_type = std::move(type);
  ex.answer_type = "yes/no";
  ex.answers.assign(kAnswersPerQuestion, std::move(answer));
  return ex;
}

// Two noun families with disjoint question-type usage.
Dataset two_family_data(std::size_t per_noun) {
  const std::vector<std::string> animals{"cat", "dog", "cow", "pig", "hen"};
  const std::vector<std::string> cars{"car", "bus", "van", "cab", "jet"};
  Dataset d;
  std::size_t id = 0;
  for (std::size_t r = 0; r < per_noun; ++r) {
    for (const auto& a : animals)
      d.push_back(make_ex("q" + std::to_string(id++), id % 7, "is the " + a + " furry", "is furry"));
    for (const auto& c : cars)
      d.push_back(make_ex("q" + std::to_string(id++), id % 7, "how fast is the " + c, "how fast", "fast"));
  }
  return d;
}

SetTagger family_tagger() {
  return SetTagger({"cat", "dog", "cow", "pig", "hen", "car", "bus", "van", "cab", "jet"});
}

}  // namespace

TEST_CASE("noun profiles are normalized histograms over question types") {
  Dataset d{make_ex("a", 0, "is the cat furry", "t1"), make_ex("b", 0, "is the cat big", "t2"),
            make_ex("c", 1, "is the cat furry", "t1"), make_ex("d", 1, "where is the dog", "t2")};
  const auto p = profile_nouns(d, SetTagger({"cat", "dog"}));
  REQUIRE(p.types == std::vector<std::string>{"t1", "t2"});
  REQUIRE(p.nouns.size() == 2);
  CHECK(p.nouns[0].noun == "cat");
  CHECK(p.nouns[0].normalized[0] == doctest::Approx(2.0 / 3));
  CHECK(p.nouns[0].normalized[1] == doctest::Approx(1.0 / 3));
  CHECK(p.nouns[1].normalized == std::vector<double>{0.0, 1.0});
}

TEST_CASE("novel count per cluster") {
  CHECK(novel_count(10, 0.2) == 2);
  CHECK(novel_count(7, 0.2) == 1);  // 1.4 + .5 -> 1
  CHECK(novel_count(8, 0.2) == 2);  // 1.6 + .5 -> 2
  CHECK(novel_count(1, 0.2) == 0);
  CHECK(novel_count(3, 0.9) == 2);  // never the whole cluster
  CHECK(novel_count(1, 0.6) == 1);  // singleton may go novel
}

TEST_CASE("clustering separates the two question-type families") {
  const auto d = two_family_data(3);
  const auto c = cluster_nouns(profile_nouns(d, family_tagger()), 2, 11);
  CHECK(c.cluster_of.at("cat") == c.cluster_of.at("dog"));
  CHECK(c.cluster_of.at("car") == c.cluster_of.at("jet"));
  CHECK(c.cluster_of.at("cat") != c.cluster_of.at("car"));
  CHECK(c.kmeans.inertia == doctest::Approx(0.0));
  CHECK_THROWS_AS(cluster_nouns(profile_nouns(d, family_tagger()), 11, 1), ContractError);
}

TEST_CASE("split respects the per-cluster novel fraction and never leaks") {
  const auto d = two_family_data(4);
  const auto tagger = family_tagger();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Clustering clusters;
    const auto spec = make_split(d, tagger, {.k = 2, .novel_fraction = 0.2, .seed = seed}, &clusters);
    std::map<std::size_t, std::pair<int, int>> per;  // cluster -> (novel, total)
    for (const auto& [noun, cl] : clusters.cluster_of) {
      ++per[cl].second;
      per[cl].first += spec.novel_nouns.count(noun) ? 1 : 0;
    }
    for (const auto& [cl, nt] : per) CHECK(std::abs(nt.first - 0.2 * nt.second) <= 1.0);
    CHECK(spec.novel_nouns.size() + spec.known_nouns.size() == 10);

    // brute-force recount straight from the raw text
    for (const auto& ex : d) {
      bool novel = false;
      for (const auto& n : spec.novel_nouns) {
        const std::string padded = " " + ex.question + " ";
        if (padded.find(" " + n + " ") != std::string::npos) novel = true;
        for (const auto& a : ex.answers)
          if (a == n) novel = true;
      }
      CHECK((spec.assignment.at(ex.qid) == Part::kTest) == novel);
    }
    CHECK(audit_split(spec, d).ok());
  }
}

TEST_CASE("an answer mentioning a novel noun sends the question to test") {
  Dataset d{make_ex("a", 0, "what animal is it", "what", "cat"),
            make_ex("b", 0, "what animal is it", "what", "dog")};
  const auto spec = assign_questions(d, {{"dog"}, {"cat"}}, 0, 1);
  CHECK(spec.assignment.at("a") == Part::kTest);
  CHECK(spec.assignment.at("b") == Part::kTrain);
}

TEST_CASE("validation size and determinism") {
  const auto d = two_family_data(10);
  const auto tagger = family_tagger();
  const auto a = make_split(d, tagger, {.k = 2, .novel_fraction = 0.2, .val_size = 7, .seed = 5});
  const auto b = make_split(d, tagger, {.k = 2, .novel_fraction = 0.2, .val_size = 7, .seed = 5});
  CHECK(a.to_json() == b.to_json());
  CHECK(std::count_if(a.assignment.begin(), a.assignment.end(),
                      [](const auto& kv) { return kv.second == Part::kVal; }) == 7);
  const auto c = make_split(d, tagger, {.k = 2, .novel_fraction = 0.2, .val_size = 7, .seed = 6});
  CHECK(a.to_json() != c.to_json());
}

TEST_CASE("degenerate split warns") {
  Dataset d{make_ex("a", 0, "is the cat furry", "t"), make_ex("b", 1, "is the dog furry", "t")};
  const auto spec = assign_questions(d, {{"cat", "dog"}, {}}, 0, 1);
  REQUIRE(spec.warnings.size() == 1);
  CHECK(spec.warnings[0].find("empty") != std::string::npos);
  CHECK_THROWS_AS(assign_questions(d, {{"cat", "dog"}, {}}, 2, 1), ContractError);
}

TEST_CASE("audit flags a leaking assignment") {
  Dataset d{make_ex("a", 0, "is the cat furry", "t"), make_ex("b", 1, "is the dog furry", "t")};
  auto spec = assign_questions(d, {{"dog"}, {"cat"}}, 0, 1);
  CHECK(audit_split(spec, d).ok());
  spec.assignment["a"] = Part::kTrain;
  spec.assignment["b"] = Part::kTest;
  const auto audit = audit_split(spec, d);
  CHECK(audit.leaking_qids == std::vector<std::string>{"a"});
  CHECK(audit.test_without_novel == std::vector<std::string>{"b"});
  spec.assignment.erase("a");
  CHECK(audit_split(spec, d).unassigned == std::vector<std::string>{"a"});
}

TEST_CASE("split spec round trips through json and file") {
  const auto d = two_family_data(2);
  const auto spec = make_split(d, family_tagger(), {.k = 2, .novel_fraction = 0.2, .seed = 3});
  const auto path = std::filesystem::temp_directory_path() / "nvqa_split_test.json";
  spec.save(path);
  const auto back = SplitSpec::load(path);
  CHECK(back.to_json() == spec.to_json());
  std::filesystem::remove(path);
  auto j = spec.to_json();
  j["assignment"]["q0"] = "holdout";
  CHECK_THROWS_AS(SplitSpec::from_json(j), DataError);
}

TEST_CASE("split report counts") {
  Dataset d{make_ex("a", 0, "is the cat on the dog", "t"), make_ex("b", 0, "is the cow furry", "t"),
            make_ex("c", 1, "is the cow furry", "t"), make_ex("d", 2, "is the cat furry", "t")};
  const auto spec = assign_questions(d, {{"cat", "dog"}, {"cow"}}, 0, 1);
  const auto r = split_report(spec, d, SetTagger({"cat", "dog", "cow"}));
  CHECK(r["questions"]["train"] == 2);
  CHECK(r["questions"]["test"] == 2);
  CHECK(r["objects"]["train"] == 2);
  CHECK(r["objects"]["test"] == 1);
  CHECK(r["objects"]["both"] == 0);
  CHECK(r["known_objects_per_test_question"]["0"] == 2);
  CHECK(r["image_sharing"]["common"]["images"] == 1);
  CHECK(r["image_sharing"]["common"]["train_questions"] == 1);
  CHECK(r["image_sharing"]["common"]["test_questions"] == 1);
  CHECK(r["image_sharing"]["test_only"]["images"] == 1);
  CHECK(r["image_sharing"]["train_only"]["questions"] == 1);
}

TEST_CASE("kmeans inertia never increases across Lloyd iterations") {
  Rng rng(7);
  Matrix pts(60, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = rng.normal();
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng r(s);
    const auto res = kmeans(pts, {.k = 5, .restarts = 1}, r);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1] + 1e-12);
  }
}

TEST_CASE("kmeans with one cluster per distinct point has zero inertia") {
  Matrix pts(4, 2, std::vector<double>{0, 0, 1, 0, 0, 1, 1, 1});
  Rng rng(3);
  const auto res = kmeans(pts, {.k = 4, .restarts = 5}, rng);
  CHECK(res.inertia == doctest::Approx(0.0));
  std::set<std::size_t> labels(res.labels.begin(), res.labels.end());
  CHECK(labels.size() == 4);
  CHECK_THROWS_AS(kmeans(pts, {.k = 5}, rng), ContractError);
  CHECK_THROWS_AS(kmeans(pts, {.k = 0}, rng), ContractError);
}

TEST_CASE("kmeans assignment serial and parallel agree exactly") {
  Rng rng(9);
  Matrix pts(500, 8), centers(6, 8);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = rng.normal();
  for (std::size_t i = 0; i < centers.size(); ++i) centers[i] = rng.normal();
  std::vector<std::size_t> la, lb;
  const double a = assign_serial(pts, centers, la);
  const double b = assign_omp(pts, centers, lb);
  CHECK(la == lb);
  CHECK(a == b);
}

TEST_CASE("dataset json-lines round trip and mode answer") {
  Dataset d{make_ex("a", 3, "is the cat furry", "t", "no")};
  d[0].choices = {"yes", "no"};
  const auto path = std::filesystem::temp_directory_path() / "nvqa_ds_test.jsonl";
  save_dataset(path, d);
  const auto back = load_dataset(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].qid == "a");
  CHECK(back[0].image_id == 3);
  CHECK(back[0].answers == d[0].answers);
  CHECK(back[0].choices == d[0].choices);
  std::filesystem::remove(path);
  CHECK(mode_answer({"b", "a", "b", "a", "c"}) == "a");
  CHECK(mode_answer({"two", "2", "2"}) == "2");
  Matrix feats(4, 2, 1.5);
  attach_features(d, feats);
  CHECK(d[0].image_feature == std::vector<double>{1.5, 1.5});
  CHECK(concat_features(Matrix(2, 1, 1.0), Matrix(2, 2, 2.0)).cols() == 3);
}
