#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nvqa/error.hpp"
#include "nvqa/pipeline.hpp"

using namespace nvqa;
using namespace nvqa::pipeline;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json tiny_config() {
  return json::parse(R"({"seed": 2,
    "world": {"n_scenes": 150, "sentences_per_object": 6, "images_per_class": 4},
    "ae": {"epochs": 1},
    "model": {"epochs": 2, "d_e": 6, "d_h": 8, "d": 8}})");
}

}  // namespace

TEST_CASE("config parsing is strict and needs a seed") {
  const auto c = Config::from_json(tiny_config());
  CHECK(c.seed == 2);
  CHECK(c.world.seed == 2);
  CHECK(c.model.epochs == 2);
  CHECK(c.split.k == 5);
  CHECK(c.run_name() == "a1-A-none-train");

  // Canonical form round trips and hashes stably.
  const auto back = Config::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  auto other = tiny_config();
  other["seed"] = 3;
  CHECK(Config::from_json(other).hash() != c.hash());

  auto bad = [](const char* patch) {
    json j = tiny_config();
    j.merge_patch(json::parse(patch));
    return j;
  };
  CHECK_THROWS_AS(Config::from_json(json{{"world", json::object()}}), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"extra": 1})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"model": {"optimizer": "sgd"}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"model": {"arch": 3}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"model": {"feat": "C"}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"model": {"epochs": -1}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"model": {"epochs": 2.5}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"vocab": {"setting": "all"}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"world": {"seed": 4}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"eval": {"protocols": []}})")), ConfigError);
  CHECK_THROWS_AS(Config::from_json(bad(R"({"vocab": {"setting": "gen-expanded"}})")), ConfigError);
  CHECK_NOTHROW(Config::from_json(bad(R"({"vocab": {"setting": "gen-expanded"}, "model": {"aux": "text"}})")));
  CHECK_THROWS_AS(Config::from_json(bad(R"({"split": {"known_holdout": 1.0}})")), ConfigError);
}

TEST_CASE("feature families per fusion choice") {
  CHECK(families(Feat::kA) == std::vector<std::string>{"A"});
  CHECK(families(Feat::kEF) == std::vector<std::string>{"EF"});
  CHECK(families(Feat::kLF) == std::vector<std::string>{"A", "B"});
  CHECK(aux_from_string("text+im") == Aux::kTextIm);
  CHECK_THROWS_AS(aux_from_string("images"), ConfigError);
}

TEST_CASE("stages chain, rerun byte-identically and evaluate every category") {
  namespace fs = std::filesystem;
  const fs::path out = fs::temp_directory_path() / "nvqa_pipeline_test";
  fs::remove_all(out);
  json j = tiny_config();
  j["vocab"] = {{"setting", "oracle"}};
  j["model"]["aux"] = "text";
  Pipeline p(Config::from_json(j), out);

  CHECK_THROWS_AS(p.split(), LoadError);  // nothing generated yet
  p.genworld();
  p.split();
  const std::string split_once = slurp(p.split_dir() / "split.json");
  const std::string manifest_once = slurp(p.split_dir() / "manifest.json");
  p.split();
  CHECK(slurp(p.split_dir() / "split.json") == split_once);
  CHECK(slurp(p.split_dir() / "manifest.json") == manifest_once);

  p.expand_vocab();
  p.gen_pairs();
  p.pretrain_ae();
  p.train();
  p.eval();
  p.report();

  const auto res = load_eval_result(p.eval_dir() / "test.json");
  for (auto proto : {vqa::Protocol::kOpenEnded, vqa::Protocol::kMultipleChoice})
    for (auto c : evalkit::kCategories) CHECK(res.protocols.at(proto).scores.count(c) == 1);
  CHECK(res.protocols.at(vqa::Protocol::kOpenEnded).scores.at(evalkit::Category::kNovel).count > 0);

  const auto manifest = json::parse(slurp(p.eval_dir() / "manifest.json"));
  CHECK(manifest["config_hash"] == p.config().hash());
  CHECK(manifest["seed"] == 2);
  CHECK(manifest["version"] == kToolVersion);
  CHECK(manifest["files"].contains("test.json"));
  const auto test_json = json::parse(slurp(p.eval_dir() / "test.json"));
  CHECK(test_json["provenance"]["config_hash"] == p.config().hash());

  const std::string table = slurp(p.report_dir() / "results.md");
  CHECK(table.find("a1-A-text-oracle") != std::string::npos);
  CHECK(table.find("Novel") != std::string::npos);
  fs::remove_all(out);
}
