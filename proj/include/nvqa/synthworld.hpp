#ifndef NVQA_SYNTHWORLD_HPP_
#define NVQA_SYNTHWORLD_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvqa/dataset.hpp"
#include "nvqa/embed.hpp"
#include "nvqa/matrix.hpp"
#include "nvqa/pairs.hpp"

// A small generated world of scenes, questions, text and features.
//
// Each scene holds objects from distinct categories, each with a color and a
// count. Family A features are [presence one-hot per object | per category:
// color one-hot, count / 3] plus Gaussian noise; family B is a fixed random
// linear map of family A plus its own noise. Because a category block is
// shared by every object of that category, knowing only which category an
// unseen word belongs to is enough to answer its color and count questions.
namespace nvqa::synthworld {

struct Category {
  std::string name;      // e.g. "animal"
  std::string property;  // adjective true of every member
  std::vector<std::string> verbs;
  std::vector<std::string> objects;        // appear in scenes
  std::vector<std::string> external_only;  // only in the external embedding table
};

const std::vector<Category>& categories();
const std::vector<std::string>& colors();
// Scene objects in category order; index = position in the presence block.
const std::vector<std::string>& object_words();
std::size_t category_of(std::size_t object);

struct WorldSpec {
  std::uint64_t seed = 0;
  std::size_t n_scenes = 1500;
  std::size_t questions_per_scene = 5;
  std::size_t min_objects = 2;
  std::size_t max_objects = 3;
  double answer_noise = 0.0;   // rho: chance each human answer is replaced
  std::size_t mcq_choices = 18;
  double feature_noise = 0.05;
  std::size_t family_b_dim = 64;
  double family_b_noise = 0.05;
  std::size_t embed_dim = 16;
  double embed_noise = 0.08;
  std::size_t sentences_per_object = 100;
  std::size_t images_per_class = 30;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys raise ConfigError.
  static WorldSpec from_json(const nlohmann::json& j);
};

struct SceneObject {
  std::size_t object = 0;
  std::size_t color = 0;
  std::size_t count = 1;  // 1..3
};

struct Scene {
  std::vector<SceneObject> objects;  // sorted by object index, distinct categories
  const SceneObject* find(std::size_t object) const;
};

enum class Template { kExists, kColorIs, kProperty, kCount, kCountAll, kWhatColor };

struct Question {
  Template kind = Template::kExists;
  std::size_t object = 0;  // unused by kCountAll
  std::size_t arg = 0;     // color index (kColorIs) or category index of the property (kProperty)
};

std::string render(const Question& q);
std::string question_type(Template t);
std::string answer_type(Template t);
// The rule that defines the ground truth.
std::string answer(const Scene& s, const Question& q);

std::size_t feature_dim_a();
// Noiseless family A vector of a scene.
std::vector<double> clean_features(const Scene& s);

struct World {
  WorldSpec spec;
  std::vector<Scene> scenes;
  std::vector<Question> questions;  // parallel to dataset
  Dataset dataset;                  // image_id = scene index; image_feature left empty
  Matrix features_a;                // n_scenes x feature_dim_a()
  Matrix features_b;                // n_scenes x family_b_dim
  std::vector<std::string> corpus;  // auxiliary text, one sentence per line
  std::optional<embed::EmbeddingMatrix> external;
  pairs::ImageIndex image_index_a;  // single-object scenes per class
  pairs::ImageIndex image_index_b;  // the same images in family B
  std::map<std::string, std::string> lexicon;  // word -> Penn tag
};

World gen_dataset(const WorldSpec& spec);

// Writes world.json, dataset.jsonl, scenes.jsonl, features_A.nvqm,
// features_B.nvqm, corpus.txt, external_embeddings.txt, lexicon.tsv and
// image_index/{A,B}/<word>.nvqm into `dir`.
void save_world(const std::filesystem::path& dir, const World& w);

}  // namespace nvqa::synthworld

#endif  // NVQA_SYNTHWORLD_HPP_
