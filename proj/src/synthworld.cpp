#include "nvqa/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "nvqa/error.hpp"
#include "nvqa/matrix_io.hpp"
#include "nvqa/rng.hpp"

namespace nvqa::synthworld {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<Category>& categories() {
  static const std::vector<Category> cats = {
      {"animal", "alive", {"runs", "sleeps", "eats", "hunts"},
       {"cat", "dog", "horse", "cow", "sheep", "wolf", "fox", "bear"}, {"tiger", "lion", "zebra"}},
      {"vehicle", "motorized", {"drives", "stops", "honks", "turns"},
       {"car", "bus", "truck", "bike", "train", "boat", "plane", "tractor"}, {"van", "taxi", "scooter"}},
      {"fruit", "edible", {"ripens", "rots", "grows", "falls"},
       {"apple", "banana", "grape", "lemon", "mango", "peach", "pear", "cherry"}, {"plum", "kiwi", "melon"}},
      {"furniture", "sturdy", {"stands", "creaks", "breaks", "wobbles"},
       {"chair", "table", "sofa", "bed", "desk", "shelf", "stool", "bench"}, {"cabinet", "dresser", "couch"}},
      {"clothing", "wearable", {"fits", "tears", "shrinks", "folds"},
       {"shirt", "hat", "coat", "dress", "shoe", "scarf", "glove", "sock"}, {"jacket", "skirt", "boot"}},
  };
  return cats;
}

const std::vector<std::string>& colors() {
  static const std::vector<std::string> c = {"red", "blue", "green", "yellow", "white", "black", "brown", "gray"};
  return c;
}

const std::vector<std::string>& object_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w;
    for (const auto& c : categories()) w.insert(w.end(), c.objects.begin(), c.objects.end());
    return w;
  }();
  return words;
}

std::size_t category_of(std::size_t object) {
  std::size_t base = 0;
  for (std::size_t c = 0; c < categories().size(); ++c) {
    base += categories()[c].objects.size();
    if (object < base) return c;
  }
  throw ContractError("category_of: object index " + std::to_string(object) + " out of range");
}

namespace {

constexpr std::size_t kMaxCount = 3;

// Nouns that live only in the external table, grouped into unrelated clusters.
const std::vector<std::vector<std::string>>& abstract_groups() {
  static const std::vector<std::vector<std::string>> g = {
      {"idea", "music", "theory", "justice", "freedom"},
      {"river", "mountain", "cloud", "forest", "ocean"},
      {"city", "market", "school", "office", "village"},
  };
  return g;
}

// Non-noun words of questions and corpus with their tags.
const std::map<std::string, std::string>& frame_words() {
  static const std::map<std::string, std::string> m = {
      {"a", "DT"},     {"and", "CC"},   {"are", "VBP"}, {"every", "DT"}, {"here", "RB"},  {"how", "WRB"},
      {"i", "PRP"},    {"is", "VBZ"},   {"kind", "NN"}, {"many", "JJ"},  {"of", "IN"},    {"saw", "VBD"},
      {"the", "DT"},   {"there", "EX"}, {"what", "WP"}, {"color", "JJ"}, {"1", "CD"},     {"2", "CD"},
      {"3", "CD"},     {"yes", "UH"},   {"no", "DT"},
  };
  return m;
}

const std::vector<std::string>& filler_answers() {
  static const std::vector<std::string> f = {"0",     "4",      "5",     "6",      "7",      "8",     "9",
                                             "10",    "maybe",  "left",  "right",  "big",    "small", "round",
                                             "square", "wooden", "metal", "orange", "purple", "pink"};
  return f;
}

std::vector<std::string> answer_pool(Template t) {
  switch (t) {
    case Template::kExists:
    case Template::kColorIs:
    case Template::kProperty: return {"yes", "no"};
    case Template::kCount:
    case Template::kCountAll: return {"1", "2", "3"};
    case Template::kWhatColor: return colors();
  }
  return {};
}

Template pick_template(Rng& rng) {
  static const std::pair<Template, double> weights[] = {
      {Template::kExists, 0.2},  {Template::kColorIs, 0.15},  {Template::kProperty, 0.15},
      {Template::kCount, 0.15},  {Template::kCountAll, 0.05}, {Template::kWhatColor, 0.3},
  };
  double u = rng.uniform();
  for (const auto& [t, w] : weights) {
    if (u < w) return t;
    u -= w;
  }
  return Template::kWhatColor;
}

Scene random_scene(const WorldSpec& spec, Rng& rng) {
  const std::size_t n_cat = categories().size();
  const std::size_t k = spec.min_objects + rng.below(spec.max_objects - spec.min_objects + 1);
  Scene s;
  for (auto c : rng.sample_without_replacement(n_cat, k)) {
    std::size_t base = 0;
    for (std::size_t i = 0; i < c; ++i) base += categories()[i].objects.size();
    SceneObject o;
    o.object = base + rng.below(categories()[c].objects.size());
    o.color = rng.below(colors().size());
    o.count = 1 + rng.below(kMaxCount);
    s.objects.push_back(o);
  }
  std::sort(s.objects.begin(), s.objects.end(), [](const auto& a, const auto& b) { return a.object < b.object; });
  return s;
}

Question random_question(const Scene& s, Rng& rng) {
  Question q;
  q.kind = pick_template(rng);
  const auto& present = s.objects[rng.below(s.objects.size())];
  q.object = present.object;
  switch (q.kind) {
    case Template::kExists:
      if (rng.uniform() < 0.5) {
        std::vector<std::size_t> absent;
        for (std::size_t o = 0; o < object_words().size(); ++o)
          if (!s.find(o)) absent.push_back(o);
        q.object = absent[rng.below(absent.size())];
      }
      break;
    case Template::kColorIs:
      q.arg = rng.uniform() < 0.5 ? present.color : rng.below(colors().size());
      break;
    case Template::kProperty:
      q.arg = rng.uniform() < 0.5 ? category_of(present.object) : rng.below(categories().size());
      break;
    default: break;
  }
  return q;
}

void add_noise(std::vector<double>& v, double sd, Rng& rng) {
  if (sd > 0.0)
    for (auto& x : v) x += rng.normal(0.0, sd);
}

std::vector<std::string> make_corpus(const WorldSpec& spec, Rng& rng) {
  std::vector<std::string> lines;
  const auto& words = object_words();
  for (std::size_t o = 0; o < words.size(); ++o) {
    const auto& cat = categories()[category_of(o)];
    const auto& w = words[o];
    for (std::size_t i = 0; i < spec.sentences_per_object; ++i) {
      const auto& verb = cat.verbs[rng.below(cat.verbs.size())];
      const auto& verb2 = cat.verbs[rng.below(cat.verbs.size())];
      const auto& color = colors()[rng.below(colors().size())];
      const auto& other = cat.objects[rng.below(cat.objects.size())];
      switch (rng.below(8)) {
        case 0: lines.push_back("the " + w + " " + verb); break;
        case 1: lines.push_back("a " + w + " is " + cat.property); break;
        case 2: lines.push_back("the " + color + " " + w + " " + verb); break;
        case 3: lines.push_back("every " + w + " is a kind of " + cat.name); break;
        case 4: lines.push_back("i saw a " + w + " and a " + other); break;
        case 5: lines.push_back("the " + cat.property + " " + w + " " + verb); break;
        case 6: lines.push_back("a " + w + " " + verb + " and " + verb2); break;
        default: lines.push_back("the " + w + " is " + color); break;
      }
    }
  }
  rng.shuffle(lines);
  return lines;
}

std::map<std::string, std::string> make_lexicon() {
  std::map<std::string, std::string> lex = frame_words();
  for (const auto& c : categories()) {
    lex[c.name] = "NN";
    lex[c.property] = "JJ";
    for (const auto& v : c.verbs) lex[v] = "VBZ";
    for (const auto& o : c.objects) lex[o] = "NN";
    for (const auto& o : c.external_only) lex[o] = "NN";
  }
  for (const auto& g : abstract_groups())
    for (const auto& w : g) lex[w] = "NN";
  for (const auto& c : colors()) lex[c] = "JJ";
  for (const auto& f : filler_answers()) lex.emplace(f, std::isdigit(static_cast<unsigned char>(f[0])) ? "CD" : "JJ");
  return lex;
}

std::vector<double> random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

// Orthonormal cluster centres via Gram-Schmidt.
std::vector<std::vector<double>> centres(std::size_t k, std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> out;
  while (out.size() < k) {
    auto v = random_unit(d, rng);
    for (const auto& u : out) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += v[i] * u[i];
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * u[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n < 1e-6) continue;
    for (auto& x : v) x /= std::sqrt(n);
    out.push_back(std::move(v));
  }
  return out;
}

embed::EmbeddingMatrix make_external(const WorldSpec& spec, const std::map<std::string, std::string>& lexicon,
                                     Rng& rng) {
  const std::size_t n_groups = categories().size() + abstract_groups().size();
  if (spec.embed_dim < n_groups)
    throw ConfigError("embed_dim must be at least " + std::to_string(n_groups) + " for orthogonal clusters");
  const auto c = centres(n_groups, spec.embed_dim, rng);
  std::map<std::string, std::size_t> group;
  for (std::size_t i = 0; i < categories().size(); ++i) {
    for (const auto& o : categories()[i].objects) group[o] = i;
    for (const auto& o : categories()[i].external_only) group[o] = i;
  }
  for (std::size_t i = 0; i < abstract_groups().size(); ++i)
    for (const auto& w : abstract_groups()[i]) group[w] = categories().size() + i;

  text::Counts counts;
  for (const auto& [w, tag] : lexicon) counts[w] = 1;
  auto vocab = text::Vocabulary::build(counts, 1, text::Provenance::kExternal);
  Matrix vectors(vocab.size(), spec.embed_dim);
  // Rows are filled in lexicon order so the table does not depend on the
  // vocabulary's internal ordering.
  for (const auto& [w, tag] : lexicon) {
    const auto it = group.find(w);
    auto base = it != group.end() ? c[it->second] : random_unit(spec.embed_dim, rng);
    add_noise(base, spec.embed_noise, rng);
    auto row = vectors.row(vocab.id(w));
    std::copy(base.begin(), base.end(), row.begin());
  }
  return embed::EmbeddingMatrix(std::move(vocab), std::move(vectors));
}

void check_spec(const WorldSpec& s) {
  auto fail = [](const std::string& m) { throw ConfigError("world spec: " + m); };
  if (s.n_scenes < 1) fail("n_scenes must be at least 1");
  if (s.questions_per_scene < 1) fail("questions_per_scene must be at least 1");
  if (s.min_objects < 1 || s.min_objects > s.max_objects || s.max_objects > categories().size())
    fail("need 1 <= min_objects <= max_objects <= " + std::to_string(categories().size()));
  if (s.answer_noise < 0.0 || s.answer_noise > 1.0) fail("answer_noise must lie in [0, 1]");
  if (s.mcq_choices < 2) fail("mcq_choices must be at least 2");
  if (s.feature_noise < 0.0 || s.family_b_noise < 0.0 || s.embed_noise < 0.0) fail("noise levels must be >= 0");
  if (s.family_b_dim < 1) fail("family_b_dim must be positive");
  if (s.images_per_class < 1) fail("images_per_class must be positive");
}

}  // namespace

const SceneObject* Scene::find(std::size_t object) const {
  for (const auto& o : objects)
    if (o.object == object) return &o;
  return nullptr;
}

std::string render(const Question& q) {
  const auto& w = object_words().at(q.object);
  switch (q.kind) {
    case Template::kExists: return "is there a " + w + " here";
    case Template::kColorIs: return "is the " + w + " " + colors().at(q.arg);
    case Template::kProperty: return "is the " + w + " " + categories().at(q.arg).property;
    case Template::kCount: return "how many " + w + " are there";
    case Template::kCountAll: return "how many are there";
    case Template::kWhatColor: return "what color is the " + w;
  }
  return "";
}

std::string question_type(Template t) {
  switch (t) {
    case Template::kExists: return "is there a";
    case Template::kColorIs: return "is the color";
    case Template::kProperty: return "is the property";
    case Template::kCount: return "how many";
    case Template::kCountAll: return "how many total";
    case Template::kWhatColor: return "what color";
  }
  return "";
}

std::string answer_type(Template t) {
  switch (t) {
    case Template::kExists:
    case Template::kColorIs:
    case Template::kProperty: return "yes/no";
    case Template::kCount:
    case Template::kCountAll: return "number";
    case Template::kWhatColor: return "other";
  }
  return "";
}

std::string answer(const Scene& s, const Question& q) {
  const SceneObject* o = s.find(q.object);
  auto yn = [](bool b) { return std::string(b ? "yes" : "no"); };
  switch (q.kind) {
    case Template::kExists: return yn(o != nullptr);
    case Template::kCountAll: return std::to_string(s.objects.size());
    default: break;
  }
  if (!o) throw ContractError("question about " + object_words().at(q.object) + " which is not in the scene");
  switch (q.kind) {
    case Template::kColorIs: return yn(o->color == q.arg);
    case Template::kProperty: return yn(category_of(o->object) == q.arg);
    case Template::kCount: return std::to_string(o->count);
    case Template::kWhatColor: return colors().at(o->color);
    default: return "";
  }
}

std::size_t feature_dim_a() { return object_words().size() + categories().size() * (colors().size() + 1); }

std::vector<double> clean_features(const Scene& s) {
  std::vector<double> f(feature_dim_a(), 0.0);
  const std::size_t n_obj = object_words().size();
  const std::size_t block = colors().size() + 1;
  for (const auto& o : s.objects) {
    f[o.object] = 1.0;
    const std::size_t base = n_obj + category_of(o.object) * block;
    f[base + o.color] = 1.0;
    f[base + colors().size()] = static_cast<double>(o.count) / kMaxCount;
  }
  return f;
}

json WorldSpec::to_json() const {
  return {{"seed", seed},
          {"n_scenes", n_scenes},
          {"questions_per_scene", questions_per_scene},
          {"min_objects", min_objects},
          {"max_objects", max_objects},
          {"answer_noise", answer_noise},
          {"mcq_choices", mcq_choices},
          {"feature_noise", feature_noise},
          {"family_b_dim", family_b_dim},
          {"family_b_noise", family_b_noise},
          {"embed_dim", embed_dim},
          {"embed_noise", embed_noise},
          {"sentences_per_object", sentences_per_object},
          {"images_per_class", images_per_class}};
}

WorldSpec WorldSpec::from_json(const json& j) {
  WorldSpec s;
  if (!j.is_object()) throw ConfigError("world spec must be a JSON object");
  const json defaults = s.to_json();
  for (const auto& [k, v] : j.items())
    if (!defaults.contains(k)) throw ConfigError("world spec: unknown key '" + k + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", s.seed);
    get("n_scenes", s.n_scenes);
    get("questions_per_scene", s.questions_per_scene);
    get("min_objects", s.min_objects);
    get("max_objects", s.max_objects);
    get("answer_noise", s.answer_noise);
    get("mcq_choices", s.mcq_choices);
    get("feature_noise", s.feature_noise);
    get("family_b_dim", s.family_b_dim);
    get("family_b_noise", s.family_b_noise);
    get("embed_dim", s.embed_dim);
    get("embed_noise", s.embed_noise);
    get("sentences_per_object", s.sentences_per_object);
    get("images_per_class", s.images_per_class);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("world spec: ") + e.what());
  }
  return s;
}

World gen_dataset(const WorldSpec& spec) {
  check_spec(spec);
  World w;
  w.spec = spec;
  Rng scene_rng(mix_seed(spec.seed, 1));
  Rng question_rng(mix_seed(spec.seed, 2));
  Rng feature_rng(mix_seed(spec.seed, 3));
  Rng corpus_rng(mix_seed(spec.seed, 4));
  Rng embed_rng(mix_seed(spec.seed, 5));
  Rng image_rng(mix_seed(spec.seed, 6));

  // Scenes and features.
  const std::size_t da = feature_dim_a();
  w.features_a = Matrix(spec.n_scenes, da);
  w.features_b = Matrix(spec.n_scenes, spec.family_b_dim);
  Matrix g(spec.family_b_dim, da);
  for (auto& x : g.values()) x = feature_rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(da)));
  auto to_family_b = [&](const std::vector<double>& a, std::span<double> b) {
    for (std::size_t r = 0; r < spec.family_b_dim; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < da; ++c) acc += g(r, c) * a[c];
      b[r] = acc + (spec.family_b_noise > 0.0 ? feature_rng.normal(0.0, spec.family_b_noise) : 0.0);
    }
  };
  for (std::size_t i = 0; i < spec.n_scenes; ++i) {
    w.scenes.push_back(random_scene(spec, scene_rng));
    auto a = clean_features(w.scenes.back());
    add_noise(a, spec.feature_noise, feature_rng);
    std::copy(a.begin(), a.end(), w.features_a.row(i).begin());
    to_family_b(a, w.features_b.row(i));
  }

  // Questions.
  std::vector<std::string> choice_pool = {"yes", "no", "1", "2", "3"};
  choice_pool.insert(choice_pool.end(), colors().begin(), colors().end());
  choice_pool.insert(choice_pool.end(), filler_answers().begin(), filler_answers().end());
  std::size_t qn = 0;
  for (std::size_t i = 0; i < spec.n_scenes; ++i) {
    for (std::size_t k = 0; k < spec.questions_per_scene; ++k) {
      const Question q = random_question(w.scenes[i], question_rng);
      VqaExample ex;
      char qid[32];
      std::snprintf(qid, sizeof qid, "q%06zu", qn++);
      ex.qid = qid;
      ex.image_id = i;
      ex.question = render(q);
      ex.question_type = question_type(q.kind);
      ex.answer_type = answer_type(q.kind);
      const std::string truth = answer(w.scenes[i], q);
      const auto pool = answer_pool(q.kind);
      for (std::size_t a = 0; a < kAnswersPerQuestion; ++a) {
        const bool noisy = spec.answer_noise > 0.0 && question_rng.uniform() < spec.answer_noise;
        ex.answers.push_back(noisy ? pool[question_rng.below(pool.size())] : truth);
      }
      std::vector<std::string> others;
      for (const auto& c : choice_pool)
        if (c != truth) others.push_back(c);
      const std::size_t n_distract = std::min(spec.mcq_choices - 1, others.size());
      for (auto idx : question_rng.sample_without_replacement(others.size(), n_distract))
        ex.choices.push_back(others[idx]);
      ex.choices.insert(ex.choices.begin() + static_cast<std::ptrdiff_t>(question_rng.below(n_distract + 1)), truth);
      w.questions.push_back(q);
      w.dataset.push_back(std::move(ex));
    }
  }

  w.corpus = make_corpus(spec, corpus_rng);
  w.lexicon = make_lexicon();
  w.external = make_external(spec, w.lexicon, embed_rng);

  // Single-object "class" images for weak pairing.
  for (std::size_t o = 0; o < object_words().size(); ++o) {
    Matrix rows_a(spec.images_per_class, da);
    Matrix rows_b(spec.images_per_class, spec.family_b_dim);
    for (std::size_t r = 0; r < spec.images_per_class; ++r) {
      Scene s;
      s.objects.push_back({o, image_rng.below(colors().size()), 1 + image_rng.below(kMaxCount)});
      auto f = clean_features(s);
      add_noise(f, spec.feature_noise, image_rng);
      std::copy(f.begin(), f.end(), rows_a.row(r).begin());
      to_family_b(f, rows_b.row(r));
    }
    w.image_index_a.emplace(object_words()[o], std::move(rows_a));
    w.image_index_b.emplace(object_words()[o], std::move(rows_b));
  }
  return w;
}

void save_world(const fs::path& dir, const World& w) {
  fs::create_directories(dir);
  json meta = {{"spec", w.spec.to_json()},
               {"feature_dim_a", w.features_a.cols()},
               {"feature_dim_b", w.features_b.cols()},
               {"questions", w.dataset.size()},
               {"corpus_lines", w.corpus.size()}};
  json cats = json::array();
  for (const auto& c : categories())
    cats.push_back({{"name", c.name}, {"property", c.property}, {"objects", c.objects},
                    {"external_only", c.external_only}});
  meta["categories"] = cats;
  meta["colors"] = colors();
  std::ofstream(dir / "world.json") << meta.dump(2) << '\n';

  save_dataset(dir / "dataset.jsonl", w.dataset);
  {
    std::ofstream os(dir / "scenes.jsonl");
    for (std::size_t i = 0; i < w.scenes.size(); ++i) {
      json objs = json::array();
      for (const auto& o : w.scenes[i].objects)
        objs.push_back({{"word", object_words()[o.object]}, {"color", colors()[o.color]}, {"count", o.count}});
      os << json{{"image_id", i}, {"objects", objs}}.dump() << '\n';
    }
  }
  save_matrix(dir / "features_A.nvqm", w.features_a);
  save_matrix(dir / "features_B.nvqm", w.features_b);
  {
    std::ofstream os(dir / "corpus.txt");
    for (const auto& l : w.corpus) os << l << '\n';
  }
  w.external->save_text(dir / "external_embeddings.txt");
  {
    std::ofstream os(dir / "lexicon.tsv");
    os << "# word<TAB>tag for the generated world\n";
    for (const auto& [word, tag] : w.lexicon) os << word << '\t' << tag << '\n';
  }
  pairs::save_image_index(dir / "image_index" / "A", w.image_index_a);
  pairs::save_image_index(dir / "image_index" / "B", w.image_index_b);
}

}  // namespace nvqa::synthworld
