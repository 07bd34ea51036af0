#include "nvqa/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

#include "nvqa/dataset.hpp"
#include "nvqa/error.hpp"
#include "nvqa/matrix_io.hpp"
#include "nvqa/pairs.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/seqae.hpp"
#include "nvqa/splitgen.hpp"
#include "nvqa/text.hpp"

namespace nvqa::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& field, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(where + "." + key + " must be a non-negative integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  }
  try {
    field = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string get_string(const json& j, const char* key, const std::string& where, std::string fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(where + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

vqa::Protocol protocol_from_string(std::string_view s) {
  if (s == "OEQ") return vqa::Protocol::kOpenEnded;
  if (s == "MCQ") return vqa::Protocol::kMultipleChoice;
  throw ConfigError("unknown protocol '" + std::string(s) + "' (OEQ or MCQ)");
}

std::string setting_dir_name(embed::Setting s) { return embed::to_string(s); }

void write_text(const fs::path& path, const std::string& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot write " + path.string());
  os << s;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

text::LexiconTagger world_tagger(const fs::path& world) {
  return text::LexiconTagger::from_file(world / "lexicon.tsv");
}

pairs::ImageIndex family_index(const fs::path& world, const std::string& family) {
  if (family != "EF") return pairs::load_image_index(world / "image_index" / family);
  const auto a = pairs::load_image_index(world / "image_index" / "A");
  const auto b = pairs::load_image_index(world / "image_index" / "B");
  pairs::ImageIndex out;
  for (const auto& [word, m] : a) {
    const auto it = b.find(word);
    if (it == b.end()) throw LoadError("image index B lacks '" + word + "'");
    out.emplace(word, concat_features(m, it->second));
  }
  return out;
}

Matrix family_features(const fs::path& world, const std::string& family) {
  if (family == "EF")
    return concat_features(load_matrix(world / "features_A.nvqm"), load_matrix(world / "features_B.nvqm"));
  return load_matrix(world / ("features_" + family + ".nvqm"));
}

struct Parts {
  splitgen::SplitSpec spec;
  Dataset train, val, test, known;
};

Parts load_parts(const fs::path& world, const fs::path& split) {
  Parts p;
  p.spec = splitgen::SplitSpec::load(split / "split.json");
  const auto held = text::read_lines(split / "known_holdout.txt");
  const std::set<std::string> holdout(held.begin(), held.end());
  for (auto& ex : load_dataset(world / "dataset.jsonl")) {
    const auto it = p.spec.assignment.find(ex.qid);
    if (it == p.spec.assignment.end()) throw DataError("question " + ex.qid + " is not in the split");
    switch (it->second) {
      case splitgen::Part::kTest: p.test.push_back(std::move(ex)); break;
      case splitgen::Part::kVal: p.val.push_back(std::move(ex)); break;
      case splitgen::Part::kTrain:
        (holdout.count(ex.qid) ? p.known : p.train).push_back(std::move(ex));
        break;
    }
  }
  return p;
}

text::Vocabulary train_vocabulary(const Dataset& train, std::uint64_t min_freq) {
  text::Counts counts;
  for (const auto& ex : train)
    for (const auto& t : text::tokenize(ex.question)) ++counts[t];
  return text::Vocabulary::build(counts, min_freq);
}

json loss_json(const std::vector<double>& v) { return json(v); }

}  // namespace

std::string to_string(Feat f) {
  switch (f) {
    case Feat::kA: return "A";
    case Feat::kB: return "B";
    case Feat::kEF: return "EF";
    case Feat::kLF: return "LF";
  }
  return "?";
}

Feat feat_from_string(std::string_view s) {
  if (s == "A") return Feat::kA;
  if (s == "B") return Feat::kB;
  if (s == "EF") return Feat::kEF;
  if (s == "LF") return Feat::kLF;
  throw ConfigError("unknown feature choice '" + std::string(s) + "' (A, B, EF or LF)");
}

std::string to_string(Aux a) {
  switch (a) {
    case Aux::kNone: return "none";
    case Aux::kText: return "text";
    case Aux::kTextIm: return "text+im";
  }
  return "?";
}

Aux aux_from_string(std::string_view s) {
  if (s == "none") return Aux::kNone;
  if (s == "text") return Aux::kText;
  if (s == "text+im") return Aux::kTextIm;
  throw ConfigError("unknown auxiliary data '" + std::string(s) + "' (none, text or text+im)");
}

std::vector<std::string> families(Feat f) {
  switch (f) {
    case Feat::kA: return {"A"};
    case Feat::kB: return {"B"};
    case Feat::kEF: return {"EF"};
    case Feat::kLF: return {"A", "B"};
  }
  return {};
}

Config Config::from_json(const json& j) {
  check_keys(j, "config", {"seed", "world", "split", "vocab", "pairs", "ae", "model", "eval"});
  if (!j.contains("seed")) throw ConfigError("config: 'seed' is required");
  Config c;
  get(j, "seed", c.seed, "config");

  if (j.contains("world")) {
    if (j.at("world").is_object() && j.at("world").contains("seed"))
      throw ConfigError("world.seed is not allowed; the world uses the top-level seed");
    c.world = synthworld::WorldSpec::from_json(j.at("world"));
  }
  c.world.seed = c.seed;

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "split", {"k", "novel_fraction", "val_size", "known_holdout"});
    get(s, "k", c.split.k, "split");
    get(s, "novel_fraction", c.split.novel_fraction, "split");
    if (s.contains("val_size") && !s.at("val_size").is_null()) {
      std::size_t v = 0;
      get(s, "val_size", v, "split");
      c.split.val_size = v;
    }
    get(s, "known_holdout", c.split.known_holdout, "split");
  }
  if (j.contains("vocab")) {
    const auto& s = j.at("vocab");
    check_keys(s, "vocab", {"setting", "tau", "min_freq"});
    c.vocab.setting = embed::setting_from_string(get_string(s, "setting", "vocab", "train"));
    get(s, "tau", c.vocab.tau, "vocab");
    get(s, "min_freq", c.vocab.min_freq, "vocab");
  }
  if (j.contains("pairs")) {
    const auto& s = j.at("pairs");
    check_keys(s, "pairs", {"m", "n"});
    get(s, "m", c.pairs.m, "pairs");
    get(s, "n", c.pairs.n, "pairs");
  }
  if (j.contains("ae")) {
    const auto& s = j.at("ae");
    check_keys(s, "ae", {"epochs", "stage2_epochs", "batch_size", "lr", "clip"});
    get(s, "epochs", c.ae.epochs, "ae");
    get(s, "stage2_epochs", c.ae.stage2_epochs, "ae");
    get(s, "batch_size", c.ae.batch_size, "ae");
    get(s, "lr", c.ae.lr, "ae");
    get(s, "clip", c.ae.clip, "ae");
  }
  if (j.contains("model")) {
    const auto& s = j.at("model");
    check_keys(s, "model", {"arch", "feat", "aux", "d_e", "d_h", "d", "epochs", "batch_size", "lr", "clip",
                            "patience", "max_answers"});
    if (s.contains("arch")) {
      if (!s.at("arch").is_number_integer()) throw ConfigError("model.arch must be 1 or 2");
      c.model.arch = vqa::arch_from_int(s.at("arch").get<int>());
    }
    c.model.feat = feat_from_string(get_string(s, "feat", "model", "A"));
    c.model.aux = aux_from_string(get_string(s, "aux", "model", "none"));
    get(s, "d_e", c.model.d_e, "model");
    get(s, "d_h", c.model.d_h, "model");
    get(s, "d", c.model.d, "model");
    get(s, "epochs", c.model.epochs, "model");
    get(s, "batch_size", c.model.batch_size, "model");
    get(s, "lr", c.model.lr, "model");
    get(s, "clip", c.model.clip, "model");
    get(s, "patience", c.model.patience, "model");
    get(s, "max_answers", c.model.max_answers, "model");
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    check_keys(s, "eval", {"protocols", "lowercase", "trim"});
    if (s.contains("protocols")) {
      if (!s.at("protocols").is_array()) throw ConfigError("eval.protocols must be a list");
      c.eval.protocols.clear();
      for (const auto& p : s.at("protocols")) {
        if (!p.is_string()) throw ConfigError("eval.protocols entries must be strings");
        c.eval.protocols.push_back(protocol_from_string(p.get<std::string>()));
      }
    }
    get(s, "lowercase", c.eval.normalize.lowercase, "eval");
    get(s, "trim", c.eval.normalize.trim, "eval");
  }
  c.validate();
  return c;
}

json Config::to_json() const {
  json w = world.to_json();
  w.erase("seed");
  json protocols = json::array();
  for (auto p : eval.protocols) protocols.push_back(vqa::to_string(p));
  return {
      {"seed", seed},
      {"world", w},
      {"split",
       {{"k", split.k},
        {"novel_fraction", split.novel_fraction},
        {"val_size", split.val_size ? json(*split.val_size) : json(nullptr)},
        {"known_holdout", split.known_holdout}}},
      {"vocab", {{"setting", embed::to_string(vocab.setting)}, {"tau", vocab.tau}, {"min_freq", vocab.min_freq}}},
      {"pairs", {{"m", pairs.m}, {"n", pairs.n}}},
      {"ae",
       {{"epochs", ae.epochs},
        {"stage2_epochs", ae.stage2_epochs},
        {"batch_size", ae.batch_size},
        {"lr", ae.lr},
        {"clip", ae.clip}}},
      {"model",
       {{"arch", static_cast<int>(model.arch)},
        {"feat", pipeline::to_string(model.feat)},
        {"aux", pipeline::to_string(model.aux)},
        {"d_e", model.d_e},
        {"d_h", model.d_h},
        {"d", model.d},
        {"epochs", model.epochs},
        {"batch_size", model.batch_size},
        {"lr", model.lr},
        {"clip", model.clip},
        {"patience", model.patience},
        {"max_answers", model.max_answers}}},
      {"eval",
       {{"protocols", protocols},
        {"lowercase", eval.normalize.lowercase},
        {"trim", eval.normalize.trim}}},
  };
}

std::string Config::hash() const { return hex64(hash_string(to_json().dump())); }

std::string Config::run_name() const {
  const std::string aux = model.aux == Aux::kTextIm ? "textim" : pipeline::to_string(model.aux);
  return "a" + std::to_string(static_cast<int>(model.arch)) + "-" + pipeline::to_string(model.feat) + "-" + aux +
         "-" + embed::to_string(vocab.setting);
}

void Config::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(split.k, "split.k");
  positive(pairs.m, "pairs.m");
  positive(pairs.n, "pairs.n");
  positive(ae.epochs, "ae.epochs");
  positive(ae.batch_size, "ae.batch_size");
  positive(model.d_e, "model.d_e");
  positive(model.d_h, "model.d_h");
  positive(model.d, "model.d");
  positive(model.epochs, "model.epochs");
  positive(model.batch_size, "model.batch_size");
  positive(model.max_answers, "model.max_answers");
  if (!(split.novel_fraction > 0.0 && split.novel_fraction < 1.0))
    throw ConfigError("split.novel_fraction must lie in (0, 1)");
  if (!(split.known_holdout >= 0.0 && split.known_holdout < 1.0))
    throw ConfigError("split.known_holdout must lie in [0, 1)");
  if (!(vocab.tau >= -1.0 && vocab.tau <= 1.0)) throw ConfigError("vocab.tau must lie in [-1, 1]");
  if (!(ae.lr > 0.0) || !(model.lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (eval.protocols.empty()) throw ConfigError("eval.protocols is empty");
  if (vocab.setting == embed::Setting::kGenExpanded && model.aux == Aux::kNone)
    throw ConfigError("the gen-expanded vocabulary is seeded through a pretrained autoencoder; set model.aux");
}

Config load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return Config::from_json(j);
}

std::string file_digest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot read " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return hex64(hash_string(os.str()));
}

evalkit::EvalResult load_eval_result(const fs::path& path) {
  const json j = read_json(path);
  if (!j.contains("results")) throw LoadError(path.string() + " has no results block");
  return evalkit::EvalResult::from_json(j.at("results"));
}

Pipeline::Pipeline(Config cfg, fs::path out, std::ostream* log)
    : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {
  cfg_.world.seed = cfg_.seed;
  cfg_.validate();
}

fs::path Pipeline::vocab_dir() const { return out_ / "vocab" / setting_dir_name(cfg_.vocab.setting); }

fs::path Pipeline::pairs_dir(const std::string& family) const {
  return out_ / "pairs" / setting_dir_name(cfg_.vocab.setting) / family;
}

fs::path Pipeline::ae_dir(const std::string& family) const {
  const std::string setting = setting_dir_name(cfg_.vocab.setting);
  if (cfg_.model.aux == Aux::kTextIm) {
    const std::string variant = cfg_.model.arch == vqa::Arch::kArch1 ? "a1" : "a2";
    return out_ / "ae" / (setting + "-" + variant + "-" + family);
  }
  return out_ / "ae" / (setting + "-text");
}

void Pipeline::say(const std::string& msg) const {
  if (log_) *log_ << "[nvqa] " << msg << std::endl;
}

void Pipeline::write_manifest(const fs::path& dir, const std::string& stage, json extra) const {
  json files = json::object();
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) files[fs::relative(p, dir).generic_string()] = file_digest(p);
  json m = {{"tool", kToolName},
            {"version", kToolVersion},
            {"stage", stage},
            {"config_hash", cfg_.hash()},
            {"seed", cfg_.seed},
            {"files", files}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / "manifest.json", m);
}

void Pipeline::genworld() {
  say("genworld: " + std::to_string(cfg_.world.n_scenes) + " scenes");
  const auto w = synthworld::gen_dataset(cfg_.world);
  fs::remove_all(world_dir());
  synthworld::save_world(world_dir(), w);
  write_manifest(world_dir(), "genworld");
}

void Pipeline::split() {
  const Dataset data = load_dataset(world_dir() / "dataset.jsonl");
  const auto tagger = world_tagger(world_dir());
  splitgen::SplitOptions opts;
  opts.k = cfg_.split.k;
  opts.novel_fraction = cfg_.split.novel_fraction;
  opts.val_size = cfg_.split.val_size;
  opts.seed = cfg_.seed;
  const auto spec = splitgen::make_split(data, tagger, opts);
  const auto audit = splitgen::audit_split(spec, data);
  if (!audit.leaking_qids.empty() || !audit.unassigned.empty())
    throw DataError("split audit failed: " + std::to_string(audit.leaking_qids.size()) + " leaking, " +
                    std::to_string(audit.unassigned.size()) + " unassigned");

  // Known-only test questions come out of the train part.
  std::ostringstream held;
  Rng rng(mix_seed(cfg_.seed, 77));
  std::size_t n_held = 0;
  for (const auto& ex : data) {
    if (spec.assignment.at(ex.qid) != splitgen::Part::kTrain) continue;
    if (rng.uniform() < cfg_.split.known_holdout) {
      held << ex.qid << '\n';
      ++n_held;
    }
  }
  fs::remove_all(split_dir());
  fs::create_directories(split_dir());
  spec.save(split_dir() / "split.json");
  write_text(split_dir() / "known_holdout.txt", held.str());
  json rep = splitgen::split_report(spec, data, tagger);
  rep["known_holdout"] = n_held;
  rep["warnings"] = spec.warnings;
  rep["test_without_novel"] = audit.test_without_novel.size();
  write_json(split_dir() / "report.json", rep);
  write_manifest(split_dir(), "split");
  say("split: " + std::to_string(spec.known_nouns.size()) + " known nouns, " +
      std::to_string(spec.novel_nouns.size()) + " novel, " + std::to_string(n_held) + " held out");
}

void Pipeline::expand_vocab() {
  const Parts parts = load_parts(world_dir(), split_dir());
  const auto tagger = world_tagger(world_dir());
  const auto train_vocab = train_vocabulary(parts.train, cfg_.vocab.min_freq);
  std::optional<embed::EmbeddingMatrix> external;
  embed::VocabRequest req;
  req.setting = cfg_.vocab.setting;
  req.novel_words = &parts.spec.novel_nouns;
  req.tau = cfg_.vocab.tau;
  req.tagger = &tagger;
  if (cfg_.vocab.setting == embed::Setting::kGen || cfg_.vocab.setting == embed::Setting::kGenExpanded) {
    external = embed::EmbeddingMatrix::load_text(world_dir() / "external_embeddings.txt");
    req.external = &*external;
  }
  embed::NeighborReport rep;
  const auto vocab = embed::build_vocabulary_for_setting(train_vocab, req, &rep);

  fs::remove_all(vocab_dir());
  fs::create_directories(vocab_dir());
  train_vocab.save(vocab_dir() / "train_vocab.tsv");
  vocab.save(vocab_dir() / "vocab.tsv");
  std::vector<std::string> added(vocab.tokens().begin() + train_vocab.size(), vocab.tokens().end());
  json info = {{"setting", embed::to_string(cfg_.vocab.setting)},
               {"train_size", train_vocab.size()},
               {"size", vocab.size()},
               {"added", added},
               {"hash", hex64(vocab.hash())}};
  if (req.external) {
    info["tau"] = cfg_.vocab.tau;
    info["missing_anchors"] = rep.missing_anchors;
    info["zero_norm"] = rep.zero_norm;
  }
  write_json(vocab_dir() / "vocab_report.json", info);
  write_manifest(vocab_dir(), "expand-vocab");
  say("expand-vocab: " + embed::to_string(cfg_.vocab.setting) + " " + std::to_string(train_vocab.size()) +
      " -> " + std::to_string(vocab.size()) + " words");
}

void Pipeline::gen_pairs() {
  const auto vocab = text::Vocabulary::load(vocab_dir() / "vocab.tsv", embed::provenance_for(cfg_.vocab.setting));
  const auto tagger = world_tagger(world_dir());
  const auto corpus = text::read_lines(world_dir() / "corpus.txt");
  for (const auto& family : families(cfg_.model.feat)) {
    const auto index = family_index(world_dir(), family);
    std::set<std::string> objects;
    for (const auto& t : vocab.tokens())
      if (index.count(t) && tagger.is_noun(t)) objects.insert(t);
    const auto mined = pairs::sentence_mine(corpus, objects);
    const auto res = pairs::generate_pairs(objects, index, mined,
                                           {.m = cfg_.pairs.m, .n = cfg_.pairs.n, .seed = cfg_.seed});
    const fs::path dir = pairs_dir(family);
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
      std::ofstream os(dir / "pairs.jsonl", std::ios::binary);
      pairs::write_pairs(os, res.pairs);
    }
    write_json(dir / "pairs_report.json", {{"family", family},
                                           {"objects", objects},
                                           {"pairs", res.pairs.size()},
                                           {"skipped", res.skipped},
                                           {"m", cfg_.pairs.m},
                                           {"n", cfg_.pairs.n}});
    write_manifest(dir, "gen-pairs");
    say("gen-pairs: family " + family + ", " + std::to_string(objects.size()) + " objects, " +
        std::to_string(res.pairs.size()) + " pairs");
  }
}

void Pipeline::pretrain_ae() {
  if (cfg_.model.aux == Aux::kNone) {
    say("pretrain-ae: model.aux is none, nothing to do");
    return;
  }
  const Parts parts = load_parts(world_dir(), split_dir());
  const auto tagger = world_tagger(world_dir());
  const auto train_vocab = text::Vocabulary::load(vocab_dir() / "train_vocab.tsv", text::Provenance::kTrain);
  const auto vocab = text::Vocabulary::load(vocab_dir() / "vocab.tsv", embed::provenance_for(cfg_.vocab.setting));
  std::optional<embed::EmbeddingMatrix> external;
  if (cfg_.vocab.setting == embed::Setting::kGen || cfg_.vocab.setting == embed::Setting::kGenExpanded)
    external = embed::EmbeddingMatrix::load_text(world_dir() / "external_embeddings.txt");

  std::vector<std::string> fams = {"text"};
  if (cfg_.model.aux == Aux::kTextIm) fams = families(cfg_.model.feat);
  for (const auto& family : fams) {
    seqae::PretrainRequest req;
    req.setting = cfg_.vocab.setting;
    req.dims.d_e = cfg_.model.d_e;
    req.dims.d_h = cfg_.model.d_h;
    req.train.epochs = cfg_.ae.epochs;
    req.train.batch_size = cfg_.ae.batch_size;
    req.train.adam.lr = cfg_.ae.lr;
    req.train.clip_norm = cfg_.ae.clip;
    req.train.seed = cfg_.seed;
    req.stage2_epochs = cfg_.ae.stage2_epochs;
    req.train_vocab = &train_vocab;
    req.novel_words = &parts.spec.novel_nouns;
    req.external = external ? &*external : nullptr;
    req.tagger = &tagger;
    req.tau = cfg_.vocab.tau;

    seqae::AeCorpus corpus;
    if (family == "text") {
      req.variant = seqae::Variant::kText;
      corpus.sentences = text::read_lines(world_dir() / "corpus.txt");
    } else {
      req.variant = cfg_.model.arch == vqa::Arch::kArch1 ? seqae::Variant::kMultimodalA1
                                                         : seqae::Variant::kMultimodalA2;
      const auto index = family_index(world_dir(), family);
      std::ifstream is(pairs_dir(family) / "pairs.jsonl");
      if (!is) throw LoadError("no pairs for family " + family + "; run gen-pairs first");
      for (auto& p : pairs::read_pairs(is, index)) {
        corpus.sentences.push_back(std::move(p.sentence));
        corpus.images.push_back(std::move(p.feature));
      }
      if (corpus.sentences.empty()) throw DataError("no image-sentence pairs for family " + family);
      req.dims.d_i = corpus.images.front().size();
    }
    say("pretrain-ae: " + seqae::to_string(req.variant) + " on " + std::to_string(corpus.sentences.size()) +
        " sentences");
    auto res = seqae::pretrain_schedule(req, corpus);
    if (res.vocab.hash() != vocab.hash() || res.vocab.tokens() != vocab.tokens())
      throw ContractError("autoencoder vocabulary differs from the expand-vocab output");

    const fs::path dir = ae_dir(family);
    fs::remove_all(dir);
    fs::create_directories(dir);
    seqae::save_bundle(dir / "bundle", seqae::export_encoder(res.ae, vocab));
    json log = {{"variant", seqae::to_string(req.variant)},
                {"sentences", corpus.sentences.size()},
                {"vocab_size", vocab.size()},
                {"loss_stage1", loss_json(res.loss_stage1)},
                {"loss_stage2", loss_json(res.loss_stage2)}};
    if (res.expansion) {
      log["expanded"] = res.expansion->words;
      log["expansion_skipped"] = res.expansion->skipped;
    }
    if (res.alignment) {
      log["alignment"] = {{"shared_words", res.alignment->shared_words.size()},
                          {"residual_frobenius", res.alignment->residual_frobenius},
                          {"ridge", res.alignment->ridge}};
    }
    write_json(dir / "train_log.json", log);
    write_manifest(dir, "pretrain-ae");
  }
}

void Pipeline::train() {
  Parts parts = load_parts(world_dir(), split_dir());
  const auto vocab = text::Vocabulary::load(vocab_dir() / "vocab.tsv", embed::provenance_for(cfg_.vocab.setting));
  const auto answers = vqa::AnswerVocabulary::build(parts.train, cfg_.model.max_answers);
  fs::remove_all(model_dir());
  fs::create_directories(model_dir());
  json log = json::object();
  const auto fams = families(cfg_.model.feat);
  for (std::size_t fi = 0; fi < fams.size(); ++fi) {
    const auto& family = fams[fi];
    const Matrix feats = family_features(world_dir(), family);
    Dataset train = parts.train, val = parts.val;
    attach_features(train, feats);
    attach_features(val, feats);
    const vqa::VqaDims dims{.vocab = vocab.size(),
                            .d_e = cfg_.model.d_e,
                            .d_h = cfg_.model.d_h,
                            .d_i = feats.cols(),
                            .d = cfg_.model.d,
                            .answers = answers.size()};
    Rng rng(mix_seed(cfg_.seed, 5 + fi));
    vqa::Checkpoint ck{vqa::init_model(cfg_.model.arch, dims, vocab, rng), vocab, answers};
    if (cfg_.model.aux != Aux::kNone) {
      const std::string src = cfg_.model.aux == Aux::kText ? "text" : family;
      vqa::init_from_ae(ck.model, seqae::load_bundle(ae_dir(src) / "bundle"));
    }
    vqa::VqaTrainConfig tc;
    tc.epochs = cfg_.model.epochs;
    tc.batch_size = cfg_.model.batch_size;
    tc.adam.lr = cfg_.model.lr;
    tc.clip_norm = cfg_.model.clip;
    tc.patience = cfg_.model.patience;
    tc.seed = cfg_.seed;
    say("train: " + cfg_.run_name() + " family " + family + ", " + std::to_string(train.size()) +
        " questions, " + std::to_string(answers.size()) + " answers");
    const auto res = vqa::train_vqa(ck.model, train, val, vocab, answers, tc);
    vqa::save_checkpoint(model_dir() / family, ck);
    log[family] = {{"train_loss", res.train_loss},
                   {"val_accuracy", res.val_accuracy},
                   {"best_epoch", res.best_epoch},
                   {"skipped", res.skipped}};
  }
  write_json(model_dir() / "train_log.json", log);
  write_manifest(model_dir(), "train", {{"run", cfg_.run_name()}});
}

void Pipeline::eval() {
  Parts parts = load_parts(world_dir(), split_dir());
  const auto fams = families(cfg_.model.feat);
  std::vector<vqa::Checkpoint> cks;
  for (const auto& f : fams) cks.push_back(vqa::load_checkpoint(model_dir() / f));
  const Matrix feats = family_features(world_dir(), fams.front());
  std::optional<Matrix> feats_b;
  if (fams.size() > 1) feats_b = family_features(world_dir(), fams[1]);

  evalkit::EvalOptions opts;
  opts.protocols = cfg_.eval.protocols;
  opts.normalize = cfg_.eval.normalize;
  auto run = [&](Dataset data) {
    attach_features(data, feats);
    const vqa::Predictor a{&cks[0].model, &cks[0].vocab, &cks[0].answers};
    if (!feats_b) return evalkit::evaluate(a, data, &parts.spec, opts);
    const vqa::LateFusion lf{a, {&cks[1].model, &cks[1].vocab, &cks[1].answers}, &*feats_b};
    return evalkit::evaluate([&](const VqaExample& ex, vqa::Protocol p) { return lf.predict(ex, p); }, data,
                             &parts.spec, opts);
  };
  const json prov = {{"tool", kToolName}, {"version", kToolVersion}, {"config_hash", cfg_.hash()},
                     {"seed", cfg_.seed},  {"run", cfg_.run_name()}};
  fs::remove_all(eval_dir());
  fs::create_directories(eval_dir());
  std::map<std::string, evalkit::EvalResult> results;
  for (const auto& [name, data] : {std::pair<std::string, const Dataset*>{"test", &parts.test},
                                   std::pair<std::string, const Dataset*>{"known", &parts.known}}) {
    if (data->empty()) throw DataError("the " + name + " part is empty");
    const auto res = run(*data);
    write_json(eval_dir() / (name + ".json"), {{"provenance", prov}, {"results", res.to_json()}});
    for (const auto& [p, r] : res.protocols) {
      std::ofstream os(eval_dir() / ("predictions_" + name + "_" + vqa::to_string(p) + ".jsonl"), std::ios::binary);
      evalkit::write_prediction_dump(os, r);
    }
    results.emplace(name, res);
  }
  {
    std::ofstream os(eval_dir() / "drop.csv", std::ios::binary);
    evalkit::write_drop_csv(os, evalkit::drop_report(results.at("known"), results.at("test")));
  }
  write_manifest(eval_dir(), "eval", {{"run", cfg_.run_name()}});
  const auto o = vqa::Protocol::kOpenEnded;
  if (results.at("test").protocols.count(o)) {
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(4) << "eval: " << cfg_.run_name() << " known "
        << results.at("known").accuracy(o, evalkit::Category::kOverall) << ", novel "
        << results.at("test").accuracy(o, evalkit::Category::kNovel) << " (OEQ)";
    say(msg.str());
  }
}

void Pipeline::report() {
  const fs::path root = out_ / "eval";
  std::vector<fs::path> runs;
  if (fs::is_directory(root))
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "test.json")) runs.push_back(e.path());
  if (runs.empty()) throw LoadError("no evaluated runs under " + root.string());
  std::sort(runs.begin(), runs.end());

  std::ostringstream md, csv, drops;
  md << "| run | protocol";
  csv << "run,protocol";
  for (auto c : evalkit::kCategories) {
    md << " | " << evalkit::to_string(c);
    csv << ',' << evalkit::to_string(c);
  }
  md << " |\n|---|---";
  for (std::size_t i = 0; i < evalkit::kCategories.size(); ++i) md << "|---";
  md << "|\n";
  csv << '\n';
  drops << "run,protocol,category,known,novel,drop,relative_drop\n";
  md << std::fixed << std::setprecision(2);
  csv << std::fixed << std::setprecision(6);
  for (const auto& dir : runs) {
    const std::string run = dir.filename().string();
    const auto test = load_eval_result(dir / "test.json");
    for (const auto& [p, r] : test.protocols) {
      md << "| " << run << " | " << vqa::to_string(p);
      csv << run << ',' << vqa::to_string(p);
      for (auto c : evalkit::kCategories) {
        md << " | " << 100.0 * test.accuracy(p, c);
        csv << ',' << test.accuracy(p, c);
      }
      md << " |\n";
      csv << '\n';
    }
    if (fs::exists(dir / "known.json")) {
      std::ostringstream one;
      evalkit::write_drop_csv(one, evalkit::drop_report(load_eval_result(dir / "known.json"), test));
      std::istringstream lines(one.str());
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) drops << run << ',' << line << '\n';
    }
  }
  fs::remove_all(report_dir());
  fs::create_directories(report_dir());
  write_text(report_dir() / "results.md", md.str());
  write_text(report_dir() / "results.csv", csv.str());
  write_text(report_dir() / "drops.csv", drops.str());
  write_manifest(report_dir(), "report", {{"runs", runs.size()}});
  say("report: " + std::to_string(runs.size()) + " runs");
}

void Pipeline::run_all() {
  genworld();
  split();
  expand_vocab();
  gen_pairs();
  pretrain_ae();
  train();
  eval();
  report();
}

}  // namespace nvqa::pipeline
