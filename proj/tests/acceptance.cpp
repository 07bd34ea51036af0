// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
//   nvqa_acceptance [--only 1,4,7] [--seeds 5] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nvqa/dataset.hpp"
#include "nvqa/embed.hpp"
#include "nvqa/evalkit.hpp"
#include "nvqa/gradcheck.hpp"
#include "nvqa/kernels.hpp"
#include "nvqa/pairs.hpp"
#include "nvqa/pipeline.hpp"
#include "nvqa/reference.hpp"
#include "nvqa/seqae.hpp"
#include "nvqa/splitgen.hpp"
#include "nvqa/synthworld.hpp"
#include "nvqa/vqa.hpp"

namespace fs = std::filesystem;
using namespace nvqa;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

text::LexiconTagger tagger_of(const synthworld::World& w) {
  std::ostringstream os;
  for (const auto& [word, tag] : w.lexicon) os << word << '\t' << tag << '\n';
  std::istringstream is(os.str());
  return text::LexiconTagger::from_stream(is, {});
}

// 1. Analytic gradients against central differences for all five losses.
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t passed = 0, total = 0;
  double worst = 0.0;
  std::string worst_where;
  auto record = [&](const GradCheckReport& r, const std::string& what) {
    ++total;
    passed += r.pass;
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      worst_where = what + ":" + r.worst_param;
    }
  };
  text::Counts counts;
  for (const char* w : {"what", "color", "is", "the", "cat", "dog", "how", "many"}) counts[w] = 3;
  const auto vocab = text::Vocabulary::build(counts, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto variant : {seqae::Variant::kText, seqae::Variant::kMultimodalA1, seqae::Variant::kMultimodalA2}) {
      Rng rng(mix_seed(seed, 1));
      auto ae = seqae::init_autoencoder(variant, {.vocab = 7, .d_e = 4, .d_h = 4, .d_i = 3}, rng, 0.5);
      seqae::AeSample s{{3, 5, 4}, variant == seqae::Variant::kText ? std::vector<double>{} : random_vec(3, rng)};
      const LossBuilder loss = [&](ad::Tape& t, const std::vector<ad::Var>& leaves) {
        return seqae::ae_loss(t, ae, seqae::ae_vars(ae, leaves), s);
      };
      record(grad_check_precise(loss, ae.params(), [&] { return reference::ae_loss(ae, s); }, 1e-6, 1e-4),
             seqae::to_string(variant));
    }
    for (auto arch : {vqa::Arch::kArch1, vqa::Arch::kArch2}) {
      Rng rng(mix_seed(seed, 2));
      const vqa::VqaDims dims{.vocab = vocab.size(), .d_e = 3, .d_h = 4, .d_i = 3, .d = 3, .answers = 5};
      auto m = vqa::init_model(arch, dims, vocab, rng);
      const auto ids = vocab.encode_text("what color is the cat").ids;
      const auto x = random_vec(3, rng);
      const std::size_t target = rng.below(5);
      const LossBuilder loss = [&](ad::Tape& t, const std::vector<ad::Var>& leaves) {
        return vqa::vqa_loss(t, m, vqa::vqa_vars(m, leaves), ids, x, target);
      };
      record(grad_check_precise(loss, m.params(), [&] { return reference::vqa_loss(m, ids, x, target); }, 1e-6,
                                1e-4),
             "arch" + vqa::to_string(arch));
    }
  }
  const double secs = seconds_since(t0);
  return {passed == total && total == 50 && secs < 60.0,
          fmt("%zu/%zu checks pass, worst rel err %.2e (%s), %.1f s", passed, total, worst, worst_where.c_str(),
              secs)};
}

// 2. Least-squares alignment recovers held-out rows of a linear map.
Outcome alignment() {
  const std::size_t d = 8, shared = 50, held = 20;
  double worst_clean = 0.0, worst_noisy_mean = 0.0;
  const double sigma = 0.01;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(mix_seed(seed, 3));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < shared + held; ++i) words.push_back("w" + std::to_string(i));
    const auto ext_vocab = text::Vocabulary().expanded(words, text::Provenance::kExternal);
    Matrix aw(ext_vocab.size(), d);
    for (const auto& w : words)
      for (double& v : aw.row(ext_vocab.id(w))) v = rng.normal();
    Matrix r(d, d);
    for (double& v : r.values()) v = rng.normal();
    const Matrix truth = kernels::matmul(aw, r);
    const embed::EmbeddingMatrix external(ext_vocab, aw);

    const std::vector<std::string> known(words.begin(), words.begin() + shared);
    const auto kv = text::Vocabulary().expanded(known, text::Provenance::kTrain);
    std::set<std::string> targets(words.begin() + shared, words.end());
    for (double noise : {0.0, sigma}) {
      Matrix av(kv.size(), d);
      for (const auto& w : known)
        for (std::size_t c = 0; c < d; ++c) av(kv.id(w), c) = truth(ext_vocab.id(w), c) + noise * rng.normal();
      const auto al = embed::align(external, embed::EmbeddingMatrix(kv, av));
      const auto ex = embed::expand_vocab(al, external, targets);
      if (ex.words.size() != held) return {false, "expansion returned the wrong number of rows"};
      double max_err = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < held; ++i)
        for (std::size_t c = 0; c < d; ++c) {
          const double e = std::abs(ex.rows(i, c) - truth(ext_vocab.id(ex.words[i]), c));
          max_err = std::max(max_err, e);
          sum += e;
        }
      if (noise == 0.0)
        worst_clean = std::max(worst_clean, max_err);
      else
        worst_noisy_mean = std::max(worst_noisy_mean, sum / static_cast<double>(held * d));
    }
  }
  return {worst_clean < 1e-8 && worst_noisy_mean < 3 * sigma,
          fmt("noiseless max err %.2e (< 1e-8), noisy mean err %.4f (< %.2f), 10 seeds", worst_clean,
              worst_noisy_mean, 3 * sigma)};
}

// 3. Split soundness on the mini-world, with an independent recount.
Outcome split_soundness() {
  synthworld::WorldSpec ws;
  ws.seed = 11;
  ws.n_scenes = 500;
  const auto w = synthworld::gen_dataset(ws);
  const auto tagger = tagger_of(w);
  splitgen::Clustering cl;
  splitgen::SplitOptions opts;
  opts.k = 5;
  opts.seed = 11;
  const auto spec = splitgen::make_split(w.dataset, tagger, opts, &cl);
  if (w.dataset.size() < 2000) return {false, "mini-world too small"};

  std::size_t leaks = 0, test_without = 0;
  for (const auto& ex : w.dataset) {
    std::set<std::string> toks;
    for (const auto& t : text::tokenize(ex.question)) toks.insert(t);
    for (const auto& a : ex.answers)
      for (const auto& t : text::tokenize(a)) toks.insert(t);
    bool novel = false;
    for (const auto& t : toks) novel |= spec.novel_nouns.count(t) > 0;
    if (spec.assignment.at(ex.qid) == splitgen::Part::kTest)
      test_without += !novel;
    else
      leaks += novel;
  }
  const auto audit = splitgen::audit_split(spec, w.dataset);

  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_cluster;  // size, novel
  for (const auto& [noun, c] : cl.cluster_of) {
    ++per_cluster[c].first;
    per_cluster[c].second += spec.novel_nouns.count(noun);
  }
  double worst_dev = 0.0;
  for (const auto& [c, sn] : per_cluster)
    worst_dev = std::max(worst_dev, std::abs(static_cast<double>(sn.second) - 0.2 * static_cast<double>(sn.first)));

  // Recount the report from scratch.
  const auto rep = splitgen::split_report(spec, w.dataset, tagger);
  std::map<std::string, std::size_t> q;
  std::set<std::string> train_obj, test_obj;
  std::map<std::string, std::size_t> hist;
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> img;
  for (const auto& ex : w.dataset) {
    const auto part = spec.assignment.at(ex.qid);
    ++q[splitgen::to_string(part)];
    const auto toks = text::tokenize(ex.question);
    std::set<std::string> nouns, known;
    for (const auto& t : toks) {
      if (tagger.is_noun(t)) nouns.insert(t);
      if (spec.known_nouns.count(t)) known.insert(t);
    }
    if (part == splitgen::Part::kTest) {
      test_obj.insert(nouns.begin(), nouns.end());
      ++hist[known.size() >= 5 ? "5+" : std::to_string(known.size())];
      ++img[ex.image_id].second;
    } else {
      if (part == splitgen::Part::kTrain) train_obj.insert(nouns.begin(), nouns.end());
      ++img[ex.image_id].first;
    }
  }
  std::size_t both = 0;
  for (const auto& o : test_obj) both += train_obj.count(o);
  std::size_t common = 0, train_only = 0, test_only = 0;
  for (const auto& [id, c] : img) (c.first && c.second ? common : c.first ? train_only : test_only)++;
  bool counts_ok = rep["questions"]["train"] == q["train"] && rep["questions"]["val"] == q["val"] &&
                   rep["questions"]["test"] == q["test"] && rep["objects"]["train"] == train_obj.size() &&
                   rep["objects"]["test"] == test_obj.size() && rep["objects"]["both"] == both &&
                   rep["image_sharing"]["common"]["images"] == common &&
                   rep["image_sharing"]["train_only"]["images"] == train_only &&
                   rep["image_sharing"]["test_only"]["images"] == test_only;
  for (const auto& [bucket, n] : rep["known_objects_per_test_question"].items())
    counts_ok = counts_ok && n.get<std::size_t>() == hist[bucket];

  const bool pass = leaks == 0 && test_without == 0 && audit.leaking_qids.empty() &&
                    audit.test_without_novel.empty() && worst_dev <= 1.0 && counts_ok && q["test"] > 0;
  return {pass, fmt("%zu questions, %zu leaks, %zu test items without a novel noun, worst per-cluster deviation "
                    "%.1f nouns, report recount %s",
                    w.dataset.size(), leaks, test_without, worst_dev, counts_ok ? "matches" : "DIFFERS")};
}

// 4. Metric against a brute-force reimplementation.
Outcome metric() {
  Rng rng(4);
  const std::vector<std::string> pool = {"yes", "no", "2", "red"};
  Dataset data;
  std::vector<std::string> preds;
  std::set<double> seen;
  std::size_t mismatches = 0;
  double brute_sum = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    VqaExample ex;
    ex.qid = std::to_string(i);
    ex.question = "q";
    ex.answer_type = "other";
    // Skew the draws so every count from 0 to 10 turns up.
    const std::size_t bias = rng.below(pool.size());
    const double p_bias = rng.uniform();
    for (std::size_t k = 0; k < kAnswersPerQuestion; ++k)
      ex.answers.push_back(rng.uniform() < p_bias ? pool[bias] : pool[rng.below(pool.size())]);
    const std::string pred = pool[rng.below(pool.size())];
    std::size_t matches = 0;
    for (const auto& a : ex.answers) matches += a == pred;
    const double brute = matches >= 3 ? 1.0 : matches == 2 ? 2.0 / 3.0 : matches == 1 ? 1.0 / 3.0 : 0.0;
    const double got = evalkit::question_accuracy(pred, ex.answers);
    mismatches += got != brute;
    seen.insert(got);
    brute_sum += brute;
    data.push_back(ex);
    preds.push_back(pred);
  }
  evalkit::EvalOptions opts;
  opts.protocols = {vqa::Protocol::kOpenEnded};
  const auto res = evalkit::evaluate(
      [&](const VqaExample& ex, vqa::Protocol) { return preds[std::stoul(ex.qid)]; }, data, nullptr, opts);
  const double overall = res.accuracy(vqa::Protocol::kOpenEnded, evalkit::Category::kOverall);
  const double brute_mean = brute_sum / 1000.0;
  return {mismatches == 0 && seen.size() == 4 && overall == brute_mean,
          fmt("1000 draws, %zu mismatches, %zu distinct values, Overall %.17g vs brute force %.17g", mismatches,
              seen.size(), overall, brute_mean)};
}

// 5 and 6 share one set of pipeline runs per seed.
struct SeedResult {
  double known = 0.0;       // train vocabulary, no pretraining: known-only Overall
  double base = 0.0;        // same model, Novel category
  double oracle_none = 0.0; // oracle vocabulary, no pretraining
  double oracle_ae = 0.0;
  double genexp_ae = 0.0;
  double train_ae = 0.0;
  double secs_drop = 0.0;   // time for the runs criterion 5 needs
};

struct Experiment {
  std::vector<SeedResult> seeds;
  std::string error;
};

pipeline::Config experiment_config(std::uint64_t seed) {
  pipeline::Config c;
  c.seed = seed;
  c.world.seed = seed;
  return c;
}

const Experiment& experiment(std::size_t n_seeds, const fs::path& work) {
  static std::optional<Experiment> cache;
  if (cache) return *cache;
  cache.emplace();
  const auto o = vqa::Protocol::kOpenEnded;
  try {
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
      const auto t0 = std::chrono::steady_clock::now();
      const fs::path out = work / ("experiment_seed" + std::to_string(seed));
      fs::remove_all(out);
      SeedResult r;
      auto run = [&](embed::Setting setting, pipeline::Aux aux, bool shared_stages) {
        auto c = experiment_config(seed);
        c.vocab.setting = setting;
        c.model.aux = aux;
        pipeline::Pipeline p(c, out);
        if (shared_stages) {
          p.genworld();
          p.split();
        }
        p.expand_vocab();
        p.pretrain_ae();
        p.train();
        p.eval();
        return std::pair{pipeline::load_eval_result(p.eval_dir() / "known.json"),
                         pipeline::load_eval_result(p.eval_dir() / "test.json")};
      };
      const auto [known, novel] = run(embed::Setting::kTrain, pipeline::Aux::kNone, true);
      r.known = known.accuracy(o, evalkit::Category::kOverall);
      r.base = novel.accuracy(o, evalkit::Category::kNovel);
      r.secs_drop = seconds_since(t0);
      r.oracle_none = run(embed::Setting::kOracle, pipeline::Aux::kNone, false).second.accuracy(o, evalkit::Category::kNovel);
      r.oracle_ae = run(embed::Setting::kOracle, pipeline::Aux::kText, false).second.accuracy(o, evalkit::Category::kNovel);
      r.genexp_ae =
          run(embed::Setting::kGenExpanded, pipeline::Aux::kText, false).second.accuracy(o, evalkit::Category::kNovel);
      r.train_ae = run(embed::Setting::kTrain, pipeline::Aux::kText, false).second.accuracy(o, evalkit::Category::kNovel);
      std::fprintf(stderr,
                   "  seed %llu: known %.4f novel %.4f | novel: oracle %.4f, oracle+ae %.4f, gen-expanded+ae %.4f, "
                   "train+ae %.4f (%.0f s)\n",
                   static_cast<unsigned long long>(seed), r.known, r.base, r.oracle_none, r.oracle_ae, r.genexp_ae,
                   r.train_ae, seconds_since(t0));
      cache->seeds.push_back(r);
    }
  } catch (const std::exception& e) {
    cache->error = e.what();
  }
  return *cache;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome drop(std::size_t n_seeds, const fs::path& work) {
  const auto& ex = experiment(n_seeds, work);
  if (!ex.error.empty()) return {false, "pipeline failed: " + ex.error};
  std::size_t hits = 0;
  double worst_secs = 0.0;
  std::string drops;
  for (const auto& s : ex.seeds) {
    const double rel = (s.known - s.base) / s.known;
    hits += rel >= 0.10;
    worst_secs = std::max(worst_secs, s.secs_drop);
    drops += fmt("%s%.1f%%", drops.empty() ? "" : " ", 100.0 * rel);
  }
  const std::size_t need = n_seeds - n_seeds / 5;
  return {hits >= need && worst_secs < 600.0,
          fmt("relative Overall drop known -> novel per seed: %s; %zu/%zu seeds >= 10%%, slowest %.0f s", drops.c_str(),
              hits, n_seeds, worst_secs)};
}

Outcome recovery(std::size_t n_seeds, const fs::path& work) {
  const auto& ex = experiment(n_seeds, work);
  if (!ex.error.empty()) return {false, "pipeline failed: " + ex.error};
  // The baseline is the stronger of the two models trained without pretraining.
  std::size_t oracle_wins = 0, genexp_wins = 0;
  std::vector<double> gain_oracle, gain_train;
  for (const auto& s : ex.seeds) {
    const double baseline = std::max(s.base, s.oracle_none);
    oracle_wins += s.oracle_ae > baseline;
    genexp_wins += s.genexp_ae > baseline;
    gain_oracle.push_back(s.oracle_ae - baseline);
    gain_train.push_back(s.train_ae - baseline);
  }
  const std::size_t need = n_seeds - n_seeds / 5;
  const double mo = median(gain_oracle), mt = median(gain_train);
  return {oracle_wins >= need && genexp_wins >= need && mt < mo,
          fmt("Novel beats the no-pretraining baseline: oracle+ae %zu/%zu, gen-expanded+ae %zu/%zu; median gain "
              "train+ae %+.4f < oracle+ae %+.4f",
              oracle_wins, n_seeds, genexp_wins, n_seeds, mt, mo)};
}

// 7. With the train vocabulary, a novel noun and <unk> are the same input.
Outcome unk_blindness() {
  synthworld::WorldSpec ws;
  ws.seed = 7;
  ws.n_scenes = 300;
  auto w = synthworld::gen_dataset(ws);
  const auto tagger = tagger_of(w);
  splitgen::SplitOptions opts;
  opts.k = 5;
  opts.seed = 7;
  const auto spec = splitgen::make_split(w.dataset, tagger, opts);
  attach_features(w.dataset, w.features_a);
  Dataset train, test;
  for (const auto& ex : w.dataset)
    (spec.assignment.at(ex.qid) == splitgen::Part::kTest ? test : train).push_back(ex);
  text::Counts counts;
  for (const auto& ex : train)
    for (const auto& t : text::tokenize(ex.question)) ++counts[t];
  const auto vocab = text::Vocabulary::build(counts, 1);
  const auto answers = vqa::AnswerVocabulary::build(train);
  std::size_t checked = 0, differ = 0;
  for (auto arch : {vqa::Arch::kArch1, vqa::Arch::kArch2}) {
    Rng rng(17);
    const vqa::VqaDims dims{.vocab = vocab.size(), .d_e = 8, .d_h = 8, .d_i = w.features_a.cols(), .d = 8,
                            .answers = answers.size()};
    auto m = vqa::init_model(arch, dims, vocab, rng);
    vqa::train_vqa(m, train, {}, vocab, answers, {.epochs = 1, .patience = 0, .seed = 1});
    for (const auto& ex : test) {
      const auto toks = text::tokenize(ex.question);
      std::string twin;
      bool has_novel = false;
      for (const auto& t : toks) {
        const bool oov = !vocab.contains(t);
        has_novel |= spec.novel_nouns.count(t) > 0;
        twin += (twin.empty() ? "" : " ") + (oov ? std::string(text::kUnk) : t);
      }
      if (!has_novel) continue;
      const Matrix a = vqa::forward(m, vqa::encode_question(ex.question, vocab), ex.image_feature);
      const Matrix b = vqa::forward(m, vqa::encode_question(twin, vocab), ex.image_feature);
      ++checked;
      differ += a.values().size() != b.values().size() ||
                std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(double)) != 0;
    }
  }
  return {checked > 0 && differ == 0,
          fmt("%zu novel-noun questions over both architectures, %zu differ from their <unk> twin", checked, differ)};
}

// 8. Weak pairs: exact counts.
Outcome pair_counts() {
  pairs::ImageIndex images;
  std::vector<std::string> lines;
  std::set<std::string> objects;
  for (const char* o : {"cat", "dog", "cow", "car", "cup"}) {
    objects.insert(o);
    images[o] = Matrix(35, 4, 1.0);
    for (int s = 0; s < 28; ++s) lines.push_back("a " + std::string(o) + " number " + std::to_string(s));
  }
  const auto mined = pairs::sentence_mine(lines, objects);
  const auto res = pairs::generate_pairs(objects, images, mined, {.m = 20, .n = 20, .seed = 3});
  // Random stock sizes against the formula.
  Rng rng(8);
  std::size_t formula_misses = 0;
  for (int trial = 0; trial < 50; ++trial) {
    pairs::ImageIndex imgs;
    std::vector<std::string> ls;
    std::set<std::string> objs;
    std::size_t expected = 0;
    const std::size_t m = 1 + rng.below(8), n = 1 + rng.below(8);
    for (int k = 0; k < 6; ++k) {
      const std::string o = "obj" + std::to_string(k);
      objs.insert(o);
      const std::size_t ni = rng.below(12), ns = rng.below(12);
      if (ni) imgs[o] = Matrix(ni, 2, 0.5);
      for (std::size_t s = 0; s < ns; ++s) ls.push_back(o + " line " + std::to_string(s));
      expected += std::min(m, ni) * std::min(n, ns);
    }
    const auto r = pairs::generate_pairs(objs, imgs, pairs::sentence_mine(ls, objs), {.m = m, .n = n, .seed = 1});
    formula_misses += r.pairs.size() != expected;
  }
  return {res.pairs.size() == 2000 && formula_misses == 0,
          fmt("5 objects at m = n = 20 give %zu pairs (want 2000); %zu/50 random stocks off the formula",
              res.pairs.size(), formula_misses)};
}

// 9. Autoencoder sanity.
Outcome ae_sanity() {
  const std::vector<std::string> sentences = {
      "the dog runs fast",  "a red car is here", "the cat sleeps",     "birds can fly high",      "the blue bus stops",
      "my hat is green",    "two cows eat grass", "the old chair breaks", "a small fish swims away", "the sun is hot"};
  text::Counts counts;
  text::count_tokens(sentences, counts);
  const auto vocab = text::Vocabulary::build(counts, 1);
  Rng rng(6);
  auto ae = seqae::init_autoencoder(seqae::Variant::kText, {.vocab = vocab.size(), .d_e = 24, .d_h = 32}, rng);
  std::vector<seqae::AeSample> data;
  for (const auto& s : sentences) data.push_back(seqae::make_sample(s, vocab));
  seqae::train_ae(ae, data, {.epochs = 200, .batch_size = 5, .adam = {.lr = 1e-2}, .seed = 1});
  const double acc = seqae::reconstruction_accuracy(ae, data);

  auto a1 = seqae::init_autoencoder(seqae::Variant::kMultimodalA1,
                                    {.vocab = vocab.size(), .d_e = 8, .d_h = 12, .d_i = 6}, rng);
  double worst = 0.0;
  for (const auto& s : data) {
    const auto e = seqae::encode(a1, seqae::AeSample{s.ids, std::vector<double>(6, 0.0)});
    worst = std::max(worst, kernels::sub(e.h_dec0, e.h_enc).max_abs());
  }
  return {acc >= 0.95 && worst == 0.0,
          fmt("reconstruction %.1f%% after 200 epochs (>= 95%%); A1 with x = 0: max |h_dec0 - h_enc| = %.1e", 100 * acc,
              worst)};
}

// 10. The eight CLI commands twice, compared file by file.
Outcome determinism(const fs::path& work, const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) return {false, "CLI binary not found: " + cli};
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "config.json");
    os << R"({"seed": 5,
  "world": {"n_scenes": 400, "sentences_per_object": 20, "images_per_class": 8},
  "vocab": {"setting": "gen-expanded"},
  "pairs": {"m": 4, "n": 4},
  "ae": {"epochs": 2, "stage2_epochs": 1},
  "model": {"arch": 1, "feat": "LF", "aux": "text+im", "epochs": 3}})";
  }
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* run : {"a", "b"})
    for (const char* cmd : {"genworld", "split", "expand-vocab", "gen-pairs", "pretrain-ae", "train", "eval", "report"}) {
      const std::string line = "\"" + cli + "\" " + cmd + " -q --config \"" + (dir / "config.json").string() +
                               "\" --out-dir \"" + (dir / run).string() + "\"";
      if (std::system(line.c_str()) != 0) return {false, std::string("command failed: ") + cmd};
    }
  const double secs = seconds_since(t0) / 2;
  auto digests = [](const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = pipeline::file_digest(e.path());
    return out;
  };
  const auto a = digests(dir / "a"), b = digests(dir / "b");
  std::size_t differ = a.size() != b.size();
  for (const auto& [f, h] : a) differ += !b.count(f) || b.at(f) != h;
  return {differ == 0 && !a.empty(),
          fmt("%zu files, %zu differ; one full pipeline run took %.1f s", a.size(), differ, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::size_t seeds = 5;
  std::string work = (fs::temp_directory_path() / "nvqa_acceptance").string();
  std::string cli = NVQA_CLI_PATH;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--seeds", seeds, "seeds for criteria 5 and 6")->check(CLI::PositiveNumber);
  app.add_option("--work", work, "scratch directory");
  app.add_option("--cli", cli, "path of the nvqa binary");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"alignment oracle", alignment},
      {"split soundness", split_soundness},
      {"metric oracle", metric},
      {"known-to-novel drop", [&] { return drop(seeds, work); }},
      {"recovery with pretraining", [&] { return recovery(seeds, work); }},
      {"unk blindness", unk_blindness},
      {"weak-pair counting", pair_counts},
      {"autoencoder sanity", ae_sanity},
      {"pipeline determinism", [&] { return determinism(work, cli); }},
  };
  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("[%s] C%d %s: %s\n", r.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), r.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
