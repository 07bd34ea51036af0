#include "nvqa/splitgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nvqa/error.hpp"

namespace nvqa::splitgen {

using nlohmann::json;

ProfileSet profile_nouns(const Dataset& data, const text::NounTagger& tagger) {
  std::set<std::string> types;
  std::map<std::string, NounProfile> by_noun;
  for (const auto& ex : data) {
    if (ex.question_type.empty()) throw DataError("question " + ex.qid + " has no question type");
    types.insert(ex.question_type);
    for (const auto& noun : tagger.nouns(text::tokenize(ex.question))) {
      auto& p = by_noun[noun];
      p.noun = noun;
      ++p.histogram[ex.question_type];
    }
  }
  ProfileSet out;
  out.types.assign(types.begin(), types.end());
  for (auto& [noun, p] : by_noun) {
    double total = 0.0;
    for (const auto& [t, n] : p.histogram) total += static_cast<double>(n);
    p.normalized.assign(out.types.size(), 0.0);
    for (std::size_t i = 0; i < out.types.size(); ++i) {
      auto it = p.histogram.find(out.types[i]);
      if (it != p.histogram.end()) p.normalized[i] = static_cast<double>(it->second) / total;
    }
    out.nouns.push_back(std::move(p));
  }
  return out;
}

Clustering cluster_nouns(const ProfileSet& profiles, std::size_t k, std::uint64_t seed) {
  const std::size_t n = profiles.nouns.size();
  if (k == 0 || k > n) {
    throw ContractError("cluster_nouns: k=" + std::to_string(k) + " exceeds the " +
                        std::to_string(n) + " nouns available");
  }
  Matrix points(n, profiles.types.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = profiles.nouns[i].normalized;
    std::copy(v.begin(), v.end(), points.row(i).begin());
  }
  Rng rng(seed);
  Clustering out;
  out.k = k;
  out.kmeans = kmeans(points, {.k = k, .restarts = 20}, rng);
  for (std::size_t i = 0; i < n; ++i) out.cluster_of[profiles.nouns[i].noun] = out.kmeans.labels[i];
  return out;
}

std::size_t novel_count(std::size_t cluster_size, double novel_fraction) {
  auto n = static_cast<std::size_t>(std::floor(novel_fraction * static_cast<double>(cluster_size) + 0.5));
  if (cluster_size >= 2 && n >= cluster_size) n = cluster_size - 1;
  return std::min(n, cluster_size);
}

KnownNovel sample_known_novel(const Clustering& clusters, double novel_fraction, std::uint64_t seed) {
  if (!(novel_fraction > 0.0 && novel_fraction < 1.0))
    throw ContractError("sample_known_novel: fraction must lie in (0, 1)");
  std::vector<std::vector<std::string>> members(clusters.k);
  for (const auto& [noun, c] : clusters.cluster_of) members.at(c).push_back(noun);  // sorted
  Rng rng(seed);
  KnownNovel out;
  for (const auto& m : members) {
    const std::size_t take = novel_count(m.size(), novel_fraction);
    auto picks = rng.sample_without_replacement(m.size(), take);
    std::vector<bool> is_novel(m.size(), false);
    for (auto p : picks) is_novel[p] = true;
    for (std::size_t i = 0; i < m.size(); ++i) (is_novel[i] ? out.novel : out.known).insert(m[i]);
  }
  return out;
}

std::string to_string(Part p) {
  switch (p) {
    case Part::kTrain: return "train";
    case Part::kVal: return "val";
    case Part::kTest: return "test";
  }
  return "?";
}

Part part_from_string(std::string_view s) {
  if (s == "train") return Part::kTrain;
  if (s == "val") return Part::kVal;
  if (s == "test") return Part::kTest;
  throw DataError("unknown split part '" + std::string(s) + "'");
}

std::set<std::string> question_and_answer_tokens(const VqaExample& ex) {
  std::set<std::string> toks;
  for (auto& t : text::tokenize(ex.question)) toks.insert(std::move(t));
  for (const auto& a : ex.answers)
    for (auto& t : text::tokenize(a)) toks.insert(std::move(t));
  return toks;
}

namespace {

bool mentions_any(const std::set<std::string>& tokens, const std::set<std::string>& words) {
  for (const auto& t : tokens)
    if (words.count(t)) return true;
  return false;
}

}  // namespace

SplitSpec assign_questions(const Dataset& data, const KnownNovel& nouns,
                           std::optional<std::size_t> val_size, std::uint64_t seed) {
  SplitSpec spec;
  spec.seed = seed;
  spec.known_nouns = nouns.known;
  spec.novel_nouns = nouns.novel;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    if (spec.assignment.count(ex.qid)) throw DataError("duplicate question id " + ex.qid);
    if (mentions_any(question_and_answer_tokens(ex), nouns.novel)) {
      spec.assignment[ex.qid] = Part::kTest;
    } else {
      spec.assignment[ex.qid] = Part::kTrain;
      rest.push_back(i);
    }
  }
  const std::size_t nval =
      val_size.value_or(static_cast<std::size_t>(std::llround(0.022 * static_cast<double>(rest.size()))));
  if (nval > 0 && nval >= rest.size()) {
    throw ContractError("assign_questions: val_size " + std::to_string(nval) +
                        " leaves no training questions out of " + std::to_string(rest.size()));
  }
  Rng rng(seed);
  for (auto pick : rng.sample_without_replacement(rest.size(), nval))
    spec.assignment[data[rest[pick]].qid] = Part::kVal;
  if (rest.size() == data.size()) spec.warnings.push_back("degenerate split: test set is empty");
  return spec;
}

SplitSpec make_split(const Dataset& data, const text::NounTagger& tagger, const SplitOptions& opts,
                     Clustering* clustering_out) {
  const ProfileSet profiles = profile_nouns(data, tagger);
  Clustering clusters = cluster_nouns(profiles, opts.k, mix_seed(opts.seed, 1));
  const KnownNovel kn = sample_known_novel(clusters, opts.novel_fraction, mix_seed(opts.seed, 2));
  SplitSpec spec = assign_questions(data, kn, opts.val_size, mix_seed(opts.seed, 3));
  spec.seed = opts.seed;
  spec.k = opts.k;
  spec.novel_fraction = opts.novel_fraction;
  if (clustering_out) *clustering_out = std::move(clusters);
  return spec;
}

json SplitSpec::to_json() const {
  json assign = json::object();
  for (const auto& [qid, part] : assignment) assign[qid] = to_string(part);
  return {{"seed", seed},
          {"k", k},
          {"novel_fraction", novel_fraction},
          {"known_nouns", known_nouns},
          {"novel_nouns", novel_nouns},
          {"assignment", assign}};
}

SplitSpec SplitSpec::from_json(const json& j) {
  SplitSpec s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.k = j.at("k").get<std::size_t>();
    s.novel_fraction = j.at("novel_fraction").get<double>();
    s.known_nouns = j.at("known_nouns").get<std::set<std::string>>();
    s.novel_nouns = j.at("novel_nouns").get<std::set<std::string>>();
    for (const auto& [qid, part] : j.at("assignment").items())
      s.assignment[qid] = part_from_string(part.get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(std::string("split spec: ") + e.what());
  }
  for (const auto& n : s.known_nouns)
    if (s.novel_nouns.count(n)) throw DataError("split spec: '" + n + "' is both known and novel");
  return s;
}

void SplitSpec::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw LoadError("cannot write " + path.string());
  os << to_json().dump(2) << '\n';
}

SplitSpec SplitSpec::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  try {
    return from_json(json::parse(is));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Audit audit_split(const SplitSpec& spec, const Dataset& data) {
  Audit a;
  for (const auto& ex : data) {
    auto it = spec.assignment.find(ex.qid);
    if (it == spec.assignment.end()) {
      a.unassigned.push_back(ex.qid);
      continue;
    }
    const bool novel = mentions_any(question_and_answer_tokens(ex), spec.novel_nouns);
    if (it->second == Part::kTest) {
      if (!novel) a.test_without_novel.push_back(ex.qid);
    } else if (novel) {
      a.leaking_qids.push_back(ex.qid);
    }
  }
  return a;
}

json split_report(const SplitSpec& spec, const Dataset& data, const text::NounTagger& tagger) {
  std::map<Part, std::size_t> questions{{Part::kTrain, 0}, {Part::kVal, 0}, {Part::kTest, 0}};
  std::set<std::string> train_objects, test_objects;
  std::vector<std::size_t> known_hist(6, 0);
  // image id -> (train-side questions, test questions); val counts as train side
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> images;

  for (const auto& ex : data) {
    auto it = spec.assignment.find(ex.qid);
    if (it == spec.assignment.end()) throw DataError("split_report: question " + ex.qid + " is unassigned");
    const Part part = it->second;
    ++questions[part];
    const auto toks = text::tokenize(ex.question);
    const auto nouns = tagger.nouns(toks);
    auto& img = images[ex.image_id];
    if (part == Part::kTest) {
      test_objects.insert(nouns.begin(), nouns.end());
      std::set<std::string> known;
      for (const auto& t : toks)
        if (spec.known_nouns.count(t)) known.insert(t);
      ++known_hist[std::min<std::size_t>(known.size(), 5)];
      ++img.second;
    } else {
      if (part == Part::kTrain) train_objects.insert(nouns.begin(), nouns.end());
      ++img.first;
    }
  }
  std::size_t both = 0;
  for (const auto& o : test_objects) both += train_objects.count(o);

  json sharing = {{"common", {{"images", 0}, {"train_questions", 0}, {"test_questions", 0}}},
                  {"train_only", {{"images", 0}, {"questions", 0}}},
                  {"test_only", {{"images", 0}, {"questions", 0}}}};
  for (const auto& [id, counts] : images) {
    const auto [tr, te] = counts;
    if (tr > 0 && te > 0) {
      sharing["common"]["images"] = sharing["common"]["images"].get<std::size_t>() + 1;
      sharing["common"]["train_questions"] = sharing["common"]["train_questions"].get<std::size_t>() + tr;
      sharing["common"]["test_questions"] = sharing["common"]["test_questions"].get<std::size_t>() + te;
    } else if (tr > 0) {
      sharing["train_only"]["images"] = sharing["train_only"]["images"].get<std::size_t>() + 1;
      sharing["train_only"]["questions"] = sharing["train_only"]["questions"].get<std::size_t>() + tr;
    } else {
      sharing["test_only"]["images"] = sharing["test_only"]["images"].get<std::size_t>() + 1;
      sharing["test_only"]["questions"] = sharing["test_only"]["questions"].get<std::size_t>() + te;
    }
  }

  json hist = json::object();
  for (std::size_t i = 0; i < 5; ++i) hist[std::to_string(i)] = known_hist[i];
  hist["5+"] = known_hist[5];
  return {{"questions",
           {{"train", questions[Part::kTrain]}, {"val", questions[Part::kVal]}, {"test", questions[Part::kTest]}}},
          {"objects", {{"train", train_objects.size()}, {"test", test_objects.size()}, {"both", both}}},
          {"known_objects_per_test_question", hist},
          {"image_sharing", sharing},
          {"nouns", {{"known", spec.known_nouns.size()}, {"novel", spec.novel_nouns.size()}}}};
}

}  // namespace nvqa::splitgen
