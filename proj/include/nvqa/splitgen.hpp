#ifndef NVQA_SPLITGEN_HPP_
#define NVQA_SPLITGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvqa/dataset.hpp"
#include "nvqa/kmeans.hpp"
#include "nvqa/text.hpp"

namespace nvqa::splitgen {

struct NounProfile {
  std::string noun;
  std::map<std::string, std::uint64_t> histogram;  // question type -> count
  std::vector<double> normalized;                  // over ProfileSet::types
};

struct ProfileSet {
  std::vector<std::string> types;  // sorted question-type labels
  std::vector<NounProfile> nouns;  // sorted by noun
};

// Per-noun histogram of the question types it occurs in (question text only).
ProfileSet profile_nouns(const Dataset& data, const text::NounTagger& tagger);

struct Clustering {
  std::map<std::string, std::size_t> cluster_of;  // noun -> cluster id
  std::size_t k = 0;
  KMeansResult kmeans;
};

// k-means over the normalized histograms (k-means++, 20 restarts).
Clustering cluster_nouns(const ProfileSet& profiles, std::size_t k, std::uint64_t seed);

struct KnownNovel {
  std::set<std::string> known;
  std::set<std::string> novel;
};

// Per cluster of size n: floor(fraction * n + 0.5) novel nouns drawn
// uniformly, never the whole cluster when n >= 2.
KnownNovel sample_known_novel(const Clustering& clusters, double novel_fraction, std::uint64_t seed);

// Number of novel nouns a cluster of size n contributes.
std::size_t novel_count(std::size_t cluster_size, double novel_fraction);

enum class Part { kTrain, kVal, kTest };
std::string to_string(Part p);
Part part_from_string(std::string_view s);

struct SplitSpec {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  double novel_fraction = 0.2;
  std::set<std::string> known_nouns;
  std::set<std::string> novel_nouns;
  std::map<std::string, Part> assignment;  // qid -> part
  std::vector<std::string> warnings;       // not serialized

  nlohmann::json to_json() const;
  static SplitSpec from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SplitSpec load(const std::filesystem::path& path);
};

// Tokens of the question plus the tokens of every answer.
std::set<std::string> question_and_answer_tokens(const VqaExample& ex);

// val_size defaults to round(0.022 * remainder) when not given.
// test <- question or any answer mentions a novel noun; val <- uniform
// sample of the rest; train <- everything else.
SplitSpec assign_questions(const Dataset& data, const KnownNovel& nouns,
                           std::optional<std::size_t> val_size, std::uint64_t seed);

struct SplitOptions {
  std::size_t k = 14;
  double novel_fraction = 0.2;
  std::optional<std::size_t> val_size;
  std::uint64_t seed = 0;
};

// profile -> cluster -> sample -> assign, all from one seed.
SplitSpec make_split(const Dataset& data, const text::NounTagger& tagger, const SplitOptions& opts,
                     Clustering* clustering_out = nullptr);

struct Audit {
  std::vector<std::string> leaking_qids;        // train/val items mentioning a novel noun
  std::vector<std::string> test_without_novel;  // test items with no novel noun
  std::vector<std::string> unassigned;          // dataset qids missing from the spec
  bool ok() const { return leaking_qids.empty() && test_without_novel.empty() && unassigned.empty(); }
};

Audit audit_split(const SplitSpec& spec, const Dataset& data);

// Split statistics: question and object counts, known-object histogram of
// test questions (buckets 0..4 and "5+") and the image-sharing table.
nlohmann::json split_report(const SplitSpec& spec, const Dataset& data, const text::NounTagger& tagger);

}  // namespace nvqa::splitgen

#endif  // NVQA_SPLITGEN_HPP_
