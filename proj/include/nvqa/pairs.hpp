#ifndef NVQA_PAIRS_HPP_
#define NVQA_PAIRS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nvqa/matrix.hpp"

namespace nvqa::pairs {

// Class word -> feature rows (one row per image of that class).
using ImageIndex = std::map<std::string, Matrix>;

// One file "<word>.nvqm" per class.
void save_image_index(const std::filesystem::path& dir, const ImageIndex& index);
ImageIndex load_image_index(const std::filesystem::path& dir);

struct MinedSentence {
  std::size_t line = 0;  // position in the concatenated corpora
  std::string text;
};
using SentenceIndex = std::map<std::string, std::vector<MinedSentence>>;

// Every line whose tokens include the object word, first occurrence only,
// in corpus order. Objects with no match get an empty entry.
SentenceIndex sentence_mine(const std::vector<std::string>& lines, const std::set<std::string>& objects);

struct WeakPair {
  std::string word;
  std::size_t image_row = 0;
  std::size_t sentence_line = 0;
  std::string sentence;
  std::vector<double> feature;
};

struct PairOptions {
  std::size_t m = 20;  // images per object
  std::size_t n = 20;  // sentences per object
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct PairResult {
  std::vector<WeakPair> pairs;        // objects in sorted order, images outer, sentences inner
  std::vector<std::string> skipped;   // objects lacking images or sentences
};

// For each object: min(m, images) rows and min(n, sentences) sentences
// drawn without replacement, then their full cross product. Each object
// samples from its own stream, so results do not depend on which other
// objects are requested. Throws ContractError when m or n is 0.
PairResult generate_pairs(const std::set<std::string>& objects, const ImageIndex& images,
                          const SentenceIndex& sentences, const PairOptions& opts);

// JSON-lines {word, image_row_ref: {word, row}, sentence, sentence_line}.
void write_pairs(std::ostream& os, const std::vector<WeakPair>& pairs);
// Reads pairs back and resolves features through `images`.
std::vector<WeakPair> read_pairs(std::istream& is, const ImageIndex& images);

}  // namespace nvqa::pairs

#endif  // NVQA_PAIRS_HPP_
