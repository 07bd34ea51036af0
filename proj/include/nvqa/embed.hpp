#ifndef NVQA_EMBED_HPP_
#define NVQA_EMBED_HPP_

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nvqa/matrix.hpp"
#include "nvqa/text.hpp"

namespace nvqa::embed {

// |V| x d table keyed by a vocabulary. Reserved rows of external tables
// are zero.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(text::Vocabulary vocab, Matrix vectors);

  const text::Vocabulary& vocab() const { return vocab_; }
  const Matrix& vectors() const { return vectors_; }
  std::size_t dim() const { return vectors_.cols(); }
  std::size_t size() const { return vectors_.rows(); }
  bool contains(const std::string& word) const { return vocab_.contains(word); }
  // Row for `word` as a 1 x d matrix, or nullopt when absent.
  std::optional<Matrix> row(const std::string& word) const;

  // "<count> <dim>" header then "word v1 ... vd" per line. Reserved rows
  // that are all zero are not written.
  void save_text(const std::filesystem::path& path) const;
  static EmbeddingMatrix load_text(const std::filesystem::path& path,
                                   text::Provenance provenance = text::Provenance::kExternal);
  static EmbeddingMatrix load_text(std::istream& is,
                                   text::Provenance provenance = text::Provenance::kExternal);

 private:
  text::Vocabulary vocab_;
  Matrix vectors_;
};

struct NeighborReport {
  std::set<std::string> words;
  std::vector<std::string> missing_anchors;  // anchors absent from the table
  std::vector<std::string> zero_norm;        // words skipped for zero norm
};

enum class Parallelism { kSerial, kOpenMP };

// Every table word w (not an anchor) with min_a (1 - cos(w, a)) <= tau.
// Requires 0 < tau < 2.
NeighborReport cosine_neighbors(const std::set<std::string>& anchors,
                                const EmbeddingMatrix& external, double tau,
                                Parallelism mode = Parallelism::kOpenMP);

struct AlignmentResult {
  Matrix m;                               // d_w x d_v
  std::vector<std::string> shared_words;  // rows used, in A_v vocabulary order
  double residual_frobenius = 0.0;        // ||A_w M - A_v|| over shared rows
  double ridge = 0.0;                     // ridge actually used
};

// Least-squares M with A_w M ~= A_v over the words both tables share.
// Needs at least d_w shared words (AlignmentError otherwise). When the
// normal matrix is singular at ridge 0, retries once with kRobustRidge.
AlignmentResult align(const EmbeddingMatrix& external, const EmbeddingMatrix& learned,
                      double ridge = 0.0);

struct Expansion {
  std::vector<std::string> words;  // sorted
  Matrix rows;                     // words.size() x d_v
  std::vector<std::string> skipped;
};

// Projects the external vector of each target word through M. Output rows
// are ordered by word, so the result does not depend on input order.
Expansion expand_vocab(const AlignmentResult& alignment, const EmbeddingMatrix& external,
                       const std::set<std::string>& target_words);

enum class Setting { kTrain, kOracle, kGen, kGenExpanded };

std::string to_string(Setting s);
Setting setting_from_string(std::string_view s);
text::Provenance provenance_for(Setting s);

struct VocabRequest {
  Setting setting = Setting::kTrain;
  const std::set<std::string>* novel_words = nullptr;  // oracle
  const EmbeddingMatrix* external = nullptr;           // gen / gen-expanded
  double tau = 0.4;
  // General-setting anchors: nouns of the train vocabulary (default) or every word.
  bool anchors_nouns_only = true;
  const text::NounTagger* tagger = nullptr;  // required when anchors_nouns_only
};

// train: unchanged (retagged). oracle: train + novel words. gen and
// gen-expanded: train + cosine neighbours of the anchors. New words are
// appended in lexicographic order.
text::Vocabulary build_vocabulary_for_setting(const text::Vocabulary& train_vocab,
                                              const VocabRequest& req,
                                              NeighborReport* report = nullptr);

}  // namespace nvqa::embed

#endif  // NVQA_EMBED_HPP_
