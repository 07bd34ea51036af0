#ifndef NVQA_VQA_HPP_
#define NVQA_VQA_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nvqa/dataset.hpp"
#include "nvqa/optim.hpp"
#include "nvqa/seqae.hpp"
#include "nvqa/tape.hpp"
#include "nvqa/text.hpp"

namespace nvqa::vqa {

// Whole answers (possibly multi-word) as classes, most frequent first.
class AnswerVocabulary {
 public:
  AnswerVocabulary() = default;
  explicit AnswerVocabulary(std::vector<std::string> answers);

  // Counts every one of the 10 answers of every example; ties broken
  // lexicographically; keeps the top `max_size`.
  static AnswerVocabulary build(const Dataset& train, std::size_t max_size = 1000);

  std::size_t size() const { return answers_.size(); }
  const std::string& answer(std::size_t i) const { return answers_.at(i); }
  const std::vector<std::string>& answers() const { return answers_; }
  std::optional<std::size_t> index(const std::string& answer) const;

  void save(const std::filesystem::path& path) const;  // one answer per line
  static AnswerVocabulary load(const std::filesystem::path& path);

  bool operator==(const AnswerVocabulary& o) const { return answers_ == o.answers_; }

 private:
  std::vector<std::string> answers_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Arch { kArch1 = 1, kArch2 = 2 };
std::string to_string(Arch a);
Arch arch_from_int(int a);

struct VqaDims {
  std::size_t vocab = 0;
  std::size_t d_e = 512;
  std::size_t d_h = 512;  // d_Q for Arch1
  std::size_t d_i = 0;
  std::size_t d = 512;    // Arch1 common space
  std::size_t answers = 0;
  bool operator==(const VqaDims&) const = default;
};

// Arch1: p = W_QI (tanh(W_Q x_Q) * tanh(W_I x_I)), x_Q the last LSTM state
// over BOS, w..., EOS. Arch2: the LSTM reads W_e x_I and then w...; its last
// state goes through W_A. No biases in either head.
struct VqaModel {
  Arch arch = Arch::kArch1;
  VqaDims dims;
  std::uint64_t vocab_hash = 0;
  text::Provenance setting = text::Provenance::kTrain;

  Matrix embed;  // |V| x d_e
  seqae::LstmParams lstm;
  Matrix w_q;   // Arch1: d x d_h
  Matrix w_i;   // Arch1: d x d_i
  Matrix w_qi;  // Arch1: |A| x d
  Matrix w_e;   // Arch2: d_e x d_i
  Matrix w_a;   // Arch2: |A| x d_h

  ParamList params();
};

// sd <= 0: weights N(0, 1/fan_in), embeddings N(0, 1).
VqaModel init_model(Arch arch, const VqaDims& dims, const text::Vocabulary& vocab, Rng& rng, double sd = 0.0);

struct VqaVars {
  ad::Var embed, w_q, w_i, w_qi, w_e, w_a;
  seqae::LstmVars lstm;
};
VqaVars vqa_vars(const VqaModel& m, const std::vector<ad::Var>& leaves);

// Unnormalized answer scores as a column vector.
ad::Var forward(ad::Tape& t, const VqaModel& m, const VqaVars& v, const std::vector<std::size_t>& ids,
                const std::vector<double>& x_i);
Matrix forward(const VqaModel& m, const std::vector<std::size_t>& ids, const std::vector<double>& x_i);

ad::Var vqa_loss(ad::Tape& t, const VqaModel& m, const VqaVars& v, const std::vector<std::size_t>& ids,
                 const std::vector<double>& x_i, std::size_t target);

// Copies word embeddings and the question LSTM (and, for Arch2 from an A2
// bundle, the image-to-word map). Everything else keeps its fresh values.
// Dimension mismatches and vocabulary hash mismatches raise LoadError;
// a different vocabulary setting raises ProvenanceError.
void init_from_ae(VqaModel& m, const seqae::EncoderBundle& b);
// The model's question encoder as a bundle (inverse of init_from_ae).
seqae::EncoderBundle export_question_encoder(const VqaModel& m);

enum class Protocol { kOpenEnded, kMultipleChoice };
std::string to_string(Protocol p);

// Index of the largest score, lowest index on ties.
std::size_t argmax(const std::vector<double>& scores);

// Open-ended: argmax over every answer. Multiple-choice: argmax over the
// choices present in the answer vocabulary; if none is, the first choice.
std::string pick_answer(const std::vector<double>& scores, const AnswerVocabulary& answers,
                        const std::vector<std::string>& choices, Protocol protocol);

std::vector<double> softmax(const Matrix& logits);

struct EncodedExample {
  std::vector<std::size_t> ids;
  const std::vector<double>* feature = nullptr;
  std::size_t target = 0;
};

// Question ids under `vocab`, truncated to seqae::kMaxSentenceTokens.
std::vector<std::size_t> encode_question(const std::string& question, const text::Vocabulary& vocab);

struct VqaTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  AdamConfig adam{.lr = 5e-3};
  double clip_norm = 5.0;
  std::size_t patience = 5;  // epochs without val improvement; 0 disables
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct VqaTrainResult {
  std::vector<double> train_loss;   // mean per example, per epoch
  std::vector<double> val_accuracy; // VQA accuracy, per epoch (empty without val)
  std::size_t best_epoch = 0;
  std::size_t skipped = 0;          // training examples whose mode answer is out of vocabulary
};

// Cross-entropy on the mode of each example's answers. Keeps the weights
// of the best validation epoch. Throws DataError when nothing is trainable.
VqaTrainResult train_vqa(VqaModel& m, const Dataset& train, const Dataset& val, const text::Vocabulary& vocab,
                         const AnswerVocabulary& answers, const VqaTrainConfig& cfg);

// A trained model with the vocabularies it was trained against.
struct Predictor {
  const VqaModel* model = nullptr;
  const text::Vocabulary* vocab = nullptr;
  const AnswerVocabulary* answers = nullptr;

  Matrix logits(const VqaExample& ex) const;
  std::string predict(const VqaExample& ex, Protocol protocol) const;
};

// Late fusion: softmax outputs of two models (one per feature family)
// averaged. `features_b` supplies the second model's image features by id.
struct LateFusion {
  Predictor a;
  Predictor b;
  const Matrix* features_b = nullptr;

  std::string predict(const VqaExample& ex, Protocol protocol) const;
};

struct Checkpoint {
  VqaModel model;
  text::Vocabulary vocab;
  AnswerVocabulary answers;
};

// manifest.json + one NVQM file per tensor + vocab.tsv + answers.txt.
void save_checkpoint(const std::filesystem::path& dir, Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace nvqa::vqa

#endif  // NVQA_VQA_HPP_
