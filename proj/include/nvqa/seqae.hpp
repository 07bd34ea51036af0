#ifndef NVQA_SEQAE_HPP_
#define NVQA_SEQAE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nvqa/embed.hpp"
#include "nvqa/matrix.hpp"
#include "nvqa/optim.hpp"
#include "nvqa/params.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/tape.hpp"
#include "nvqa/text.hpp"

namespace nvqa::seqae {

// Longer sentences are truncated before encoding.
inline constexpr std::size_t kMaxSentenceTokens = 30;

// Gate order everywhere: input, forget, output, candidate.
enum Gate { kGateI = 0, kGateF = 1, kGateO = 2, kGateG = 3 };

struct LstmParams {
  std::size_t d_in = 0;
  std::size_t d_h = 0;
  Matrix w[4];  // d_h x d_in
  Matrix u[4];  // d_h x d_h
  Matrix b[4];  // d_h x 1

  // Normal(0, sd) weights (sd <= 0: 1/sqrt(fan_in)), zero biases except
  // the forget gate at +1.
  static LstmParams init(std::size_t d_in, std::size_t d_h, Rng& rng, double sd);
  void append_to(ParamList& out, const std::string& prefix);
};

struct LstmVars {
  ad::Var w[4], u[4], b[4];
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

// Binds the 12 LSTM leaves starting at leaves[offset] (append_to order).
LstmVars lstm_vars(const std::vector<ad::Var>& leaves, std::size_t offset);

// i,f,o = sigmoid(W x + U h + b), g = tanh(...), c' = f*c + i*g, h' = o*tanh(c').
LstmState lstm_step(ad::Tape& t, const LstmVars& p, ad::Var x, LstmState s);
LstmState lstm_zero_state(ad::Tape& t, std::size_t d_h);

// Plain-value form of one step, for inspection and tests.
std::pair<Matrix, Matrix> lstm_step(const LstmParams& p, const Matrix& x, const Matrix& h, const Matrix& c);

enum class Variant { kText, kMultimodalA1, kMultimodalA2 };
std::string to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct AeDims {
  std::size_t vocab = 0;
  std::size_t d_e = 512;
  std::size_t d_h = 512;
  std::size_t d_i = 0;  // image feature size, multimodal variants only
  bool operator==(const AeDims&) const = default;
};

// Shared word table for encoder and decoder inputs; the decoder predicts
// tokens through out_w / out_b. A1 adds the fusion projections (common
// space = d_h so the skip-sum is defined); A2 adds the image-to-word map.
struct AutoencoderParams {
  Variant variant = Variant::kText;
  AeDims dims;
  Matrix embed;  // |V| x d_e
  LstmParams enc;
  LstmParams dec;
  Matrix out_w;  // |V| x d_h
  Matrix out_b;  // |V| x 1
  Matrix wq_f;   // A1: d_h x d_h
  Matrix wi_f;   // A1: d_h x d_i
  Matrix w_img;  // A2: d_e x d_i

  ParamList params();
};

// sd <= 0 picks the default scale: weights N(0, 1/fan_in), embeddings N(0, 1).
AutoencoderParams init_autoencoder(Variant variant, const AeDims& dims, Rng& rng, double sd = 0.0);

// Token ids without BOS/EOS; `image` is empty for the text variant.
struct AeSample {
  std::vector<std::size_t> ids;
  std::vector<double> image;
};

// Tokenizes and truncates to kMaxSentenceTokens.
AeSample make_sample(std::string_view sentence, const text::Vocabulary& vocab,
                     std::vector<double> image = {});

struct AeVars {
  ad::Var embed, out_w, out_b, wq_f, wi_f, w_img;
  LstmVars enc, dec;
};
AeVars ae_vars(const AutoencoderParams& ae, const std::vector<ad::Var>& leaves);

struct EncoderOut {
  ad::Var h_enc;
  std::optional<ad::Var> fusion;  // A1 only
};

// text: consumes BOS, w..., EOS. A2: consumes W_img x, w... A1: as text,
// plus fusion = tanh(W_Q' h_enc) * tanh(W_I' x).
EncoderOut encode(ad::Tape& t, const AutoencoderParams& ae, const AeVars& v, const AeSample& s);
// h_enc for text and A2, h_enc + fusion for A1.
ad::Var decoder_init(ad::Tape& t, const EncoderOut& e);

// Teacher-forced reconstruction: decoder reads BOS, w... and predicts
// w..., EOS. Returns the summed cross-entropy; `tokens` gets T + 1.
ad::Var ae_loss(ad::Tape& t, const AutoencoderParams& ae, const AeVars& v, const AeSample& s,
                std::size_t* tokens = nullptr);

struct Encoded {
  Matrix h_enc;
  Matrix fusion;  // empty unless A1
  Matrix h_dec0;
};
Encoded encode(const AutoencoderParams& ae, const AeSample& s);

// Free-running greedy decode of T + 1 tokens from the encoded sentence.
std::vector<std::size_t> greedy_decode(const AutoencoderParams& ae, const AeSample& s);
// Fraction of target positions (w..., EOS) reproduced by greedy_decode.
double reconstruction_accuracy(const AutoencoderParams& ae, const std::vector<AeSample>& samples);

struct AeTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  AdamConfig adam{.lr = 5e-3};
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct AeTrainResult {
  std::vector<double> loss_curve;  // mean per-token loss, one entry per epoch
};

// Adam on token-averaged minibatch loss. Throws DataError on an empty corpus.
AeTrainResult train_ae(AutoencoderParams& ae, const std::vector<AeSample>& data, const AeTrainConfig& cfg);

// Mean per-token loss without training.
double mean_token_loss(const AutoencoderParams& ae, const std::vector<AeSample>& data);

// What moves into a VQA question encoder.
struct EncoderBundle {
  Variant variant = Variant::kText;
  AeDims dims;
  std::uint64_t vocab_hash = 0;
  text::Provenance setting = text::Provenance::kTrain;
  Matrix embed;
  LstmParams enc;
  Matrix w_img;  // A2 only

  ParamList params();
};

EncoderBundle export_encoder(const AutoencoderParams& ae, const text::Vocabulary& vocab);
// Directory of NVQM tensors plus manifest.json {variant, dims, vocab_hash, setting}.
void save_bundle(const std::filesystem::path& dir, const EncoderBundle& b);
EncoderBundle load_bundle(const std::filesystem::path& dir);

// Full autoencoder checkpoint (same layout, every tensor).
void save_autoencoder(const std::filesystem::path& dir, AutoencoderParams& ae);
AutoencoderParams load_autoencoder(const std::filesystem::path& dir);

struct AeCorpus {
  std::vector<std::string> sentences;
  std::vector<std::vector<double>> images;  // empty, or one per sentence
};

struct PretrainRequest {
  embed::Setting setting = embed::Setting::kTrain;
  Variant variant = Variant::kText;
  AeDims dims;  // vocab is filled in per setting
  double init_sd = 0.0;
  AeTrainConfig train;
  std::optional<std::size_t> stage2_epochs;  // gen-expanded only; default train.epochs
  const text::Vocabulary* train_vocab = nullptr;
  const std::set<std::string>* novel_words = nullptr;    // oracle
  const embed::EmbeddingMatrix* external = nullptr;      // gen, gen-expanded
  const text::NounTagger* tagger = nullptr;              // gen anchors
  double tau = 0.4;
};

struct PretrainResult {
  AutoencoderParams ae;
  text::Vocabulary vocab;
  std::vector<double> loss_stage1;
  std::vector<double> loss_stage2;  // gen-expanded only
  std::optional<embed::Expansion> expansion;
  std::optional<embed::AlignmentResult> alignment;
  Matrix seeded_embed;  // gen-expanded: embedding table right after seeding
};

// train/oracle/gen: one AE run on the setting's vocabulary. gen-expanded:
// stage 1 on the train vocabulary, align with the external table, seed the
// neighbour rows through M, then retrain everything on the grown vocabulary.
PretrainResult pretrain_schedule(const PretrainRequest& req, const AeCorpus& corpus);

}  // namespace nvqa::seqae

#endif  // NVQA_SEQAE_HPP_
