#include "nvqa/seqae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "nvqa/batch.hpp"
#include "nvqa/error.hpp"
#include "nvqa/matrix_io.hpp"

namespace nvqa::seqae {

using ad::Tape;
using ad::Var;

namespace {

constexpr const char* kGateNames[4] = {"i", "f", "o", "g"};

// sd <= 0 selects N(0, 1/fan_in), fan_in = cols.
Matrix random_normal(std::size_t r, std::size_t c, Rng& rng, double sd) {
  if (sd <= 0.0) sd = 1.0 / std::sqrt(static_cast<double>(c));
  Matrix m(r, c);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.normal(0.0, sd);
  return m;
}

void check_ids(const AeSample& s, std::size_t vocab) {
  for (auto id : s.ids)
    if (id >= vocab) throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " +
                                         std::to_string(vocab));
}

void check_image(const AutoencoderParams& ae, const AeSample& s) {
  if (ae.variant == Variant::kText) {
    if (!s.image.empty()) throw ContractError("text autoencoder given an image feature");
    return;
  }
  if (s.image.empty()) throw ContractError(to_string(ae.variant) + " autoencoder needs an image feature");
  if (s.image.size() != ae.dims.d_i) {
    throw DimensionError("image feature has " + std::to_string(s.image.size()) + " entries, expected " +
                         std::to_string(ae.dims.d_i));
  }
}

}  // namespace

LstmParams LstmParams::init(std::size_t d_in, std::size_t d_h, Rng& rng, double sd) {
  LstmParams p;
  p.d_in = d_in;
  p.d_h = d_h;
  for (int k = 0; k < 4; ++k) {
    p.w[k] = random_normal(d_h, d_in, rng, sd);
    p.u[k] = random_normal(d_h, d_h, rng, sd);
    p.b[k] = Matrix(d_h, 1, k == kGateF ? 1.0 : 0.0);
  }
  return p;
}

void LstmParams::append_to(ParamList& out, const std::string& prefix) {
  for (int k = 0; k < 4; ++k) out.push_back({prefix + ".W_" + kGateNames[k], &w[k]});
  for (int k = 0; k < 4; ++k) out.push_back({prefix + ".U_" + kGateNames[k], &u[k]});
  for (int k = 0; k < 4; ++k) out.push_back({prefix + ".b_" + kGateNames[k], &b[k]});
}

LstmVars lstm_vars(const std::vector<Var>& leaves, std::size_t offset) {
  if (offset + 12 > leaves.size()) throw ContractError("lstm_vars: too few leaves");
  LstmVars v;
  for (int k = 0; k < 4; ++k) {
    v.w[k] = leaves[offset + k];
    v.u[k] = leaves[offset + 4 + k];
    v.b[k] = leaves[offset + 8 + k];
  }
  return v;
}

LstmState lstm_step(Tape& t, const LstmVars& p, Var x, LstmState s) {
  auto pre = [&](int k) { return t.add(t.add(t.matmul(p.w[k], x), t.matmul(p.u[k], s.h)), p.b[k]); };
  const Var i = t.sigmoid(pre(kGateI));
  const Var f = t.sigmoid(pre(kGateF));
  const Var o = t.sigmoid(pre(kGateO));
  const Var g = t.tanh(pre(kGateG));
  const Var c = t.add(t.mul(f, s.c), t.mul(i, g));
  return {t.mul(o, t.tanh(c)), c};
}

LstmState lstm_zero_state(Tape& t, std::size_t d_h) {
  return {t.constant(Matrix(d_h, 1)), t.constant(Matrix(d_h, 1))};
}

std::pair<Matrix, Matrix> lstm_step(const LstmParams& p, const Matrix& x, const Matrix& h, const Matrix& c) {
  Tape t;
  LstmVars v;
  for (int k = 0; k < 4; ++k) {
    v.w[k] = t.leaf(p.w[k]);
    v.u[k] = t.leaf(p.u[k]);
    v.b[k] = t.leaf(p.b[k]);
  }
  const LstmState s = lstm_step(t, v, t.leaf(x), {t.leaf(h), t.leaf(c)});
  return {t.value(s.h), t.value(s.c)};
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kText: return "text";
    case Variant::kMultimodalA1: return "multimodal-a1";
    case Variant::kMultimodalA2: return "multimodal-a2";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  if (s == "text") return Variant::kText;
  if (s == "multimodal-a1") return Variant::kMultimodalA1;
  if (s == "multimodal-a2") return Variant::kMultimodalA2;
  throw ConfigError("unknown autoencoder variant '" + std::string(s) + "'");
}

ParamList AutoencoderParams::params() {
  ParamList out{{"embed", &embed}};
  enc.append_to(out, "enc");
  dec.append_to(out, "dec");
  out.push_back({"out_w", &out_w});
  out.push_back({"out_b", &out_b});
  if (variant == Variant::kMultimodalA1) {
    out.push_back({"wq_f", &wq_f});
    out.push_back({"wi_f", &wi_f});
  } else if (variant == Variant::kMultimodalA2) {
    out.push_back({"w_img", &w_img});
  }
  return out;
}

AutoencoderParams init_autoencoder(Variant variant, const AeDims& dims, Rng& rng, double sd) {
  if (dims.vocab <= text::kEosId || dims.d_e == 0 || dims.d_h == 0)
    throw ContractError("init_autoencoder: vocabulary and dims must be positive");
  if (variant != Variant::kText && dims.d_i == 0)
    throw ContractError("init_autoencoder: multimodal variant needs d_i > 0");
  AutoencoderParams ae;
  ae.variant = variant;
  ae.dims = dims;
  if (variant == Variant::kText) ae.dims.d_i = 0;
  ae.embed = random_normal(dims.vocab, dims.d_e, rng, sd > 0.0 ? sd : 1.0);
  ae.enc = LstmParams::init(dims.d_e, dims.d_h, rng, sd);
  ae.dec = LstmParams::init(dims.d_e, dims.d_h, rng, sd);
  ae.out_w = random_normal(dims.vocab, dims.d_h, rng, sd);
  ae.out_b = Matrix(dims.vocab, 1);
  if (variant == Variant::kMultimodalA1) {
    ae.wq_f = random_normal(dims.d_h, dims.d_h, rng, sd);
    ae.wi_f = random_normal(dims.d_h, dims.d_i, rng, sd);
  } else if (variant == Variant::kMultimodalA2) {
    ae.w_img = random_normal(dims.d_e, dims.d_i, rng, sd);
  }
  return ae;
}

AeSample make_sample(std::string_view sentence, const text::Vocabulary& vocab, std::vector<double> image) {
  AeSample s;
  s.ids = vocab.encode_text(sentence).ids;
  if (s.ids.size() > kMaxSentenceTokens) s.ids.resize(kMaxSentenceTokens);
  s.image = std::move(image);
  return s;
}

AeVars ae_vars(const AutoencoderParams& ae, const std::vector<Var>& leaves) {
  const std::size_t extra = ae.variant == Variant::kMultimodalA1 ? 2 : ae.variant == Variant::kMultimodalA2 ? 1 : 0;
  if (leaves.size() != 27 + extra) throw ContractError("ae_vars: leaf count does not match the variant");
  AeVars v;
  v.embed = leaves[0];
  v.enc = lstm_vars(leaves, 1);
  v.dec = lstm_vars(leaves, 13);
  v.out_w = leaves[25];
  v.out_b = leaves[26];
  if (ae.variant == Variant::kMultimodalA1) {
    v.wq_f = leaves[27];
    v.wi_f = leaves[28];
  } else if (ae.variant == Variant::kMultimodalA2) {
    v.w_img = leaves[27];
  }
  return v;
}

EncoderOut encode(Tape& t, const AutoencoderParams& ae, const AeVars& v, const AeSample& s) {
  check_ids(s, ae.dims.vocab);
  check_image(ae, s);
  LstmState st = lstm_zero_state(t, ae.dims.d_h);
  if (ae.variant == Variant::kMultimodalA2) {
    const Var x = t.constant(Matrix::column(s.image));
    st = lstm_step(t, v.enc, t.matmul(v.w_img, x), st);
    for (auto id : s.ids) st = lstm_step(t, v.enc, t.row(v.embed, id), st);
    return {st.h, std::nullopt};
  }
  st = lstm_step(t, v.enc, t.row(v.embed, text::kBosId), st);
  for (auto id : s.ids) st = lstm_step(t, v.enc, t.row(v.embed, id), st);
  st = lstm_step(t, v.enc, t.row(v.embed, text::kEosId), st);
  EncoderOut out{st.h, std::nullopt};
  if (ae.variant == Variant::kMultimodalA1) {
    const Var x = t.constant(Matrix::column(s.image));
    out.fusion = t.mul(t.tanh(t.matmul(v.wq_f, st.h)), t.tanh(t.matmul(v.wi_f, x)));
  }
  return out;
}

Var decoder_init(Tape& t, const EncoderOut& e) { return e.fusion ? t.add(e.h_enc, *e.fusion) : e.h_enc; }

Var ae_loss(Tape& t, const AutoencoderParams& ae, const AeVars& v, const AeSample& s, std::size_t* tokens) {
  const EncoderOut e = encode(t, ae, v, s);
  LstmState st{decoder_init(t, e), t.constant(Matrix(ae.dims.d_h, 1))};
  Var total{};
  std::size_t prev = text::kBosId;
  for (std::size_t k = 0; k <= s.ids.size(); ++k) {
    const std::size_t target = k < s.ids.size() ? s.ids[k] : text::kEosId;
    st = lstm_step(t, v.dec, t.row(v.embed, prev), st);
    const Var logits = t.add(t.matmul(v.out_w, st.h), v.out_b);
    const Var xent = t.softmax_cross_entropy(logits, target);
    total = k == 0 ? xent : t.add(total, xent);
    prev = target;
  }
  if (tokens) *tokens = s.ids.size() + 1;
  return total;
}

namespace {

std::vector<Var> bind(Tape& t, const AutoencoderParams& ae) {
  std::vector<Var> leaves;
  // params() hands out mutable pointers; leaves only read through them.
  for (const auto& p : const_cast<AutoencoderParams&>(ae).params()) leaves.push_back(t.leaf(*p.value));
  return leaves;
}

std::size_t argmax(const Matrix& z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[best]) best = i;
  return best;
}

}  // namespace

Encoded encode(const AutoencoderParams& ae, const AeSample& s) {
  Tape t;
  const AeVars v = ae_vars(ae, bind(t, ae));
  const EncoderOut e = encode(t, ae, v, s);
  Encoded out;
  out.h_enc = t.value(e.h_enc);
  if (e.fusion) out.fusion = t.value(*e.fusion);
  out.h_dec0 = t.value(decoder_init(t, e));
  return out;
}

std::vector<std::size_t> greedy_decode(const AutoencoderParams& ae, const AeSample& s) {
  Tape t;
  const AeVars v = ae_vars(ae, bind(t, ae));
  const EncoderOut e = encode(t, ae, v, s);
  LstmState st{decoder_init(t, e), t.constant(Matrix(ae.dims.d_h, 1))};
  std::vector<std::size_t> out;
  std::size_t prev = text::kBosId;
  for (std::size_t k = 0; k <= s.ids.size(); ++k) {
    st = lstm_step(t, v.dec, t.row(v.embed, prev), st);
    prev = argmax(t.value(t.add(t.matmul(v.out_w, st.h), v.out_b)));
    out.push_back(prev);
  }
  return out;
}

double reconstruction_accuracy(const AutoencoderParams& ae, const std::vector<AeSample>& samples) {
  std::size_t hit = 0, total = 0;
  for (const auto& s : samples) {
    const auto got = greedy_decode(ae, s);
    for (std::size_t k = 0; k < got.size(); ++k) {
      const std::size_t want = k < s.ids.size() ? s.ids[k] : text::kEosId;
      hit += got[k] == want;
      ++total;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

double mean_token_loss(const AutoencoderParams& ae, const std::vector<AeSample>& data) {
  double loss = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : data) {
    Tape t;
    const AeVars v = ae_vars(ae, bind(t, ae));
    std::size_t n = 0;
    loss += t.scalar(ae_loss(t, ae, v, s, &n));
    tokens += n;
  }
  return tokens ? loss / static_cast<double>(tokens) : 0.0;
}

AeTrainResult train_ae(AutoencoderParams& ae, const std::vector<AeSample>& data, const AeTrainConfig& cfg) {
  if (data.empty()) throw DataError("train_ae: empty corpus");
  if (cfg.batch_size == 0) throw ConfigError("train_ae: batch_size must be positive");
  for (const auto& s : data) {
    check_ids(s, ae.dims.vocab);
    check_image(ae, s);
  }
  const ParamList params = ae.params();
  Adam opt(cfg.adam);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const ExampleLoss loss = [&](Tape& t, const std::vector<Var>& leaves, std::size_t ex) {
    return ae_loss(t, ae, ae_vars(ae, leaves), data[ex]);
  };

  AeTrainResult res;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + std::min(order.size(), start + cfg.batch_size));
      std::size_t tokens = 0;
      for (auto ex : batch) tokens += data[ex].ids.size() + 1;
      BatchGradient bg = batch_gradient(params, batch, loss, cfg.parallel);
      scale_grads(bg.grads, 1.0 / static_cast<double>(tokens));
      clip_global_norm(bg.grads, cfg.clip_norm);
      opt.step(params, bg.grads);
      epoch_loss += bg.loss_sum;
      epoch_tokens += tokens;
    }
    res.loss_curve.push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  return res;
}

ParamList EncoderBundle::params() {
  ParamList out{{"embed", &embed}};
  enc.append_to(out, "enc");
  if (variant == Variant::kMultimodalA2) out.push_back({"w_img", &w_img});
  return out;
}

EncoderBundle export_encoder(const AutoencoderParams& ae, const text::Vocabulary& vocab) {
  if (vocab.size() != ae.dims.vocab) {
    throw DimensionError("export_encoder: vocabulary has " + std::to_string(vocab.size()) +
                         " tokens, embedding table has " + std::to_string(ae.dims.vocab));
  }
  EncoderBundle b;
  b.variant = ae.variant;
  b.dims = ae.dims;
  b.vocab_hash = vocab.hash();
  b.setting = vocab.provenance();
  b.embed = ae.embed;
  b.enc = ae.enc;
  if (ae.variant == Variant::kMultimodalA2) b.w_img = ae.w_img;
  return b;
}

namespace {

nlohmann::json dims_json(const AeDims& d) {
  return {{"vocab", d.vocab}, {"d_e", d.d_e}, {"d_h", d.d_h}, {"d_i", d.d_i}};
}

AeDims dims_from_json(const nlohmann::json& j) {
  AeDims d;
  d.vocab = j.at("vocab").get<std::size_t>();
  d.d_e = j.at("d_e").get<std::size_t>();
  d.d_h = j.at("d_h").get<std::size_t>();
  d.d_i = j.at("d_i").get<std::size_t>();
  return d;
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& j) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "manifest.json");
  if (!os) throw LoadError("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << '\n';
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw LoadError("no manifest.json in " + dir.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError((dir / "manifest.json").string() + ": " + e.what());
  }
}

void shape_lstm(LstmParams& p, std::size_t d_in, std::size_t d_h) {
  p.d_in = d_in;
  p.d_h = d_h;
  for (int k = 0; k < 4; ++k) {
    p.w[k] = Matrix(d_h, d_in);
    p.u[k] = Matrix(d_h, d_h);
    p.b[k] = Matrix(d_h, 1);
  }
}

}  // namespace

void save_bundle(const std::filesystem::path& dir, const EncoderBundle& b_in) {
  EncoderBundle b = b_in;
  write_manifest(dir, {{"kind", "encoder-bundle"},
                       {"variant", to_string(b.variant)},
                       {"dims", dims_json(b.dims)},
                       {"vocab_hash", b.vocab_hash},
                       {"setting", text::to_string(b.setting)}});
  save_named(dir, b.params());
}

EncoderBundle load_bundle(const std::filesystem::path& dir) {
  const auto j = read_manifest(dir);
  EncoderBundle b;
  try {
    if (j.at("kind") != "encoder-bundle") throw LoadError(dir.string() + " is not an encoder bundle");
    b.variant = variant_from_string(j.at("variant").get<std::string>());
    b.dims = dims_from_json(j.at("dims"));
    b.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
    b.setting = text::provenance_from_string(j.at("setting").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(dir.string() + ": bad manifest: " + e.what());
  }
  b.embed = Matrix(b.dims.vocab, b.dims.d_e);
  shape_lstm(b.enc, b.dims.d_e, b.dims.d_h);
  if (b.variant == Variant::kMultimodalA2) b.w_img = Matrix(b.dims.d_e, b.dims.d_i);
  load_named(dir, b.params());
  return b;
}

void save_autoencoder(const std::filesystem::path& dir, AutoencoderParams& ae) {
  write_manifest(dir, {{"kind", "autoencoder"}, {"variant", to_string(ae.variant)}, {"dims", dims_json(ae.dims)}});
  save_named(dir, ae.params());
}

AutoencoderParams load_autoencoder(const std::filesystem::path& dir) {
  const auto j = read_manifest(dir);
  AutoencoderParams ae;
  try {
    if (j.at("kind") != "autoencoder") throw LoadError(dir.string() + " is not an autoencoder checkpoint");
    ae.variant = variant_from_string(j.at("variant").get<std::string>());
    ae.dims = dims_from_json(j.at("dims"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(dir.string() + ": bad manifest: " + e.what());
  }
  Rng unused(0);
  ae = init_autoencoder(ae.variant, ae.dims, unused, 0.0);
  load_named(dir, ae.params());
  return ae;
}

namespace {

std::vector<AeSample> samples_for(const AeCorpus& corpus, const text::Vocabulary& vocab) {
  if (!corpus.images.empty() && corpus.images.size() != corpus.sentences.size())
    throw DataError("autoencoder corpus: image count does not match sentence count");
  std::vector<AeSample> out;
  out.reserve(corpus.sentences.size());
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i)
    out.push_back(make_sample(corpus.sentences[i], vocab, corpus.images.empty() ? std::vector<double>{}
                                                                                : corpus.images[i]));
  return out;
}

}  // namespace

PretrainResult pretrain_schedule(const PretrainRequest& req, const AeCorpus& corpus) {
  if (!req.train_vocab) throw ContractError("pretrain_schedule: train vocabulary required");
  if ((req.setting == embed::Setting::kGen || req.setting == embed::Setting::kGenExpanded) && !req.external)
    throw ContractError("pretrain_schedule: " + embed::to_string(req.setting) + " needs external embeddings");

  embed::VocabRequest vr;
  vr.setting = req.setting;
  vr.novel_words = req.novel_words;
  vr.external = req.external;
  vr.tau = req.tau;
  vr.tagger = req.tagger;
  const text::Vocabulary final_vocab = embed::build_vocabulary_for_setting(*req.train_vocab, vr);

  PretrainResult res;
  Rng rng(mix_seed(req.train.seed, 0xae));
  AeDims dims = req.dims;

  if (req.setting != embed::Setting::kGenExpanded) {
    dims.vocab = final_vocab.size();
    res.ae = init_autoencoder(req.variant, dims, rng, req.init_sd);
    res.vocab = final_vocab;
    res.loss_stage1 = train_ae(res.ae, samples_for(corpus, final_vocab), req.train).loss_curve;
    return res;
  }

  // Stage 1 on the plain train vocabulary.
  const text::Vocabulary& v1 = *req.train_vocab;
  dims.vocab = v1.size();
  AutoencoderParams stage1 = init_autoencoder(req.variant, dims, rng, req.init_sd);
  res.loss_stage1 = train_ae(stage1, samples_for(corpus, v1), req.train).loss_curve;

  // Align external -> learned and seed the new rows.
  const embed::EmbeddingMatrix learned(v1, stage1.embed);
  res.alignment = embed::align(*req.external, learned);
  std::set<std::string> added;
  for (std::size_t i = v1.size(); i < final_vocab.size(); ++i) added.insert(final_vocab.token(i));
  res.expansion = embed::expand_vocab(*res.alignment, *req.external, added);

  // Grow every vocabulary-indexed tensor; new output rows start fresh.
  dims.vocab = final_vocab.size();
  AutoencoderParams ae = init_autoencoder(req.variant, dims, rng, req.init_sd);
  ParamList grown = ae.params();
  ParamList old = stage1.params();
  for (std::size_t p = 0; p < grown.size(); ++p) {
    Matrix& dst = *grown[p].value;
    const Matrix& src = *old[p].value;
    for (std::size_t r = 0; r < src.rows(); ++r)
      std::copy(src.row(r).begin(), src.row(r).end(), dst.row(r).begin());
  }
  for (std::size_t i = 0; i < res.expansion->words.size(); ++i) {
    const auto r = res.expansion->rows.row(i);
    std::copy(r.begin(), r.end(), ae.embed.row(final_vocab.id(res.expansion->words[i])).begin());
  }
  res.seeded_embed = ae.embed;

  AeTrainConfig cfg2 = req.train;
  cfg2.epochs = req.stage2_epochs.value_or(req.train.epochs);
  cfg2.seed = mix_seed(req.train.seed, 2);
  res.loss_stage2 = train_ae(ae, samples_for(corpus, final_vocab), cfg2).loss_curve;
  res.ae = std::move(ae);
  res.vocab = final_vocab;
  return res;
}

}  // namespace nvqa::seqae
