#include "nvqa/vqa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "nvqa/batch.hpp"
#include "nvqa/error.hpp"
#include "nvqa/evalkit.hpp"
#include "nvqa/matrix_io.hpp"

namespace nvqa::vqa {

using ad::Tape;
using ad::Var;

AnswerVocabulary::AnswerVocabulary(std::vector<std::string> answers) : answers_(std::move(answers)) {
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    if (!index_.emplace(answers_[i], i).second) throw DataError("duplicate answer '" + answers_[i] + "'");
  }
}

AnswerVocabulary AnswerVocabulary::build(const Dataset& train, std::size_t max_size) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& ex : train)
    for (const auto& a : ex.answers) ++counts[evalkit::normalize_answer(a)];
  std::vector<std::pair<std::string, std::uint64_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (sorted.size() > max_size) sorted.resize(max_size);
  std::vector<std::string> answers;
  for (auto& [a, n] : sorted) answers.push_back(a);
  return AnswerVocabulary(std::move(answers));
}

std::optional<std::size_t> AnswerVocabulary::index(const std::string& answer) const {
  auto it = index_.find(answer);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void AnswerVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw LoadError("cannot write " + path.string());
  for (const auto& a : answers_) os << a << '\n';
}

AnswerVocabulary AnswerVocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  std::vector<std::string> answers;
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) answers.push_back(line);
  return AnswerVocabulary(std::move(answers));
}

std::string to_string(Arch a) { return a == Arch::kArch1 ? "1" : "2"; }

Arch arch_from_int(int a) {
  if (a == 1) return Arch::kArch1;
  if (a == 2) return Arch::kArch2;
  throw ConfigError("arch must be 1 or 2, got " + std::to_string(a));
}

ParamList VqaModel::params() {
  ParamList out{{"embed", &embed}};
  lstm.append_to(out, "lstm");
  if (arch == Arch::kArch1) {
    out.push_back({"w_q", &w_q});
    out.push_back({"w_i", &w_i});
    out.push_back({"w_qi", &w_qi});
  } else {
    out.push_back({"w_e", &w_e});
    out.push_back({"w_a", &w_a});
  }
  return out;
}

namespace {

Matrix random_normal(std::size_t r, std::size_t c, Rng& rng, double sd) {
  if (sd <= 0.0) sd = 1.0 / std::sqrt(static_cast<double>(c));
  Matrix m(r, c);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.normal(0.0, sd);
  return m;
}

}  // namespace

VqaModel init_model(Arch arch, const VqaDims& dims, const text::Vocabulary& vocab, Rng& rng, double sd) {
  if (dims.vocab != vocab.size())
    throw DimensionError("init_model: dims.vocab " + std::to_string(dims.vocab) + " but vocabulary has " +
                         std::to_string(vocab.size()));
  if (dims.d_e == 0 || dims.d_h == 0 || dims.d_i == 0 || dims.answers == 0 || (arch == Arch::kArch1 && dims.d == 0))
    throw ContractError("init_model: every dimension must be positive");
  VqaModel m;
  m.arch = arch;
  m.dims = dims;
  m.vocab_hash = vocab.hash();
  m.setting = vocab.provenance();
  m.embed = random_normal(dims.vocab, dims.d_e, rng, sd > 0.0 ? sd : 1.0);
  m.lstm = seqae::LstmParams::init(dims.d_e, dims.d_h, rng, sd);
  if (arch == Arch::kArch1) {
    m.w_q = random_normal(dims.d, dims.d_h, rng, sd);
    m.w_i = random_normal(dims.d, dims.d_i, rng, sd);
    m.w_qi = random_normal(dims.answers, dims.d, rng, sd);
  } else {
    m.w_e = random_normal(dims.d_e, dims.d_i, rng, sd);
    m.w_a = random_normal(dims.answers, dims.d_h, rng, sd);
  }
  return m;
}

VqaVars vqa_vars(const VqaModel& m, const std::vector<Var>& leaves) {
  const std::size_t want = m.arch == Arch::kArch1 ? 16 : 15;
  if (leaves.size() != want) throw ContractError("vqa_vars: leaf count does not match the architecture");
  VqaVars v;
  v.embed = leaves[0];
  v.lstm = seqae::lstm_vars(leaves, 1);
  if (m.arch == Arch::kArch1) {
    v.w_q = leaves[13];
    v.w_i = leaves[14];
    v.w_qi = leaves[15];
  } else {
    v.w_e = leaves[13];
    v.w_a = leaves[14];
  }
  return v;
}

Var forward(Tape& t, const VqaModel& m, const VqaVars& v, const std::vector<std::size_t>& ids,
            const std::vector<double>& x_i) {
  if (x_i.size() != m.dims.d_i)
    throw DimensionError("image feature has " + std::to_string(x_i.size()) + " entries, model expects " +
                         std::to_string(m.dims.d_i));
  for (auto id : ids)
    if (id >= m.dims.vocab) throw ContractError("token id " + std::to_string(id) + " outside the vocabulary");
  const Var x = t.constant(Matrix::column(x_i));
  seqae::LstmState st = seqae::lstm_zero_state(t, m.dims.d_h);
  if (m.arch == Arch::kArch1) {
    st = seqae::lstm_step(t, v.lstm, t.row(v.embed, text::kBosId), st);
    for (auto id : ids) st = seqae::lstm_step(t, v.lstm, t.row(v.embed, id), st);
    st = seqae::lstm_step(t, v.lstm, t.row(v.embed, text::kEosId), st);
    const Var fused = t.mul(t.tanh(t.matmul(v.w_q, st.h)), t.tanh(t.matmul(v.w_i, x)));
    return t.matmul(v.w_qi, fused);
  }
  st = seqae::lstm_step(t, v.lstm, t.matmul(v.w_e, x), st);
  for (auto id : ids) st = seqae::lstm_step(t, v.lstm, t.row(v.embed, id), st);
  return t.matmul(v.w_a, st.h);
}

namespace {

std::vector<Var> bind(Tape& t, const VqaModel& m) {
  std::vector<Var> leaves;
  // params() hands out mutable pointers; leaves only read through them.
  for (const auto& p : const_cast<VqaModel&>(m).params()) leaves.push_back(t.leaf(*p.value));
  return leaves;
}

}  // namespace

Matrix forward(const VqaModel& m, const std::vector<std::size_t>& ids, const std::vector<double>& x_i) {
  Tape t;
  const VqaVars v = vqa_vars(m, bind(t, m));
  return t.value(forward(t, m, v, ids, x_i));
}

Var vqa_loss(Tape& t, const VqaModel& m, const VqaVars& v, const std::vector<std::size_t>& ids,
             const std::vector<double>& x_i, std::size_t target) {
  return t.softmax_cross_entropy(forward(t, m, v, ids, x_i), target);
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw LoadError("encoder bundle does not fit the model: " + what);
}

}  // namespace

void init_from_ae(VqaModel& m, const seqae::EncoderBundle& b) {
  require(b.dims.vocab == m.dims.vocab, "embed has " + std::to_string(b.dims.vocab) + " rows, model vocabulary " +
                                            std::to_string(m.dims.vocab));
  require(b.dims.d_e == m.dims.d_e, "embed width " + std::to_string(b.dims.d_e) + " vs " + std::to_string(m.dims.d_e));
  require(b.dims.d_h == m.dims.d_h,
          "enc hidden size " + std::to_string(b.dims.d_h) + " vs " + std::to_string(m.dims.d_h));
  if (b.setting != m.setting) {
    throw ProvenanceError("encoder bundle was trained with the " + text::to_string(b.setting) +
                          " vocabulary, model uses " + text::to_string(m.setting));
  }
  require(b.vocab_hash == m.vocab_hash, "vocabulary hash differs");
  m.embed = b.embed;
  m.lstm = b.enc;
  if (m.arch == Arch::kArch2 && b.variant == seqae::Variant::kMultimodalA2) {
    require(b.w_img.same_shape(m.w_e), "w_img is " + b.w_img.shape_string() + ", w_e is " + m.w_e.shape_string());
    m.w_e = b.w_img;
  }
}

seqae::EncoderBundle export_question_encoder(const VqaModel& m) {
  seqae::EncoderBundle b;
  b.variant = m.arch == Arch::kArch2 ? seqae::Variant::kMultimodalA2 : seqae::Variant::kText;
  b.dims = {.vocab = m.dims.vocab, .d_e = m.dims.d_e, .d_h = m.dims.d_h, .d_i = m.arch == Arch::kArch2 ? m.dims.d_i : 0};
  b.vocab_hash = m.vocab_hash;
  b.setting = m.setting;
  b.embed = m.embed;
  b.enc = m.lstm;
  if (m.arch == Arch::kArch2) b.w_img = m.w_e;
  return b;
}

std::string to_string(Protocol p) { return p == Protocol::kOpenEnded ? "OEQ" : "MCQ"; }

std::size_t argmax(const std::vector<double>& scores) {
  if (scores.empty()) throw ContractError("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::string pick_answer(const std::vector<double>& scores, const AnswerVocabulary& answers,
                        const std::vector<std::string>& choices, Protocol protocol) {
  if (scores.size() != answers.size()) throw DimensionError("pick_answer: score count differs from answer count");
  if (protocol == Protocol::kOpenEnded) return answers.answer(argmax(scores));
  if (choices.empty()) throw DataError("multiple-choice prediction without choices");
  std::optional<std::size_t> best;
  for (const auto& c : choices) {
    const auto idx = answers.index(evalkit::normalize_answer(c));
    if (!idx) continue;
    if (!best || scores[*idx] > scores[*best] || (scores[*idx] == scores[*best] && *idx < *best)) best = idx;
  }
  return best ? answers.answer(*best) : choices.front();
}

std::vector<double> softmax(const Matrix& logits) {
  std::vector<double> p(logits.values().begin(), logits.values().end());
  const double mx = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& x : p) total += (x = std::exp(x - mx));
  for (auto& x : p) x /= total;
  return p;
}

std::vector<std::size_t> encode_question(const std::string& question, const text::Vocabulary& vocab) {
  auto ids = vocab.encode_text(question).ids;
  if (ids.size() > seqae::kMaxSentenceTokens) ids.resize(seqae::kMaxSentenceTokens);
  return ids;
}

Matrix Predictor::logits(const VqaExample& ex) const {
  return forward(*model, encode_question(ex.question, *vocab), ex.image_feature);
}

std::string Predictor::predict(const VqaExample& ex, Protocol protocol) const {
  const Matrix z = logits(ex);
  return pick_answer({z.values().begin(), z.values().end()}, *answers, ex.choices, protocol);
}

std::string LateFusion::predict(const VqaExample& ex, Protocol protocol) const {
  if (!(*a.answers == *b.answers)) throw ContractError("late fusion needs one shared answer vocabulary");
  if (!features_b || ex.image_id >= features_b->rows())
    throw DataError("late fusion: no second-family feature for image " + std::to_string(ex.image_id));
  VqaExample ex_b = ex;
  const auto row = features_b->row(ex.image_id);
  ex_b.image_feature.assign(row.begin(), row.end());
  const auto pa = softmax(a.logits(ex));
  const auto pb = softmax(b.logits(ex_b));
  std::vector<double> avg(pa.size());
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = 0.5 * (pa[i] + pb[i]);
  return pick_answer(avg, *a.answers, ex.choices, protocol);
}

VqaTrainResult train_vqa(VqaModel& m, const Dataset& train, const Dataset& val, const text::Vocabulary& vocab,
                         const AnswerVocabulary& answers, const VqaTrainConfig& cfg) {
  if (vocab.hash() != m.vocab_hash) throw ContractError("train_vqa: vocabulary differs from the model's");
  if (answers.size() != m.dims.answers) throw DimensionError("train_vqa: answer vocabulary size differs from model");
  if (cfg.batch_size == 0) throw ConfigError("train_vqa: batch_size must be positive");

  VqaTrainResult res;
  std::vector<EncodedExample> data;
  for (const auto& ex : train) {
    const auto target = answers.index(evalkit::normalize_answer(mode_answer(ex.answers)));
    if (!target) {
      ++res.skipped;
      continue;
    }
    data.push_back({encode_question(ex.question, vocab), &ex.image_feature, *target});
  }
  if (data.empty()) throw DataError("train_vqa: no training example has an in-vocabulary answer");

  const ParamList params = m.params();
  Adam opt(cfg.adam);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const ExampleLoss loss = [&](Tape& t, const std::vector<Var>& leaves, std::size_t i) {
    return vqa_loss(t, m, vqa_vars(m, leaves), data[i].ids, *data[i].feature, data[i].target);
  };
  const Predictor pred{&m, &vocab, &answers};
  auto val_accuracy = [&] {
    double total = 0.0;
    for (const auto& ex : val)
      total += evalkit::question_accuracy(pred.predict(ex, Protocol::kOpenEnded), ex.answers);
    return total / static_cast<double>(val.size());
  };

  std::vector<Matrix> best = snapshot(params);
  double best_acc = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + std::min(order.size(), start + cfg.batch_size));
      BatchGradient bg = batch_gradient(params, batch, loss, cfg.parallel);
      scale_grads(bg.grads, 1.0 / static_cast<double>(batch.size()));
      clip_global_norm(bg.grads, cfg.clip_norm);
      opt.step(params, bg.grads);
      epoch_loss += bg.loss_sum;
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    if (val.empty()) {
      res.best_epoch = epoch;
      continue;
    }
    const double acc = val_accuracy();
    res.val_accuracy.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      best = snapshot(params);
      res.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  if (!val.empty()) restore(params, best);
  return res;
}

namespace {

nlohmann::json dims_json(const VqaDims& d) {
  return {{"vocab", d.vocab}, {"d_e", d.d_e}, {"d_h", d.d_h}, {"d_i", d.d_i}, {"d", d.d}, {"answers", d.answers}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, Checkpoint& c) {
  std::filesystem::create_directories(dir);
  const nlohmann::json manifest = {{"kind", "vqa-model"},
                                   {"arch", static_cast<int>(c.model.arch)},
                                   {"dims", dims_json(c.model.dims)},
                                   {"vocab_hash", c.model.vocab_hash},
                                   {"setting", text::to_string(c.model.setting)}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw LoadError("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
  os.close();
  save_named(dir, c.model.params());
  c.vocab.save(dir / "vocab.tsv");
  c.answers.save(dir / "answers.txt");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw LoadError("no manifest.json in " + dir.string());
  Checkpoint c;
  VqaDims dims;
  Arch arch;
  text::Provenance setting;
  std::uint64_t hash = 0;
  try {
    const auto j = nlohmann::json::parse(is);
    if (j.at("kind") != "vqa-model") throw LoadError(dir.string() + " is not a VQA checkpoint");
    arch = arch_from_int(j.at("arch").get<int>());
    const auto& d = j.at("dims");
    dims = {d.at("vocab").get<std::size_t>(), d.at("d_e").get<std::size_t>(), d.at("d_h").get<std::size_t>(),
            d.at("d_i").get<std::size_t>(),   d.at("d").get<std::size_t>(),   d.at("answers").get<std::size_t>()};
    hash = j.at("vocab_hash").get<std::uint64_t>();
    setting = text::provenance_from_string(j.at("setting").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(dir.string() + ": bad manifest: " + e.what());
  }
  c.vocab = text::Vocabulary::load(dir / "vocab.tsv", setting);
  if (c.vocab.hash() != hash) throw LoadError(dir.string() + ": vocab.tsv does not match the manifest hash");
  c.answers = AnswerVocabulary::load(dir / "answers.txt");
  Rng unused(0);
  c.model = init_model(arch, dims, c.vocab, unused, 1.0);
  load_named(dir, c.model.params());
  return c;
}

}  // namespace nvqa::vqa
