#include "nvqa/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nvqa/error.hpp"
#include "nvqa/kernels.hpp"
#include "nvqa/lstsq.hpp"

namespace nvqa::embed {

using text::Vocabulary;

EmbeddingMatrix::EmbeddingMatrix(Vocabulary vocab, Matrix vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (vectors_.rows() != vocab_.size()) {
    throw DimensionError("EmbeddingMatrix: " + std::to_string(vectors_.rows()) + " rows for a " +
                         std::to_string(vocab_.size()) + "-word vocabulary");
  }
  if (vectors_.cols() == 0) throw DimensionError("EmbeddingMatrix: dimension must be positive");
  if (!vectors_.all_finite()) throw NumericError("EmbeddingMatrix: non-finite entry");
}

std::optional<Matrix> EmbeddingMatrix::row(const std::string& word) const {
  if (!vocab_.contains(word)) return std::nullopt;
  auto r = vectors_.row(vocab_.id(word));
  return Matrix(1, r.size(), std::vector<double>(r.begin(), r.end()));
}

void EmbeddingMatrix::save_text(const std::filesystem::path& path) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (i <= text::kEosId) {
      auto r = vectors_.row(i);
      if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) continue;
    }
    rows.push_back(i);
  }
  std::ofstream os(path);
  if (!os) throw LoadError("cannot write " + path.string());
  os << rows.size() << ' ' << dim() << '\n' << std::setprecision(17);
  for (auto i : rows) {
    os << vocab_.token(i);
    for (double v : vectors_.row(i)) os << ' ' << v;
    os << '\n';
  }
}

EmbeddingMatrix EmbeddingMatrix::load_text(std::istream& is, text::Provenance provenance) {
  std::size_t count = 0, d = 0;
  std::string header;
  if (!std::getline(is, header)) throw LoadError("embedding file: missing header");
  {
    std::istringstream hs(header);
    if (!(hs >> count >> d) || d == 0) throw LoadError("embedding file: bad header '" + header + "'");
  }
  std::vector<std::string> words;
  std::vector<std::vector<double>> vecs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string w;
    ls >> w;
    std::vector<double> v(d);
    for (auto& x : v)
      if (!(ls >> x)) throw LoadError("embedding file: short vector for '" + w + "'");
    double extra;
    if (ls >> extra) throw LoadError("embedding file: too many values for '" + w + "'");
    words.push_back(std::move(w));
    vecs.push_back(std::move(v));
  }
  if (words.size() != count) {
    throw LoadError("embedding file: header says " + std::to_string(count) + " words, found " +
                    std::to_string(words.size()));
  }
  {
    std::set<std::string> seen;
    for (const auto& w : words)
      if (!seen.insert(w).second) throw LoadError("embedding file: duplicate word '" + w + "'");
  }
  // reserved tokens listed in the file land on their reserved rows
  Vocabulary vocab = Vocabulary(provenance).expanded(words, provenance);
  Matrix m(vocab.size(), d);
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto r = m.row(vocab.id(words[i]));
    std::copy(vecs[i].begin(), vecs[i].end(), r.begin());
  }
  if (!m.all_finite()) throw NumericError("embedding file: non-finite value");
  return EmbeddingMatrix(std::move(vocab), std::move(m));
}

EmbeddingMatrix EmbeddingMatrix::load_text(const std::filesystem::path& path,
                                           text::Provenance provenance) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  return load_text(is, provenance);
}

NeighborReport cosine_neighbors(const std::set<std::string>& anchors,
                                const EmbeddingMatrix& external, double tau, Parallelism mode) {
  if (!(tau > 0.0 && tau < 2.0)) throw ContractError("cosine_neighbors: tau must lie in (0, 2)");
  NeighborReport rep;
  const Matrix& table = external.vectors();
  const auto& vocab = external.vocab();

  std::vector<std::size_t> anchor_rows;
  for (const auto& a : anchors) {
    if (!vocab.contains(a)) {
      rep.missing_anchors.push_back(a);
      continue;
    }
    anchor_rows.push_back(vocab.id(a));
  }
  Matrix anchor_mat(anchor_rows.size(), table.cols());
  for (std::size_t i = 0; i < anchor_rows.size(); ++i) {
    auto src = table.row(anchor_rows[i]);
    std::copy(src.begin(), src.end(), anchor_mat.row(i).begin());
  }
  const Matrix cos = mode == Parallelism::kOpenMP ? kernels::cosine_rows_omp(table, anchor_mat)
                                                  : kernels::cosine_rows_serial(table, anchor_mat);

  std::vector<bool> zero_anchor(anchor_rows.size());
  for (std::size_t j = 0; j < anchor_rows.size(); ++j) {
    auto r = anchor_mat.row(j);
    zero_anchor[j] = std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; });
  }
  for (std::size_t w = text::kEosId + 1; w < table.rows(); ++w) {
    const std::string& word = vocab.token(w);
    if (anchors.count(word)) continue;
    auto r = table.row(w);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) {
      rep.zero_norm.push_back(word);
      continue;
    }
    double best = 2.0;
    for (std::size_t j = 0; j < anchor_rows.size(); ++j)
      if (!zero_anchor[j]) best = std::min(best, 1.0 - cos(w, j));
    if (best <= tau) rep.words.insert(word);
  }
  return rep;
}

AlignmentResult align(const EmbeddingMatrix& external, const EmbeddingMatrix& learned, double ridge) {
  AlignmentResult res;
  const auto& lv = learned.vocab();
  for (std::size_t i = text::kEosId + 1; i < lv.size(); ++i) {
    if (external.contains(lv.token(i))) res.shared_words.push_back(lv.token(i));
  }
  const std::size_t dw = external.dim();
  if (res.shared_words.size() < dw) {
    throw AlignmentError("align: " + std::to_string(res.shared_words.size()) +
                         " shared words but the external space has dimension " +
                         std::to_string(dw) + "; need at least that many");
  }
  Matrix aw(res.shared_words.size(), dw);
  Matrix av(res.shared_words.size(), learned.dim());
  for (std::size_t i = 0; i < res.shared_words.size(); ++i) {
    const auto& w = res.shared_words[i];
    auto src_w = external.vectors().row(external.vocab().id(w));
    std::copy(src_w.begin(), src_w.end(), aw.row(i).begin());
    auto src_v = learned.vectors().row(lv.id(w));
    std::copy(src_v.begin(), src_v.end(), av.row(i).begin());
  }
  res.ridge = ridge;
  try {
    res.m = least_squares(aw, av, ridge);
  } catch (const SingularityError&) {
    if (ridge != 0.0) throw;
    res.ridge = kRobustRidge;
    res.m = least_squares(aw, av, res.ridge);
  }
  res.residual_frobenius = kernels::sub(kernels::matmul(aw, res.m), av).frobenius_norm();
  return res;
}

Expansion expand_vocab(const AlignmentResult& alignment, const EmbeddingMatrix& external,
                       const std::set<std::string>& target_words) {
  if (alignment.m.rows() != external.dim()) {
    throw DimensionError("expand_vocab: M is " + alignment.m.shape_string() +
                         " but external vectors have dimension " + std::to_string(external.dim()));
  }
  Expansion out;
  for (const auto& w : target_words) {  // std::set iterates in sorted order
    if (external.contains(w)) out.words.push_back(w);
    else out.skipped.push_back(w);
  }
  Matrix src(out.words.size(), external.dim());
  for (std::size_t i = 0; i < out.words.size(); ++i) {
    auto r = external.vectors().row(external.vocab().id(out.words[i]));
    std::copy(r.begin(), r.end(), src.row(i).begin());
  }
  out.rows = out.words.empty() ? Matrix(0, alignment.m.cols()) : kernels::matmul(src, alignment.m);
  return out;
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::kTrain: return "train";
    case Setting::kOracle: return "oracle";
    case Setting::kGen: return "gen";
    case Setting::kGenExpanded: return "gen-expanded";
  }
  return "?";
}

Setting setting_from_string(std::string_view s) {
  if (s == "train") return Setting::kTrain;
  if (s == "oracle") return Setting::kOracle;
  if (s == "gen" || s == "general") return Setting::kGen;
  if (s == "gen-expanded" || s == "gen(exp)") return Setting::kGenExpanded;
  throw ConfigError("unknown vocabulary setting '" + std::string(s) + "'");
}

text::Provenance provenance_for(Setting s) {
  switch (s) {
    case Setting::kTrain: return text::Provenance::kTrain;
    case Setting::kOracle: return text::Provenance::kOracle;
    case Setting::kGen: return text::Provenance::kGeneral;
    case Setting::kGenExpanded: return text::Provenance::kGeneralExpanded;
  }
  return text::Provenance::kTrain;
}

Vocabulary build_vocabulary_for_setting(const Vocabulary& train_vocab, const VocabRequest& req,
                                        NeighborReport* report) {
  const auto tag = provenance_for(req.setting);
  switch (req.setting) {
    case Setting::kTrain:
      return train_vocab.retagged(tag);
    case Setting::kOracle: {
      if (!req.novel_words) throw ContractError("oracle setting needs the novel word list");
      std::vector<std::string> add(req.novel_words->begin(), req.novel_words->end());
      return train_vocab.expanded(add, tag);
    }
    case Setting::kGen:
    case Setting::kGenExpanded: {
      if (!req.external) throw ContractError("general setting needs external embeddings");
      if (req.anchors_nouns_only && !req.tagger)
        throw ContractError("general setting with noun anchors needs a noun tagger");
      std::set<std::string> anchors;
      for (std::size_t i = text::kEosId + 1; i < train_vocab.size(); ++i) {
        const auto& w = train_vocab.token(i);
        if (!req.anchors_nouns_only || !req.tagger->nouns({w}).empty()) anchors.insert(w);
      }
      NeighborReport rep = cosine_neighbors(anchors, *req.external, req.tau);
      std::vector<std::string> add;
      for (const auto& w : rep.words)
        if (!train_vocab.contains(w)) add.push_back(w);
      if (report) *report = std::move(rep);
      return train_vocab.expanded(add, tag);
    }
  }
  throw ContractError("unknown setting");
}

}  // namespace nvqa::embed
