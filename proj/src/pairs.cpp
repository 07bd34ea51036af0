#include "nvqa/pairs.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "nvqa/error.hpp"
#include "nvqa/matrix_io.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/text.hpp"

namespace nvqa::pairs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char* kExt = ".nvqm";
}

void save_image_index(const fs::path& dir, const ImageIndex& index) {
  fs::create_directories(dir);
  for (const auto& [word, rows] : index) {
    if (word.empty() || word.find('/') != std::string::npos || word[0] == '.')
      throw DataError("image index: unusable class name '" + word + "'");
    save_matrix(dir / (word + kExt), rows);
  }
}

ImageIndex load_image_index(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("image index directory not found: " + dir.string());
  ImageIndex index;
  std::size_t dim = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != kExt) continue;
    Matrix rows = load_matrix(entry.path());
    if (dim == 0) dim = rows.cols();
    if (rows.cols() != dim)
      throw LoadError("image index: " + entry.path().filename().string() + " has " + std::to_string(rows.cols()) +
                      " columns, expected " + std::to_string(dim));
    index.emplace(entry.path().stem().string(), std::move(rows));
  }
  return index;
}

SentenceIndex sentence_mine(const std::vector<std::string>& lines, const std::set<std::string>& objects) {
  SentenceIndex out;
  std::map<std::string, std::unordered_set<std::string>> seen;
  for (const auto& o : objects) out[o];
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = text::tokenize(lines[i]);
    std::set<std::string> hit;
    for (const auto& t : tokens)
      if (objects.count(t)) hit.insert(t);
    for (const auto& o : hit)
      if (seen[o].insert(lines[i]).second) out[o].push_back({i, lines[i]});
  }
  return out;
}

PairResult generate_pairs(const std::set<std::string>& objects, const ImageIndex& images,
                          const SentenceIndex& sentences, const PairOptions& opts) {
  if (opts.m == 0 || opts.n == 0) throw ContractError("generate_pairs: m and n must be at least 1");
  const std::vector<std::string> words(objects.begin(), objects.end());
  std::vector<std::vector<WeakPair>> per_object(words.size());
  std::vector<char> skipped(words.size(), 0);
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic) if (opts.parallel)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(words.size()); ++k) {
    try {
      const auto& w = words[k];
      const auto img = images.find(w);
      const auto sen = sentences.find(w);
      if (img == images.end() || img->second.rows() == 0 || sen == sentences.end() || sen->second.empty()) {
        skipped[k] = 1;
        continue;
      }
      Rng rng(mix_seed(opts.seed, hash_string(w)));
      const Matrix& rows = img->second;
      const auto& lines = sen->second;
      auto ri = rng.sample_without_replacement(rows.rows(), std::min(opts.m, rows.rows()));
      auto si = rng.sample_without_replacement(lines.size(), std::min(opts.n, lines.size()));
      std::sort(ri.begin(), ri.end());
      std::sort(si.begin(), si.end());
      auto& out = per_object[k];
      out.reserve(ri.size() * si.size());
      for (auto r : ri) {
        const auto feat = rows.row(r);
        for (auto s : si)
          out.push_back({w, r, lines[s].line, lines[s].text, std::vector<double>(feat.begin(), feat.end())});
      }
    } catch (...) {
#pragma omp critical(nvqa_pairs_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  PairResult res;
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (skipped[k]) res.skipped.push_back(words[k]);
    for (auto& p : per_object[k]) res.pairs.push_back(std::move(p));
  }
  return res;
}

void write_pairs(std::ostream& os, const std::vector<WeakPair>& pairs) {
  for (const auto& p : pairs) {
    os << json{{"word", p.word},
               {"image_row_ref", {{"word", p.word}, {"row", p.image_row}}},
               {"sentence", p.sentence},
               {"sentence_line", p.sentence_line}}
              .dump()
       << '\n';
  }
}

std::vector<WeakPair> read_pairs(std::istream& is, const ImageIndex& images) {
  std::vector<WeakPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      WeakPair p;
      p.word = j.at("word").get<std::string>();
      const auto& ref = j.at("image_row_ref");
      const auto cls = ref.at("word").get<std::string>();
      p.image_row = ref.at("row").get<std::size_t>();
      p.sentence = j.at("sentence").get<std::string>();
      p.sentence_line = j.at("sentence_line").get<std::size_t>();
      const auto it = images.find(cls);
      if (it == images.end() || p.image_row >= it->second.rows())
        throw DataError("pairs line " + std::to_string(lineno) + ": no image row " + std::to_string(p.image_row) +
                        " for '" + cls + "'");
      const auto feat = it->second.row(p.image_row);
      p.feature.assign(feat.begin(), feat.end());
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError("pairs line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nvqa::pairs
