#include "nvqa/dataset.hpp"

#include <fstream>
#include <map>

#include "json.hpp"
#include "nvqa/error.hpp"

namespace nvqa {

using nlohmann::json;

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw LoadError("cannot write " + path.string());
  for (const auto& ex : data) {
    json j = {{"qid", ex.qid},
              {"image_id", ex.image_id},
              {"question", ex.question},
              {"question_type", ex.question_type},
              {"answer_type", ex.answer_type},
              {"answers", ex.answers},
              {"choices", ex.choices}};
    os << j.dump() << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      VqaExample ex;
      ex.qid = j.at("qid").get<std::string>();
      ex.image_id = j.at("image_id").get<std::size_t>();
      ex.question = j.at("question").get<std::string>();
      ex.question_type = j.at("question_type").get<std::string>();
      ex.answer_type = j.at("answer_type").get<std::string>();
      ex.answers = j.at("answers").get<std::vector<std::string>>();
      if (j.contains("choices")) ex.choices = j.at("choices").get<std::vector<std::string>>();
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void attach_features(Dataset& data, const Matrix& features) {
  for (auto& ex : data) {
    if (ex.image_id >= features.rows()) {
      throw DataError("question " + ex.qid + " refers to image " + std::to_string(ex.image_id) +
                      " but the feature table has " + std::to_string(features.rows()) + " rows");
    }
    auto r = features.row(ex.image_id);
    ex.image_feature.assign(r.begin(), r.end());
  }
}

Matrix concat_features(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_features: " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

std::string mode_answer(const std::vector<std::string>& answers) {
  if (answers.empty()) throw DataError("mode_answer: no answers");
  std::map<std::string, int> counts;
  for (const auto& a : answers) ++counts[a];
  const std::string* best = nullptr;
  int best_n = 0;
  for (const auto& [a, n] : counts) {  // sorted, so the first maximum wins ties
    if (n > best_n) {
      best = &a;
      best_n = n;
    }
  }
  return *best;
}

}  // namespace nvqa
