#ifndef NVQA_EVALKIT_HPP_
#define NVQA_EVALKIT_HPP_

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvqa/dataset.hpp"
#include "nvqa/splitgen.hpp"
#include "nvqa/vqa.hpp"

namespace nvqa::evalkit {

struct NormalizeOptions {
  bool lowercase = true;
  bool trim = true;
};

std::string normalize_answer(std::string_view s, const NormalizeOptions& opts = {});

// min(#matching human answers / 3, 1). Throws DataError unless there are
// exactly kAnswersPerQuestion answers.
double question_accuracy(const std::string& prediction, const std::vector<std::string>& answers,
                         const NormalizeOptions& opts = {});

enum class Category { kOverall, kOthers, kNumbers, kYesNo, kNovel };
inline constexpr std::array<Category, 5> kCategories = {Category::kOverall, Category::kOthers, Category::kNumbers,
                                                        Category::kYesNo, Category::kNovel};
std::string to_string(Category c);
Category category_from_string(std::string_view s);

// answer_type label -> category; defaults cover "yes/no", "number", "other".
using CategoryMap = std::map<std::string, Category>;
const CategoryMap& default_category_map();

struct QuestionRecord {
  std::string qid;
  std::string question;
  std::string prediction;
  std::vector<std::string> answers;
  double accuracy = 0.0;
  std::string answer_type;
  bool novel = false;
};

struct CategoryScore {
  double accuracy = 0.0;  // mean per-question accuracy in [0, 1]
  std::size_t count = 0;
};

struct ProtocolResult {
  std::map<Category, CategoryScore> scores;  // every category present, count may be 0
  std::vector<QuestionRecord> records;       // in example order
};

struct EvalResult {
  std::map<vqa::Protocol, ProtocolResult> protocols;

  double accuracy(vqa::Protocol p, Category c) const;
  nlohmann::json to_json() const;  // scores only
  static EvalResult from_json(const nlohmann::json& j);
};

// Novel question: at least one novel noun and no known noun in the question.
bool is_novel_question(const std::string& question, const splitgen::SplitSpec& spec);

using PredictFn = std::function<std::string(const VqaExample&, vqa::Protocol)>;

struct EvalOptions {
  std::vector<vqa::Protocol> protocols = {vqa::Protocol::kOpenEnded, vqa::Protocol::kMultipleChoice};
  CategoryMap categories = default_category_map();
  NormalizeOptions normalize;
};

// Per-category means of question_accuracy. The novel/known tagging comes
// from `spec`; pass nullptr to leave the Novel category empty.
EvalResult evaluate(const PredictFn& predict, const Dataset& examples, const splitgen::SplitSpec* spec,
                    const EvalOptions& opts = {});
EvalResult evaluate(const vqa::Predictor& model, const Dataset& examples, const splitgen::SplitSpec* spec,
                    const EvalOptions& opts = {});

// JSON-lines {qid, question, prediction, ground_truth_answers, correct_weight}.
void write_prediction_dump(std::ostream& os, const ProtocolResult& r);

struct DropEntry {
  vqa::Protocol protocol;
  Category category;
  double known = 0.0;
  double novel = 0.0;
  double drop = 0.0;
  std::optional<double> relative;  // empty when known == 0
};

// drop = known - novel and relative = drop / known, per protocol and category.
std::vector<DropEntry> drop_report(const EvalResult& known, const EvalResult& novel);
// protocol,category,known,novel,drop,relative_drop ("undefined" when known is 0).
void write_drop_csv(std::ostream& os, const std::vector<DropEntry>& drops);

}  // namespace nvqa::evalkit

#endif  // NVQA_EVALKIT_HPP_
