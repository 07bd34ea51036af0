#ifndef NVQA_DATASET_HPP_
#define NVQA_DATASET_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "nvqa/matrix.hpp"

namespace nvqa {

inline constexpr std::size_t kAnswersPerQuestion = 10;

// One VQA question. `image_feature` is attached after loading, from the
// feature table of whichever family a model uses.
struct VqaExample {
  std::string qid;
  std::size_t image_id = 0;
  std::string question;
  std::string question_type;  // fine-grained template label
  std::string answer_type;    // "yes/no", "number" or "other"
  std::vector<std::string> answers;
  std::vector<std::string> choices;  // multiple-choice list, may be empty
  std::vector<double> image_feature;
};

using Dataset = std::vector<VqaExample>;

// JSON-lines; image_feature is not serialized.
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

// Copies row `image_id` of `features` into every example.
void attach_features(Dataset& data, const Matrix& features);

// Row-wise concatenation [a | b] of two feature tables (early fusion).
Matrix concat_features(const Matrix& a, const Matrix& b);

// Most common answer; ties go to the lexicographically smallest string.
std::string mode_answer(const std::vector<std::string>& answers);

}  // namespace nvqa

#endif  // NVQA_DATASET_HPP_
