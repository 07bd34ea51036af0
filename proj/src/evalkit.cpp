#include "nvqa/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <iomanip>

#include "nvqa/error.hpp"

namespace nvqa::evalkit {

using nlohmann::json;
using vqa::Protocol;

std::string normalize_answer(std::string_view s, const NormalizeOptions& opts) {
  std::string out(s);
  if (opts.trim) {
    const auto first = out.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    out = out.substr(first, out.find_last_not_of(" \t\r\n") - first + 1);
  }
  if (opts.lowercase)
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double question_accuracy(const std::string& prediction, const std::vector<std::string>& answers,
                         const NormalizeOptions& opts) {
  if (answers.size() != kAnswersPerQuestion) {
    throw DataError("question_accuracy needs " + std::to_string(kAnswersPerQuestion) + " answers, got " +
                    std::to_string(answers.size()));
  }
  const std::string p = normalize_answer(prediction, opts);
  int matches = 0;
  for (const auto& a : answers) matches += normalize_answer(a, opts) == p;
  return std::min(matches / 3.0, 1.0);
}

std::string to_string(Category c) {
  switch (c) {
    case Category::kOverall: return "Overall";
    case Category::kOthers: return "Others";
    case Category::kNumbers: return "Numbers";
    case Category::kYesNo: return "Yes/No";
    case Category::kNovel: return "Novel";
  }
  return "?";
}

Category category_from_string(std::string_view s) {
  for (auto c : kCategories)
    if (to_string(c) == s) return c;
  throw DataError("unknown category '" + std::string(s) + "'");
}

const CategoryMap& default_category_map() {
  static const CategoryMap m = {{"yes/no", Category::kYesNo}, {"number", Category::kNumbers}, {"other", Category::kOthers}};
  return m;
}

double EvalResult::accuracy(Protocol p, Category c) const { return protocols.at(p).scores.at(c).accuracy; }

json EvalResult::to_json() const {
  json out = json::object();
  for (const auto& [p, r] : protocols) {
    json cats = json::object();
    for (auto c : kCategories) {
      const auto& s = r.scores.at(c);
      cats[to_string(c)] = {{"accuracy", s.accuracy}, {"count", s.count}};
    }
    out[vqa::to_string(p)] = cats;
  }
  return out;
}

EvalResult EvalResult::from_json(const json& j) {
  EvalResult r;
  try {
    for (const auto& [name, cats] : j.items()) {
      Protocol p;
      if (name == "OEQ") p = Protocol::kOpenEnded;
      else if (name == "MCQ") p = Protocol::kMultipleChoice;
      else throw DataError("unknown protocol '" + name + "' in evaluation result");
      auto& pr = r.protocols[p];
      for (auto c : kCategories) {
        const auto& s = cats.at(to_string(c));
        pr.scores[c] = {s.at("accuracy").get<double>(), s.at("count").get<std::size_t>()};
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("evaluation result: ") + e.what());
  }
  return r;
}

bool is_novel_question(const std::string& question, const splitgen::SplitSpec& spec) {
  bool novel = false;
  for (const auto& t : text::tokenize(question)) {
    if (spec.known_nouns.count(t)) return false;
    novel |= spec.novel_nouns.count(t) > 0;
  }
  return novel;
}

EvalResult evaluate(const PredictFn& predict, const Dataset& examples, const splitgen::SplitSpec* spec,
                    const EvalOptions& opts) {
  std::vector<bool> novel(examples.size(), false);
  std::vector<std::optional<Category>> type(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (spec) novel[i] = is_novel_question(examples[i].question, *spec);
    auto it = opts.categories.find(examples[i].answer_type);
    if (it != opts.categories.end()) type[i] = it->second;
  }
  EvalResult res;
  for (Protocol p : opts.protocols) {
    ProtocolResult pr;
    pr.records.resize(examples.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(examples.size()); ++i) {
      const auto& ex = examples[i];
      auto& rec = pr.records[i];
      rec.qid = ex.qid;
      rec.question = ex.question;
      rec.answers = ex.answers;
      rec.answer_type = ex.answer_type;
      rec.novel = novel[i];
      try {
        rec.prediction = predict(ex, p);
      } catch (...) {
#pragma omp critical(nvqa_eval_error)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    // Scoring and sums run serially in example order.
    std::map<Category, double> sums;
    for (auto c : kCategories) pr.scores[c] = {};
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto& rec = pr.records[i];
      rec.accuracy = question_accuracy(rec.prediction, rec.answers, opts.normalize);
      auto add = [&](Category c) {
        sums[c] += rec.accuracy;
        ++pr.scores[c].count;
      };
      add(Category::kOverall);
      if (type[i]) add(*type[i]);
      if (rec.novel) add(Category::kNovel);
    }
    for (auto& [c, s] : pr.scores)
      s.accuracy = s.count ? sums[c] / static_cast<double>(s.count) : 0.0;
    res.protocols[p] = std::move(pr);
  }
  return res;
}

EvalResult evaluate(const vqa::Predictor& model, const Dataset& examples, const splitgen::SplitSpec* spec,
                    const EvalOptions& opts) {
  return evaluate([&](const VqaExample& ex, Protocol p) { return model.predict(ex, p); }, examples, spec, opts);
}

void write_prediction_dump(std::ostream& os, const ProtocolResult& r) {
  for (const auto& rec : r.records) {
    os << json{{"qid", rec.qid},
               {"question", rec.question},
               {"prediction", rec.prediction},
               {"ground_truth_answers", rec.answers},
               {"correct_weight", rec.accuracy}}
              .dump()
       << '\n';
  }
}

std::vector<DropEntry> drop_report(const EvalResult& known, const EvalResult& novel) {
  std::vector<DropEntry> out;
  for (const auto& [p, kr] : known.protocols) {
    auto it = novel.protocols.find(p);
    if (it == novel.protocols.end()) throw DataError("drop_report: protocol " + vqa::to_string(p) + " missing");
    for (auto c : kCategories) {
      DropEntry e;
      e.protocol = p;
      e.category = c;
      e.known = kr.scores.at(c).accuracy;
      e.novel = it->second.scores.at(c).accuracy;
      e.drop = e.known - e.novel;
      if (e.known != 0.0) e.relative = e.drop / e.known;
      out.push_back(e);
    }
  }
  return out;
}

void write_drop_csv(std::ostream& os, const std::vector<DropEntry>& drops) {
  os << "protocol,category,known,novel,drop,relative_drop\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto& d : drops) {
    os << vqa::to_string(d.protocol) << ',' << to_string(d.category) << ',' << d.known << ',' << d.novel << ','
       << d.drop << ',';
    if (d.relative) os << *d.relative;
    else os << "undefined";
    os << '\n';
  }
}

}  // namespace nvqa::evalkit
