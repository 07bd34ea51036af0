#include "nvqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nvqa/error.hpp"

namespace nvqa::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kTrain: return "train";
    case Provenance::kOracle: return "oracle";
    case Provenance::kGeneral: return "general";
    case Provenance::kGeneralExpanded: return "general-expanded";
    case Provenance::kExternal: return "external";
  }
  return "?";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "train") return Provenance::kTrain;
  if (s == "oracle") return Provenance::kOracle;
  if (s == "general") return Provenance::kGeneral;
  if (s == "general-expanded") return Provenance::kGeneralExpanded;
  if (s == "external") return Provenance::kExternal;
  throw DataError("unknown vocabulary provenance '" + std::string(s) + "'");
}

Vocabulary::Vocabulary(Provenance provenance) : provenance_(provenance) {
  push(std::string(kUnk), 0);
  push(std::string(kBos), 0);
  push(std::string(kEos), 0);
}

void Vocabulary::push(std::string token, std::uint64_t count) {
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(const Counts& counts, std::uint64_t min_freq, Provenance provenance) {
  if (min_freq < 1) throw ContractError("build_vocab: min_freq must be >= 1");
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_freq && tok != kUnk && tok != kBos && tok != kEos) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v(provenance);
  for (auto& [tok, n] : kept) v.push(std::move(tok), n);
  return v;
}

Vocabulary Vocabulary::expanded(const std::vector<std::string>& words, Provenance provenance,
                                const Counts* counts) const {
  Vocabulary v = *this;
  v.provenance_ = provenance;
  for (const auto& w : words) {
    if (v.contains(w)) continue;
    std::uint64_t n = 0;
    if (counts) {
      auto it = counts->find(w);
      if (it != counts->end()) n = it->second;
    }
    v.push(w, n);
  }
  return v;
}

Vocabulary Vocabulary::retagged(Provenance provenance) const {
  Vocabulary v = *this;
  v.provenance_ = provenance;
  return v;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

TokenSequence Vocabulary::encode(const std::vector<std::string>& tokens) const {
  TokenSequence seq;
  seq.ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    seq.ids.push_back(id(t));
    if (!seq.surface.empty()) seq.surface.push_back(' ');
    seq.surface += t;
  }
  return seq;
}

TokenSequence Vocabulary::encode_text(std::string_view text) const {
  TokenSequence seq = encode(tokenize(text));
  seq.surface = std::string(text);
  return seq;
}

std::vector<std::string> Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) {
    if (i >= tokens_.size()) throw DataError("decode: index " + std::to_string(i) + " >= |V|");
    out.push_back(tokens_[i]);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;  // separator
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocabulary::save(std::ostream& os) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) os << tokens_[i] << '\t' << counts_[i] << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw LoadError("cannot write " + path.string());
  save(os);
}

Vocabulary Vocabulary::load(std::istream& is, Provenance provenance) {
  Vocabulary v(provenance);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw LoadError("vocabulary line " + std::to_string(lineno) + ": missing tab");
    std::string tok = line.substr(0, tab);
    const std::uint64_t n = std::stoull(line.substr(tab + 1));
    if (lineno <= 3) {
      if (tok != v.tokens_[lineno - 1])
        throw LoadError("vocabulary file must start with <unk>, <bos>, <eos>");
      continue;
    }
    if (v.contains(tok)) throw LoadError("vocabulary: duplicate token '" + tok + "'");
    v.push(std::move(tok), n);
  }
  if (lineno < 3) throw LoadError("vocabulary file is missing reserved tokens");
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, Provenance provenance) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  return load(is, provenance);
}

void count_tokens(std::istream& corpus, Counts& counts) {
  std::string line;
  while (std::getline(corpus, line))
    for (auto& t : tokenize(line)) ++counts[t];
}

void count_tokens(const std::vector<std::string>& sentences, Counts& counts) {
  for (const auto& s : sentences)
    for (auto& t : tokenize(s)) ++counts[t];
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

const std::set<std::string>& closed_class_stoplist() {
  static const std::set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
      "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
      "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
      "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
      "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
      "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
      "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such",
      "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
      "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
      "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
      "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
      "yes", "many", "much", "s", "t"};
  return words;
}

std::filesystem::path bundled_lexicon_path() {
  if (const char* dir = std::getenv("NVQA_DATA_DIR")) return std::filesystem::path(dir) / "lexicon.tsv";
  return std::filesystem::path(NVQA_DATA_DIR) / "lexicon.tsv";
}

LexiconTagger LexiconTagger::from_stream(std::istream& is, Options opts) {
  std::unordered_map<std::string, std::string> pos;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ConfigError("lexicon line " + std::to_string(lineno) + ": expected word<TAB>POS");
    pos[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return LexiconTagger(std::move(pos), opts);
}

LexiconTagger LexiconTagger::from_file(const std::filesystem::path& path, Options opts) {
  std::ifstream is(path);
  if (!is) throw ConfigError("lexicon file not found: " + path.string());
  return from_stream(is, opts);
}

LexiconTagger LexiconTagger::bundled(Options opts) { return from_file(bundled_lexicon_path(), opts); }

bool LexiconTagger::is_noun(const std::string& token) const {
  auto it = pos_.find(token);
  if (it != pos_.end()) return it->second.rfind("NN", 0) == 0;
  if (closed_class_stoplist().count(token)) return false;
  return !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::set<std::string> LexiconTagger::nouns(const std::vector<std::string>& tokens) const {
  std::set<std::string> out;
  for (const auto& t : tokens) {
    if (opts_.fold_plurals && t.size() > 2 && t.back() == 's' && !pos_.count(t)) {
      const std::string stem = t.substr(0, t.size() - 1);
      auto it = pos_.find(stem);
      if (it != pos_.end() && it->second.rfind("NN", 0) == 0) {
        out.insert(stem);
        continue;
      }
    }
    if (is_noun(t)) out.insert(t);
  }
  return out;
}

std::set<std::string> extract_nouns(std::string_view sentence, const NounTagger& tagger) {
  return tagger.nouns(tokenize(sentence));
}

}  // namespace nvqa::text
