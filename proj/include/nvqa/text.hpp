#ifndef NVQA_TEXT_HPP_
#define NVQA_TEXT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nvqa::text {

// Lowercases ASCII letters and splits on whitespace and ASCII punctuation,
// dropping the punctuation. Digits and non-ASCII bytes stay inside tokens.
std::vector<std::string> tokenize(std::string_view text);

// Where a vocabulary came from; checked when weights move between models.
enum class Provenance { kTrain, kOracle, kGeneral, kGeneralExpanded, kExternal };

std::string to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kBos = "<bos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::size_t kUnkId = 0;
inline constexpr std::size_t kBosId = 1;
inline constexpr std::size_t kEosId = 2;

struct TokenSequence {
  std::vector<std::size_t> ids;
  std::string surface;  // original text, kept for audit dumps
};

using Counts = std::map<std::string, std::uint64_t>;

// Ordered token <-> index map. Indices 0..2 are always <unk>, <bos>, <eos>.
// Immutable once built; expansion returns a new vocabulary.
class Vocabulary {
 public:
  // Reserved tokens only.
  explicit Vocabulary(Provenance provenance = Provenance::kTrain);

  // Reserved tokens, then every token with count >= min_freq ordered by
  // descending count, ties broken lexicographically.
  static Vocabulary build(const Counts& counts, std::uint64_t min_freq,
                          Provenance provenance = Provenance::kTrain);

  // Appends `words` not already present (in the given order, count 0 unless
  // `counts` has them) and retags the result.
  Vocabulary expanded(const std::vector<std::string>& words, Provenance provenance,
                      const Counts* counts = nullptr) const;
  Vocabulary retagged(Provenance provenance) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::uint64_t count(std::size_t id) const { return counts_.at(id); }
  bool contains(std::string_view token) const;
  // Index of token, or kUnkId.
  std::size_t id(std::string_view token) const;
  Provenance provenance() const { return provenance_; }

  TokenSequence encode(const std::vector<std::string>& tokens) const;
  TokenSequence encode_text(std::string_view text) const;
  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const;

  // FNV-1a over the ordered token list; identifies the index layout.
  std::uint64_t hash() const;

  // "token<TAB>count" per line, reserved tokens first.
  void save(std::ostream& os) const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(std::istream& is, Provenance provenance);
  static Vocabulary load(const std::filesystem::path& path, Provenance provenance);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_ && a.provenance_ == b.provenance_;
  }

 private:
  void push(std::string token, std::uint64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  Provenance provenance_;
};

// Aggregates token counts over a sentence stream (one sentence per line).
void count_tokens(std::istream& corpus, Counts& counts);
void count_tokens(const std::vector<std::string>& sentences, Counts& counts);

// Reads a UTF-8 corpus file, one sentence per line, skipping blank lines.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Decides which tokens of a sentence are nouns.
class NounTagger {
 public:
  virtual ~NounTagger() = default;
  virtual std::string name() const = 0;
  virtual std::set<std::string> nouns(const std::vector<std::string>& tokens) const = 0;
};

// Word -> POS table tagger. Lexicon words are nouns iff their tag starts
// with "NN". Words missing from the lexicon count as nouns unless they are
// in the closed-class stoplist or purely numeric.
class LexiconTagger : public NounTagger {
 public:
  struct Options {
    // "dogs" -> "dog" when the singular is a lexicon noun
    bool fold_plurals = false;
  };

  static LexiconTagger from_file(const std::filesystem::path& path, Options opts);
  static LexiconTagger from_file(const std::filesystem::path& path) { return from_file(path, {}); }
  static LexiconTagger from_stream(std::istream& is, Options opts);
  // The lexicon shipped in data/lexicon.tsv.
  static LexiconTagger bundled(Options opts);
  static LexiconTagger bundled() { return bundled({}); }

  std::string name() const override { return "lexicon"; }
  std::set<std::string> nouns(const std::vector<std::string>& tokens) const override;
  bool is_noun(const std::string& token) const;
  std::size_t lexicon_size() const { return pos_.size(); }

 private:
  LexiconTagger(std::unordered_map<std::string, std::string> pos, Options opts)
      : pos_(std::move(pos)), opts_(opts) {}

  std::unordered_map<std::string, std::string> pos_;
  Options opts_;
};

std::set<std::string> extract_nouns(std::string_view sentence, const NounTagger& tagger);

// Closed-class words never treated as nouns when absent from the lexicon.
const std::set<std::string>& closed_class_stoplist();

std::filesystem::path bundled_lexicon_path();

}  // namespace nvqa::text

#endif  // NVQA_TEXT_HPP_
