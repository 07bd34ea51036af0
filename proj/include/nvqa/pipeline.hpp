#ifndef NVQA_PIPELINE_HPP_
#define NVQA_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvqa/embed.hpp"
#include "nvqa/evalkit.hpp"
#include "nvqa/synthworld.hpp"
#include "nvqa/vqa.hpp"

// The end-to-end experiment as eight resumable stages over one output
// directory. Every stage reads what earlier stages wrote and leaves a
// manifest.json (tool version, config hash, seed, file digests) next to its
// outputs. Nothing written depends on wall-clock time or thread count.
namespace nvqa::pipeline {

inline constexpr const char* kToolName = "nvqa";
inline constexpr const char* kToolVersion = "0.4.0";

enum class Feat { kA, kB, kEF, kLF };
std::string to_string(Feat f);
Feat feat_from_string(std::string_view s);

enum class Aux { kNone, kText, kTextIm };
std::string to_string(Aux a);
Aux aux_from_string(std::string_view s);

struct SplitConfig {
  std::size_t k = 5;
  double novel_fraction = 0.2;
  std::optional<std::size_t> val_size;
  double known_holdout = 0.15;  // share of the train part kept back as known-only test
};

struct VocabConfig {
  embed::Setting setting = embed::Setting::kTrain;
  double tau = 0.4;
  std::uint64_t min_freq = 1;
};

struct PairsConfig {
  std::size_t m = 20;
  std::size_t n = 20;
};

struct AeConfig {
  std::size_t epochs = 8;
  std::size_t stage2_epochs = 8;
  std::size_t batch_size = 16;
  double lr = 5e-3;
  double clip = 5.0;
};

struct ModelConfig {
  vqa::Arch arch = vqa::Arch::kArch1;
  Feat feat = Feat::kA;
  Aux aux = Aux::kNone;
  std::size_t d_e = 16;
  std::size_t d_h = 32;
  std::size_t d = 64;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 5e-3;
  double clip = 5.0;
  std::size_t patience = 0;
  std::size_t max_answers = 1000;
};

struct EvalConfig {
  std::vector<vqa::Protocol> protocols = {vqa::Protocol::kOpenEnded, vqa::Protocol::kMultipleChoice};
  evalkit::NormalizeOptions normalize;
};

struct Config {
  std::uint64_t seed = 0;
  synthworld::WorldSpec world;  // world.seed is always `seed`
  SplitConfig split;
  VocabConfig vocab;
  PairsConfig pairs;
  AeConfig ae;
  ModelConfig model;
  EvalConfig eval;

  // Every section is optional except "seed"; unknown keys, wrong types
  // and invalid combinations raise ConfigError.
  static Config from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // Hex FNV-1a of the canonical JSON form.
  std::string hash() const;
  // e.g. "a1-A-text-oracle"; names the model and eval directories.
  std::string run_name() const;
  void validate() const;
};

Config load_config(const std::filesystem::path& path);

// Feature families a model configuration consumes ("A", "B" or "EF"; LF
// needs "A" and "B").
std::vector<std::string> families(Feat f);

class Pipeline {
 public:
  // `log` gets one-line progress messages; null silences them.
  Pipeline(Config cfg, std::filesystem::path out, std::ostream* log = nullptr);

  void genworld();
  void split();
  void expand_vocab();
  void gen_pairs();
  void pretrain_ae();
  void train();
  void eval();
  void report();
  void run_all();

  const Config& config() const { return cfg_; }
  std::filesystem::path world_dir() const { return out_ / "world"; }
  std::filesystem::path split_dir() const { return out_ / "split"; }
  std::filesystem::path vocab_dir() const;
  std::filesystem::path pairs_dir(const std::string& family) const;
  std::filesystem::path ae_dir(const std::string& family) const;
  std::filesystem::path model_dir() const { return out_ / "models" / cfg_.run_name(); }
  std::filesystem::path eval_dir() const { return out_ / "eval" / cfg_.run_name(); }
  std::filesystem::path report_dir() const { return out_ / "report"; }

 private:
  void say(const std::string& msg) const;
  void write_manifest(const std::filesystem::path& dir, const std::string& stage,
                      nlohmann::json extra = nlohmann::json::object()) const;

  Config cfg_;
  std::filesystem::path out_;
  std::ostream* log_;
};

// Reads the "results" block of an eval file written by Pipeline::eval.
evalkit::EvalResult load_eval_result(const std::filesystem::path& path);

// Hex FNV-1a digest of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace nvqa::pipeline

#endif  // NVQA_PIPELINE_HPP_
