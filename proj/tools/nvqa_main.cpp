// nvqa: runs the novel-object VQA protocol one stage at a time.
//
//   nvqa genworld --config c.json --out-dir run/
//   nvqa split --config c.json --out-dir run/
//   ...
//   nvqa train --config c.json --out-dir run/ --arch 1 --setting oracle --aux text
//
// Exit status: 0 on success, 1 on data or contract errors, 2 on config errors.

#include <omp.h>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nvqa/error.hpp"
#include "nvqa/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int jobs = 0;
  std::optional<int> arch;
  std::string setting, aux, feat;
  bool quiet = false;
};

nlohmann::json read_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw nvqa::ConfigError("cannot read config " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw nvqa::ConfigError(path + ": " + e.what());
  }
}

// Command-line overrides are folded into the JSON so the strict parser
// validates them like any other key.
nvqa::pipeline::Config resolve(const CommonArgs& a) {
  nlohmann::json j = read_config(a.config);
  if (!j.is_object()) throw nvqa::ConfigError("config must be a JSON object");
  if (a.seed) j["seed"] = *a.seed;
  auto section = [&](const char* name) -> nlohmann::json& {
    if (!j.contains(name)) j[name] = nlohmann::json::object();
    return j[name];
  };
  if (a.arch) section("model")["arch"] = *a.arch;
  if (!a.feat.empty()) section("model")["feat"] = a.feat;
  if (!a.aux.empty()) section("model")["aux"] = a.aux;
  if (!a.setting.empty()) section("vocab")["setting"] = a.setting;
  return nvqa::pipeline::Config::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Novel-object VQA experiment pipeline"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", nvqa::pipeline::kToolVersion);

  CommonArgs args;
  using Stage = void (nvqa::pipeline::Pipeline::*)();
  const std::vector<std::tuple<std::string, std::string, Stage>> stages = {
      {"genworld", "generate the synthetic world", &nvqa::pipeline::Pipeline::genworld},
      {"split", "known/novel split and known-only holdout", &nvqa::pipeline::Pipeline::split},
      {"expand-vocab", "build the vocabulary for the configured setting", &nvqa::pipeline::Pipeline::expand_vocab},
      {"pretrain-ae", "pretrain the sentence autoencoder", &nvqa::pipeline::Pipeline::pretrain_ae},
      {"gen-pairs", "cross class images with sentences", &nvqa::pipeline::Pipeline::gen_pairs},
      {"train", "train the VQA model", &nvqa::pipeline::Pipeline::train},
      {"eval", "evaluate on novel and known-only test questions", &nvqa::pipeline::Pipeline::eval},
      {"report", "tabulate every evaluated run", &nvqa::pipeline::Pipeline::report},
  };
  std::map<CLI::App*, Stage> by_cmd;
  for (const auto& [name, help, fn] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--out-dir", args.out_dir, "output directory")->capture_default_str();
    sub->add_option("--jobs", args.jobs, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--arch", args.arch, "override model.arch (1 or 2)");
    sub->add_option("--setting", args.setting, "override vocab.setting");
    sub->add_option("--aux", args.aux, "override model.aux");
    sub->add_option("--feat", args.feat, "override model.feat");
    sub->add_flag("-q,--quiet", args.quiet, "no progress messages");
    by_cmd[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (args.jobs > 0) omp_set_num_threads(args.jobs);
    nvqa::pipeline::Pipeline p(resolve(args), args.out_dir, args.quiet ? nullptr : &std::cerr);
    for (const auto& [sub, fn] : by_cmd)
      if (sub->parsed()) std::invoke(fn, p);
  } catch (const nvqa::ConfigError& e) {
    std::cerr << "nvqa: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nvqa: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
