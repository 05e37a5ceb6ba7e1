// rex: knowledge-graph explanation engine CLI.
//
// Subcommands: preprocess | train | explain | evaluate | ablate, all driven
// by a JSON config. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 runtime error.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rex/errors.hpp"
#include "rex/pipeline.hpp"
#include "rex/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct CommonArgs {
  std::string config_path;
  std::int64_t seed = -1;
  int threads = 0;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration")
      ->required();
  cmd->add_option("--seed", args.seed, "override the top-level seed");
  cmd->add_option("--threads", args.threads, "cap worker threads");
  cmd->add_option("--out", args.out_dir, "override the output directory");
}

rex::RunConfig resolve(const CommonArgs& args) {
  rex::RunConfig cfg = rex::load_run_config(args.config_path);
  if (args.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(args.seed);
    cfg.rl.seed = rex::derive_seed(cfg.seed, "rl");
  }
  if (args.threads > 0) cfg.threads = args.threads;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rex: explanatory path finding over knowledge graphs"};
  app.require_subcommand(1);

  CommonArgs preprocess_args, train_args, explain_args, evaluate_args,
      ablate_args;
  std::string hyp_subject, hyp_relation, hyp_object;

  CLI::App* preprocess =
      app.add_subcommand("preprocess", "build graph, clusters and IC table");
  add_common(preprocess, preprocess_args);

  CLI::App* train = app.add_subcommand("train", "train the path-finding policy");
  add_common(train, train_args);

  CLI::App* explain =
      app.add_subcommand("explain", "assemble an explanation for one hypothesis");
  add_common(explain, explain_args);
  explain->add_option("--subject", hyp_subject, "hypothesis subject label")
      ->required();
  explain->add_option("--relation", hyp_relation, "hypothesis relation label")
      ->required();
  explain->add_option("--object", hyp_object, "hypothesis object label")
      ->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "rank the test split");
  add_common(evaluate, evaluate_args);

  CLI::App* ablate = app.add_subcommand("ablate", "run the four reward variants");
  add_common(ablate, ablate_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage message
    return kExitConfig;
  }

  try {
    if (preprocess->parsed()) {
      rex::cmd_preprocess(resolve(preprocess_args));
    } else if (train->parsed()) {
      rex::cmd_train(resolve(train_args));
    } else if (explain->parsed()) {
      rex::cmd_explain(resolve(explain_args), hyp_subject, hyp_relation,
                       hyp_object);
    } else if (evaluate->parsed()) {
      rex::cmd_evaluate(resolve(evaluate_args));
    } else if (ablate->parsed()) {
      rex::cmd_ablate(resolve(ablate_args));
    }
  } catch (const rex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rex::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const rex::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
