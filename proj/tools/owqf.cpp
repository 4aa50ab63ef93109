#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "owqf/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Open-world query fusion detector at desk scale"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::string mode;
  owqf::EvalArgs eval_args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config of flat dotted keys")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides out_dir)");
  };
  CLI::App* gen = app.add_subcommand("generate", "Write the synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "Pretrain, freeze and fine-tune");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation rows");
  for (CLI::App* sub : {gen, train, eval, ablate}) add_common(sub);
  eval->add_option("--mode", mode, "open-set or open-ended")
      ->check(CLI::IsMember({"open-set", "open-ended"}));
  eval->add_option("--category-list", eval_args.category_list_path,
                   "JSON array of category ids or names");
  eval->add_option("--prompts", eval_args.prompts_path, "User-supplied point prompts");
  eval->add_option("--checkpoint", eval_args.checkpoint_path,
                   "Checkpoint file (default <out>/checkpoint.json)");
  CLI11_PARSE(app, argc, argv);

  try {
    owqf::RunConfig cfg = owqf::load_config(config_path);
    owqf::apply_env_overrides(cfg);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (gen->parsed()) return owqf::cmd_generate(cfg);
    if (train->parsed()) return owqf::cmd_train(cfg);
    if (ablate->parsed()) return owqf::cmd_ablate(cfg);
    if (!mode.empty()) eval_args.mode = owqf::parse_mode(mode);
    try {
      return owqf::cmd_eval(cfg, eval_args);
    } catch (const owqf::ConfigError& e) {
      std::fprintf(stderr, "usage error: %s\n", e.what());
      return 2;
    }
  } catch (const owqf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
