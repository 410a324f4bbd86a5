// Command-line front end. All real work lives in hat/cli.hpp; this file only
// translates flags into a RunConfig and maps CLI11's own errors to exit 1.
#include <iostream>

#include "CLI11.hpp"
#include "hat/cli.hpp"

int main(int argc, char** argv) {
  using hat::cli::RunConfig;
  RunConfig rc;
  try {
    rc.workers = hat::cli::workers_from_env();
  } catch (const hat::cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hat::cli::kExitUsage;
  }

  CLI::App app{"harmony-aware hierarchical transformer pipeline"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", rc.out_dir, "output directory")->required();
    sub->add_option("--seed", rc.seed, "run seed");
    sub->add_option("--config", rc.config_path, "model config file");
    sub->add_option("--variant", rc.variant, "ablation variant")
        ->check(CLI::IsMember({"base", "form", "texture", "full"}));
  };

  CLI::App* tok = app.add_subcommand("tokenize", "songs -> token files + vocabulary");
  tok->add_option("--in", rc.in_dir, "directory of .song files")->required();
  add_common(tok);

  CLI::App* train = app.add_subcommand("train", "token files -> checkpoint + loss log");
  train->add_option("--in", rc.in_dir, "directory of .tokens files")->required();
  add_common(train);
  train->add_option("--checkpoint", rc.checkpoint, "resume from this checkpoint");
  train->add_option("--steps", rc.max_steps, "optimizer step target");
  train->add_option("--batch", rc.batch_size, "sequences per step");
  train->add_option("--lr", rc.lr, "learning rate");
  train->add_option("--threshold", rc.loss_threshold, "early-stop loss (<=0 disables)");
  train->add_option("--checkpoint-every", rc.checkpoint_every, "snapshot interval");

  CLI::App* gen = app.add_subcommand("generate", "checkpoint -> sampled pieces");
  add_common(gen);
  gen->add_option("--checkpoint", rc.checkpoint, "trained model")->required();
  gen->add_option("--pieces", rc.pieces, "number of pieces to sample");
  gen->add_option("--prompt", rc.prompt_path, "token file used as the prefix");

  CLI::App* eval = app.add_subcommand("eval", "pieces -> metric reports");
  eval->add_option("--in", rc.in_dir, "directory of .tokens pieces")->required();
  add_common(eval);
  eval->add_option("--reference", rc.reference_dir, "reference corpus for n-gram stats");
  eval->add_option("--checkpoint", rc.checkpoint, "model for next-token scoring");
  eval->add_option("--ns", rc.ngram_ns, "progression orders");
  eval->add_option("--lambda", rc.lambda, "CPI/CPVR blend weight");
  eval->add_option("--tracks", rc.track_filter, "groove track filter")
      ->check(CLI::IsMember({"all", "accompaniment"}));
  eval->add_flag("!--no-cpr", rc.with_cpr, "skip progression metrics");
  eval->add_option("--report", rc.report, "report format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? hat::cli::kExitOk : hat::cli::kExitUsage;
  }

  rc.command = app.get_subcommands().front()->get_name();
  return hat::cli::dispatch(rc);
}
