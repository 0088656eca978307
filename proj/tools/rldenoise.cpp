// Command-line front door for the denoising pipeline. Subcommands mirror the
// pipeline stages; every stage works inside a self-describing run directory
// created by `gen`.
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rldenoise/common.hpp"
#include "rldenoise/config.hpp"
#include "rldenoise/pipeline.hpp"

namespace {

using namespace rldenoise;

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides,
                         const std::string& seed_flag) {
  RunConfig cfg;
  if (!config_path.empty()) parse_config_text(cfg, read_file(config_path));
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw input_error("--set expects key=value, got '" + kv + "'");
    apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!seed_flag.empty()) apply_config_value(cfg, "seed", seed_flag);
  cfg.check();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distant-supervision denoising pipeline"};
  app.require_subcommand(1);

  std::string config_path, seed_flag, out_dir, run_dir;
  std::string input_name = "dataset.tsv";
  std::vector<std::string> overrides;
  int parallel_relations = 1;
  bool use_pretrained = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic noisy dataset");
  gen->add_option("--config", config_path, "flat key=value config file");
  gen->add_option("--seed", seed_flag, "master seed (overrides config)");
  gen->add_option("--set", overrides, "override one config key (key=value)");
  gen->add_option("--out", out_dir, "run directory to create")->required();

  auto* pre = app.add_subcommand("pretrain", "pre-train one agent per relation");
  pre->add_option("--run", run_dir, "run directory")->required();

  auto* tra = app.add_subcommand("train-agent", "policy-gradient retraining");
  tra->add_option("--run", run_dir, "run directory")->required();
  tra->add_option("--parallel-relations", parallel_relations,
                  "agents trained concurrently");

  auto* red = app.add_subcommand("redistribute",
                                 "move flagged false positives into the negative set");
  red->add_option("--run", run_dir, "run directory")->required();
  red->add_flag("--pretrained", use_pretrained,
                "use pre-trained agents instead of RL-trained ones");

  auto* clf = app.add_subcommand("train-classifier",
                                 "train per-relation classifiers on a dataset");
  clf->add_option("--run", run_dir, "run directory")->required();
  clf->add_option("--input", input_name, "dataset file inside the run directory");

  auto* eva = app.add_subcommand("eval", "score classifiers on validation splits");
  eva->add_option("--run", run_dir, "run directory")->required();
  eva->add_option("--input", input_name, "dataset file inside the run directory");

  auto* rep = app.add_subcommand("report",
                                 "three-way F1 comparison and removal counts");
  rep->add_option("--run", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      stage_gen(resolve_config(config_path, overrides, seed_flag), out_dir);
    } else {
      const RunDir run{run_dir};
      if (pre->parsed()) stage_pretrain(run);
      if (tra->parsed()) stage_train_agent(run, parallel_relations);
      if (red->parsed()) stage_redistribute(run, use_pretrained);
      if (clf->parsed()) stage_train_classifier(run, input_name);
      if (eva->parsed()) stage_eval(run, input_name);
      if (rep->parsed()) stage_report(run);
    }
  } catch (const input_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fault: %s\n", e.what());
    return 2;
  }
  return 0;
}
