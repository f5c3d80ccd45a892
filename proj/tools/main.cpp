#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace cactus;

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised meta-learning from clustered embeddings"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> reports;
  const char* names[] = {"synth", "partition", "gen-tasks", "meta-train", "evaluate", "compare"};
  const char* help[] = {"write a synthetic dataset", "build partitions of a split", "write a task manifest",
                        "meta-train maml or protonet", "evaluate a learner on a task manifest",
                        "order evaluation reports"};
  for (std::size_t i = 0; i < std::size(names); ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->allow_extras();
    sub->add_option("-c,--config", config_file, "key=value config file; --key=value overrides win");
    if (std::string(names[i]) == "compare") sub->add_option("reports", reports, "report CSV files");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    RunConfig cfg = cli::defaults_for(cmd);
    if (!config_file.empty()) cfg.merge(RunConfig::load(config_file));
    cfg.merge(parse_overrides(sub->remaining()));
    if (const auto w = cfg.count("workers"); w > 0) omp_set_num_threads(static_cast<int>(w));

    if (cmd == "synth") return cli::cmd_synth(cfg, std::cout);
    if (cmd == "partition") return cli::cmd_partition(cfg, std::cout);
    if (cmd == "gen-tasks") return cli::cmd_gen_tasks(cfg, std::cout);
    if (cmd == "meta-train") return cli::cmd_meta_train(cfg, std::cout);
    if (cmd == "evaluate") return cli::cmd_evaluate(cfg, std::cout);
    return cli::cmd_compare(cfg, reports, std::cout);
  } catch (const Error& e) {
    std::cerr << "cactus: " << e.what() << '\n';
    return cli::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "cactus: " << e.what() << '\n';
    return 3;
  }
}
