#include <CLI11.hpp>
#include <iostream>

#include "hierprompt/pipeline.hpp"

using namespace hierprompt;

int main(int argc, char** argv) {
  CLI::App app{"hierprompt: prompt-based pretraining on heterogeneous text-rich networks"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string out_dir = "run";
  std::string ablation;
  std::string sweep_spec;
  std::string distiller;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the global seed");
  app.add_flag("--force", force, "re-run the stage even if it is up to date");
  app.add_option("--stage-out", out_dir, "artifact directory")->capture_default_str();
  app.add_option("--ablation", ablation, "full | no_mlm | no_nsp | no_graph_token | no_relation_token");
  app.add_option("--sweep", sweep_spec, "KEY=V1,V2,... (sweep subcommand)");
  app.add_option("--distiller", distiller, "builtin | bridge:COMMAND | bridge:tcp://HOST:PORT");
  app.add_flag("--quiet", quiet, "only print warnings and errors");
  app.fallthrough();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "load and validate nodes/edges/schema from data paths"},
      {"synth", "generate the planted synthetic network"},
      {"summarize", "split held-out edges, summarize meta-path subgraphs, build the vocabulary"},
      {"distill", "distill summaries into graph tokens with the frozen encoder"},
      {"pretrain", "train the tunable encoder on relation-aware prompts"},
      {"embed", "write node embeddings from the trained encoder"},
      {"eval", "node classification and link prediction reports"},
      {"ablate", "train and evaluate the ablation suite"},
      {"sweep", "train and evaluate one run per value of --sweep KEY"},
      {"freerun", "embed and evaluate with the frozen encoder only"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }
  if (quiet) set_log_level(LogLevel::kQuiet);

  try {
    RunConfig config = RunConfig::load(config_path);
    if (seed) config = config.with_override("seed", *seed);
    if (!distiller.empty()) config = config.with_override("distiller.spec", distiller);
    if (!ablation.empty()) config.train.ablation = AblationFlags::named(ablation);
    config.train.validate();

    const std::string command = app.get_subcommands().front()->get_name();
    Pipeline pipeline(config, out_dir, force);
    if (command == "sweep") {
      const auto eq = sweep_spec.find('=');
      if (eq == std::string::npos || eq == 0) throw_config("sweep needs --sweep KEY=V1,V2,...");
      const std::string key = sweep_spec.substr(0, eq);
      pipeline.sweep(key, parse_sweep_values(key, std::string_view(sweep_spec).substr(eq + 1)));
    } else {
      if (!sweep_spec.empty()) throw_config("--sweep only applies to the sweep subcommand");
      pipeline.run(command);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}
