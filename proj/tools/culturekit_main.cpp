#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "culturekit/errors.hpp"
#include "culturekit/pipeline.hpp"
#include "culturekit/roster.hpp"

namespace {

int exit_code_for(const culturekit::Error& e) {
  using Kind = culturekit::Error::Kind;
  switch (e.kind()) {
    case Kind::transport:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"culture-conditioned generation analysis pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string workspace = "workspace";
  app.add_option("--config,-c", config_path, "pipeline config (JSON)")->required();
  app.add_option("--workspace,-w", workspace, "workspace directory")
      ->capture_default_str();

  std::string corpus_dir, corpus_format, pattern_file;
  int scan_parallelism = 0;

  for (const char* stage : culturekit::pipeline::kStageNames) {
    CLI::App* sub = app.add_subcommand(stage, std::string("run the ") + stage + " stage");
    if (std::string(stage) == "scan-corpus") {
      sub->add_option("--corpus", corpus_dir, "corpus directory (overrides config)");
      sub->add_option("--format", corpus_format, "corpus format: lines | length-prefixed");
      sub->add_option("--patterns", pattern_file, "pattern set JSON (overrides config)");
      sub->add_option("--parallelism", scan_parallelism, "scan worker count");
    }
  }

  CLI11_PARSE(app, argc, argv);
  std::string stage = app.get_subcommands().front()->get_name();

  try {
    culturekit::pipeline::Config config = culturekit::pipeline::Config::load(config_path);
    if (!corpus_dir.empty()) config.corpus_dir = corpus_dir;
    if (!corpus_format.empty())
      config.corpus_format = culturekit::corpusscan::corpus_format_from_string(corpus_format);
    if (!pattern_file.empty()) config.pattern_file = pattern_file;
    if (scan_parallelism > 0) config.scan_parallelism = scan_parallelism;

    int status = culturekit::pipeline::run_stage(stage, config, workspace);
    if (status == 3)
      std::cerr << "stage '" << stage << "' completed partially; rerun to resume\n";
    return status;
  } catch (const culturekit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
