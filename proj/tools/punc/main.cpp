#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "punc/errors.hpp"

int main(int argc, char** argv) {
  using namespace punc::cli;

  CLI::App app{"punc: prompt-space uncertainty for text-to-image models"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::uint64_t seed = 0;
  std::string out;
  std::string backend_url;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", flags.config, "JSON configuration file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Override the configured seed");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_flag("--no-cache", flags.no_cache, "Disable the backend response cache");
    cmd->add_option("--backend-url", backend_url, "Override every backend endpoint");
    cmd->add_flag("--dry-run", flags.dry_run, "Validate and print the plan without calling backends");
  };

  auto* gen = app.add_subcommand("gen-datasets", "Write vague and corrupted prompt datasets");
  add_common(gen, true);
  auto* run_cmd = app.add_subcommand("run", "Run the full evaluation");
  add_common(run_cmd, true);
  auto* probe_cmd = app.add_subcommand("probe", "Run a concept probe grid");
  add_common(probe_cmd, true);
  auto* report_cmd = app.add_subcommand("report", "Re-aggregate a finished run directory");
  add_common(report_cmd, false);
  std::string run_dir;
  report_cmd->add_option("run_dir", run_dir, "Run directory (defaults to --out)");

  ServeFlags serve;
  std::string world;
  std::string serve_config;
  auto* serve_cmd = app.add_subcommand("mock-serve", "Serve the mock backend over the wire protocol");
  serve_cmd->add_option("--world", world, "Concept world JSON file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--config", serve_config, "Run config whose mock_world and backend to serve")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free port)");
  serve_cmd->add_option("--fail-first", serve.fail_first, "Answer 503 to the first k attempts of each request");
  serve_cmd->add_option("--model-id", serve.model_id, "Model id reported in responses");
  serve_cmd->add_option("--capabilities", serve.capabilities, "Advertised operations (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  auto finish_common = [&](CLI::App* cmd) {
    if (cmd->count("--seed") > 0) flags.seed = seed;
    if (!out.empty()) flags.out = out;
    if (!backend_url.empty()) flags.backend_url = backend_url;
  };

  try {
    if (*gen) {
      finish_common(gen);
      return gen_datasets(flags);
    }
    if (*run_cmd) {
      finish_common(run_cmd);
      return run(flags);
    }
    if (*probe_cmd) {
      finish_common(probe_cmd);
      return probe(flags);
    }
    if (*report_cmd) {
      finish_common(report_cmd);
      std::optional<std::filesystem::path> dir;
      if (!run_dir.empty()) dir = run_dir;
      return report(flags, dir);
    }
    if (!world.empty()) serve.world = world;
    if (!serve_config.empty()) serve.config = serve_config;
    return mock_serve(serve);
  } catch (const punc::BackendError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBackendError;
  } catch (const punc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
