#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace punc::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kBackendError = 2,
  kPartialFailure = 3,
};

struct CommonFlags {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool no_cache = false;
  std::optional<std::string> backend_url;
  bool dry_run = false;
};

int gen_datasets(const CommonFlags& flags);
int run(const CommonFlags& flags);
int probe(const CommonFlags& flags);
int report(const CommonFlags& flags, const std::optional<std::filesystem::path>& run_dir);

struct ServeFlags {
  std::optional<std::filesystem::path> world;
  std::optional<std::filesystem::path> config;
  std::string host = "127.0.0.1";
  int port = 8080;
  int fail_first = 0;
  std::string model_id = "mock";
  std::vector<std::string> capabilities;
};

int mock_serve(const ServeFlags& flags);

}  // namespace punc::cli
