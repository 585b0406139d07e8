#pragma once

// Run configuration: a JSON document mirroring RunConfig, plus the concept
// world description used by mock backends.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "punc/backend.hpp"
#include "punc/baselines.hpp"
#include "punc/conceptworld.hpp"
#include "punc/promptgen.hpp"
#include "punc/textsim.hpp"

namespace punc::config {

/// {"vocabulary": [...], "known": [...] (default: all), "seed", "aleatoric_rate",
///  "epistemic_drop", "vagueness_k"}
conceptworld::ConceptWorld world_from_json(const nlohmann::json& j);
nlohmann::json world_to_json(const conceptworld::ConceptWorld& world);
conceptworld::ConceptWorld load_world(const std::filesystem::path& path);

struct BackendSpec {
  backend::BackendConfig config;
  /// Mock backends only: restrict the advertised operations (e.g. no reconstruct).
  std::optional<backend::CapabilitySet> capabilities;
  /// Environment variable holding the bearer token; resolved when the backend is built.
  std::optional<std::string> bearer_token_env;
};

/// Keys: endpoint, profile (applied first), model_id, inference_steps,
/// guidance_scale (null disables), max_caption_tokens, timeout_ms, max_retries,
/// retry_backoff_ms, max_in_flight, bearer_token_env, capabilities.
BackendSpec backend_from_json(const nlohmann::json& j);
nlohmann::json backend_to_json(const BackendSpec& spec);

enum class Component { precision, recall };

std::string to_string(Component c);
Component parse_component(std::string_view name);

struct BaselineSpec {
  baselines::Method method = baselines::Method::twoxdm;
  std::string name;  // scorer name in records and reports; defaults to the method name
  baselines::ImageSimilarityConfig similarity;
  std::vector<double> timesteps{0.25, 0.5, 0.75};  // ddpm_ood
  std::vector<baselines::MaskSpec> masks{{"center", 0.25}, {"left", 0.5}, {"checker", 0.5}};  // lmd
};

struct GeneratorSpec {
  enum class Kind { vague, corrupt } kind = Kind::vague;
  // vague
  std::vector<std::string> classes;
  std::vector<std::string> templates;
  std::size_t count = 0;  // 0: all (template, class) pairs
  // corrupt
  std::string source;  // name of another dataset
  promptgen::PromptGroup::Kind level = promptgen::PromptGroup::Kind::corrupt_l1;
  promptgen::CorruptionPlan plan;
};

struct DatasetSpec {
  std::string name;
  promptgen::PromptGroup group;
  bool in_distribution = false;
  std::optional<std::filesystem::path> path;
  std::vector<std::string> prompts;  // inline texts
  std::optional<GeneratorSpec> generator;
  std::optional<Component> component;  // overrides the group default
};

struct RunConfig {
  BackendSpec backend;
  std::optional<BackendSpec> captioner;  // defaults to backend
  std::optional<BackendSpec> embedder;
  std::optional<nlohmann::json> mock_world;
  std::vector<textsim::MetricSelector> metrics;
  std::vector<BaselineSpec> baselines;
  std::vector<DatasetSpec> datasets;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  bool cache = true;
  std::optional<std::filesystem::path> cache_dir;  // default: <output_dir>/cache
  std::string instruction = "Describe this image.";
  int repeats = 1;
  double max_failure_fraction = 0.1;
  double target_tpr = 0.95;

  const BackendSpec& captioner_spec() const { return captioner ? *captioner : backend; }
  std::filesystem::path resolved_cache_dir() const {
    return cache_dir ? *cache_dir : output_dir / "cache";
  }

  /// Throws ConfigError: no metric, bertscore without embedder, not exactly one
  /// in-distribution dataset, no uncertain dataset, duplicate names, bad ranges.
  void validate() const;
};

/// Default component for a group: recall for OOD and custom groups, precision
/// for vague, corrupted and adversarial prompts.
Component default_component(const promptgen::PromptGroup& group);

/// Relative paths are resolved against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

/// SHA-256 of the canonical config with output_dir, cache and cache_dir removed:
/// the fields that change record contents.
std::string config_hash(const RunConfig& cfg);

/// Reads and parses a JSON file; throws ConfigError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace punc::config
