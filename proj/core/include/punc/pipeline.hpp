#pragma once

// End-to-end evaluation: generate -> caption -> score, plus baselines, with
// resumable JSON-lines persistence and detection reports.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "punc/backend.hpp"
#include "punc/config.hpp"
#include "punc/promptgen.hpp"
#include "punc/record.hpp"
#include "punc/report.hpp"

namespace punc::pipeline {

/// Backends used by a run. `embedder` may be null when no metric needs it.
struct Components {
  backend::Backend* generator = nullptr;
  backend::Backend* captioner = nullptr;
  backend::Backend* embedder = nullptr;
};

/// Owns the backends described by a RunConfig, wrapped in disk caches when
/// caching is on. Identical specs share one instance.
/// Caller-owned backends to use instead of building them from the config.
struct BackendOverrides {
  backend::Backend* generator = nullptr;
  backend::Backend* captioner = nullptr;
  backend::Backend* embedder = nullptr;
};

class BackendSet {
 public:
  explicit BackendSet(const config::RunConfig& cfg, BackendOverrides overrides = {});
  ~BackendSet();
  BackendSet(const BackendSet&) = delete;
  BackendSet& operator=(const BackendSet&) = delete;

  Components components() const { return components_; }

  /// Builds an uncached backend from a spec. "mock:" uses `mock_world`.
  static std::unique_ptr<backend::Backend> build(const config::BackendSpec& spec,
                                                 const std::optional<nlohmann::json>& mock_world);

 private:
  std::vector<std::unique_ptr<backend::Backend>> owned_;
  Components components_;
};

/// Per-record seed: keyed by run seed, prompt id and repeat index.
std::uint64_t record_seed(std::uint64_t run_seed, const std::string& prompt_id, int repeat);

struct PromptTask {
  promptgen::PromptRecord prompt;
  std::string dataset;
  config::Component component = config::Component::recall;
  int repeat = 0;
};

/// Steps 1-3 for one prompt: generate, caption, then one SimilarityReport per
/// configured metric with uncertainty = 1 - the task's component. Failures are
/// recorded in the returned record, never thrown.
record::RunRecord punc_score(const PromptTask& task, const config::RunConfig& cfg,
                             const Components& components);

/// Adds one entry per configured baseline to `rec` (errors recorded per entry).
void score_baselines(record::RunRecord& rec, const config::RunConfig& cfg,
                     const Components& components);

/// Dataset records in config order, with groups taken from their dataset.
struct LoadedDataset {
  const config::DatasetSpec* spec = nullptr;
  std::vector<promptgen::PromptRecord> records;
};

std::vector<LoadedDataset> load_datasets(const config::RunConfig& cfg);

/// All tasks in dataset order (dataset, record, repeat). Throws ConfigError on
/// duplicate prompt ids.
std::vector<PromptTask> plan_tasks(const config::RunConfig& cfg,
                                   const std::vector<LoadedDataset>& datasets);

struct RunOptions {
  /// Stop after writing this many new records (simulates an interrupted run).
  std::optional<std::size_t> stop_after;
  bool dry_run = false;
  BackendOverrides overrides;
  /// Called after each record is persisted, in dataset order.
  std::function<void(const record::RunRecord&)> on_record;
};

struct RunResult {
  std::size_t planned = 0;
  std::size_t resumed = 0;  // records already present from an earlier attempt
  std::size_t written = 0;  // records written by this call
  bool completed = false;
  std::vector<record::RunRecord> records;  // full record set, dataset order
  report::Summary summary;
  bool failure_threshold_exceeded = false;
};

/// Runs the evaluation into cfg.output_dir:
///   config.resolved.json, run.json, records.jsonl, timings.jsonl, summary.json, report.txt
/// Records already in records.jsonl are kept (resume); a partial final line is
/// discarded. Throws ConfigError when the directory holds a run with another
/// configuration, BackendError when a backend lacks a required operation.
RunResult run_eval(const config::RunConfig& cfg, const RunOptions& options = {});

}  // namespace punc::pipeline
