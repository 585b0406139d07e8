#pragma once

// Per-prompt run records, persisted one JSON object per line.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "punc/baselines.hpp"
#include "punc/textsim.hpp"

namespace punc::record {

inline constexpr int kRecordVersion = 1;

struct MetricEntry {
  // Set on success.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
  std::string component;     // "precision" or "recall"
  double uncertainty = 0.0;  // 1 - component
  std::optional<std::string> error;

  double value_of(std::string_view component_name) const {
    return component_name == "precision" ? precision : recall;
  }

  friend bool operator==(const MetricEntry&, const MetricEntry&) = default;
};

struct BaselineEntry {
  double value = 0.0;
  std::vector<double> parts;
  std::string method;
  std::optional<std::string> error;

  friend bool operator==(const BaselineEntry&, const BaselineEntry&) = default;
};

struct RunRecord {
  int record_version = kRecordVersion;
  std::string prompt_id;
  std::string group;
  std::string dataset;
  std::string text;
  int repeat = 0;
  std::uint64_t seed = 0;
  std::string instruction;
  std::optional<std::string> image_id;
  std::optional<std::string> caption;
  std::map<std::string, MetricEntry> metrics;      // keyed by metric name
  std::map<std::string, BaselineEntry> baselines;  // keyed by baseline name
  std::optional<std::string> error;                // generation or captioning failure

  /// Unique within a run: "<prompt_id>#<repeat>".
  std::string key() const { return prompt_id + "#" + std::to_string(repeat); }

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

nlohmann::json to_json(const RunRecord& r);

/// Throws ParseError on missing fields or an unsupported record_version.
RunRecord from_json(const nlohmann::json& j);

/// Compact single-line JSON with sorted keys.
std::string to_line(const RunRecord& r);

}  // namespace punc::record
