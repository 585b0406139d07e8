#pragma once

// Aggregation of run records into detection reports, and their file formats.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "punc/detect_metrics.hpp"
#include "punc/record.hpp"

namespace punc::report {

inline constexpr int kSummaryVersion = 1;

struct ReportEntry {
  std::string group;   // positives
  std::string scorer;  // "<metric>/precision", "<metric>/recall" or a baseline name
  std::optional<detect::DetectionReport> report;
  std::size_t excluded_pos = 0;
  std::size_t excluded_neg = 0;
  std::optional<std::string> error;  // set when a class has no usable sample

  friend bool operator==(const ReportEntry&, const ReportEntry&) = default;
};

struct Summary {
  int summary_version = kSummaryVersion;
  std::string negative_group;
  double target_tpr = 0.95;
  std::size_t records = 0;
  std::size_t failures = 0;  // records whose generation or captioning failed
  std::vector<ReportEntry> reports;

  friend bool operator==(const Summary&, const Summary&) = default;
};

struct ScorerSet {
  std::vector<std::string> metrics;    // metric names, each scored by precision and recall
  std::vector<std::string> baselines;  // baseline names

  /// Scorer names in report order.
  std::vector<std::string> names() const;
};

/// One DetectionReport per (uncertain group x scorer). Uncertainty is
/// 1 - component for metrics and the baseline value for baselines. Records
/// whose entry for a scorer is an error are excluded and tallied.
Summary compute_summary(const std::vector<record::RunRecord>& records,
                        const std::string& negative_group,
                        const std::vector<std::string>& uncertain_groups, const ScorerSet& scorers,
                        double target_tpr);

nlohmann::json summary_to_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);

/// Aligned text table, columns: group, scorer, auroc ↑, aupr ↑, fpr95 ↓ (percent), n+, n-, excluded.
std::string render_table(const Summary& s);

struct RecordFile {
  std::vector<record::RunRecord> records;
  /// Byte length of the complete lines; anything after it is a partial write.
  std::uintmax_t valid_bytes = 0;
  bool truncated_tail = false;
};

/// Reads a JSON-lines record file. A final line without a newline is treated as
/// a partial write and ignored. Throws ParseError (with line number) otherwise.
RecordFile read_records(const std::filesystem::path& path);

/// Re-aggregates a run directory (config.resolved.json + records.jsonl) and
/// rewrites summary.json and report.txt. Throws ConfigError for a missing or
/// incomplete directory.
Summary emit_report(const std::filesystem::path& run_dir);

/// Writes summary.json and report.txt into `run_dir`.
void write_summary(const std::filesystem::path& run_dir, const Summary& s);

}  // namespace punc::report
