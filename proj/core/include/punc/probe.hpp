#pragma once

// Application probes: generate images for a grid of subjects (optionally
// crossed with attribute lists) and ask a captioner yes/no questions about them.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "punc/backend.hpp"

namespace punc::probe {

struct ProbeConfig {
  std::vector<std::string> subjects;
  /// Attribute axes, crossed with each other and with the subjects (e.g. gender x race).
  std::vector<std::vector<std::string>> attributes;
  int prompts_per_cell = 10;
  /// Placeholders: {subject}, {attributes}.
  std::string prompt_template = "A photo of {attributes} {subject}";
  /// Placeholder: {target}, the subject or the cell's attributes depending on `target`.
  std::string question_template = "Is {target} in this image? Answer yes or no.";
  enum class Target { subject, attributes } target = Target::subject;
  std::uint64_t seed = 0;
  int max_in_flight = 4;

  /// Throws ConfigError on an empty subject list, empty attribute axis,
  /// prompts_per_cell < 1, or attribute target without attributes.
  void validate() const;
};

struct ProbeCell {
  std::string subject;
  std::vector<std::string> attributes;
  int n = 0;  // successful probes
  int positives = 0;
  int failures = 0;
  double accuracy = 0.0;  // positives / n
  bool partial = false;   // some probes failed
  std::vector<std::string> errors;

  friend bool operator==(const ProbeCell&, const ProbeCell&) = default;
};

struct SubjectAggregate {
  std::string subject;
  int n = 0;
  int positives = 0;
  double accuracy = 0.0;

  friend bool operator==(const SubjectAggregate&, const SubjectAggregate&) = default;
};

struct ProbeGrid {
  std::string model_id;
  std::vector<ProbeCell> cells;  // subject-major, attributes in axis order
  std::vector<SubjectAggregate> per_subject;
  double average = 0.0;  // mean of per-subject accuracies

  friend bool operator==(const ProbeGrid&, const ProbeGrid&) = default;
};

/// Prompt text for one cell.
std::string render_prompt(const ProbeConfig& cfg, const std::string& subject,
                          const std::vector<std::string>& attributes);

/// Question text for one cell.
std::string render_question(const ProbeConfig& cfg, const std::string& subject,
                            const std::vector<std::string>& attributes);

/// Generates prompts_per_cell images per cell with `generator` and probes each
/// with `captioner`. Backend failures are tallied per cell, never thrown.
ProbeGrid probe_concept_grid(const ProbeConfig& cfg, backend::Backend& generator,
                             backend::Backend& captioner);

struct LabeledImage {
  backend::ImageRef image;
  std::string subject;
  bool is_subject = false;
};

struct RecognizerStats {
  std::string subject;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int tn = 0;
  int failures = 0;
  double precision = 0.0;  // tp / (tp + fp), 0 when undefined
  double recall = 0.0;     // tp / (tp + fn), 0 when undefined

  friend bool operator==(const RecognizerStats&, const RecognizerStats&) = default;
};

/// Treats probe answers as classifier outputs. One entry per subject, in order
/// of first appearance. Throws PreconditionError for an empty set.
std::vector<RecognizerStats> probe_recognizer_validation(const std::vector<LabeledImage>& labeled,
                                                         backend::Backend& captioner,
                                                         const std::string& question_template);

ProbeConfig probe_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProbeGrid& grid);
nlohmann::json to_json(const std::vector<RecognizerStats>& stats);

/// Aligned text table of the grid cells followed by per-subject aggregates.
std::string render_grid(const ProbeGrid& grid);

}  // namespace punc::probe
