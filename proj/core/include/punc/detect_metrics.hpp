#pragma once

// Threshold-free detection metrics. Positives are the uncertain (OOD, vague,
// corrupted) samples; scores are uncertainties, so higher means "flag it".

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace punc::detect {

enum class Label { uncertain_positive, in_distribution_negative };

struct ScoredSample {
  double score = 0.0;
  Label label = Label::in_distribution_negative;
};

struct DetectionReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  /// PR-curve interpolation rule; always "step" for reports built here.
  std::string pr_interpolation = "step";

  friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

/// P(score_pos > score_neg) + 0.5 P(tie).
double auroc(std::span<const double> pos, std::span<const double> neg);

/// Average precision: sum over distinct thresholds (descending) of
/// (recall_k - recall_{k-1}) * precision_k. Tied scores form one threshold.
double aupr(std::span<const double> pos, std::span<const double> neg);

/// FPR at the largest threshold whose TPR reaches `target_tpr` (flag if score >= threshold).
double fpr_at_tpr(std::span<const double> pos, std::span<const double> neg,
                  double target_tpr = 0.95);

/// All three metrics from a single sorted sweep.
DetectionReport evaluate_detection(std::span<const double> pos, std::span<const double> neg,
                                   double target_tpr = 0.95);

DetectionReport evaluate_detection(std::span<const ScoredSample> samples,
                                   double target_tpr = 0.95);

}  // namespace punc::detect
