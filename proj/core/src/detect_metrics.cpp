#include "punc/detect_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "punc/errors.hpp"

namespace punc::detect {

namespace {

void check_inputs(std::span<const double> pos, std::span<const double> neg, double target_tpr) {
  if (pos.empty() || neg.empty()) {
    throw PreconditionError("detection metrics need at least one positive and one negative");
  }
  for (double s : pos) {
    if (!std::isfinite(s)) throw PreconditionError("non-finite positive score");
  }
  for (double s : neg) {
    if (!std::isfinite(s)) throw PreconditionError("non-finite negative score");
  }
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
    throw PreconditionError("target TPR must lie in (0, 1]");
  }
}

struct Sweep {
  // Twice the AUROC numerator: 2 * wins + ties, exact in integers.
  unsigned long long auroc_twice = 0;
  double aupr = 0.0;
  double fpr_at_target = 1.0;
};

Sweep sweep(std::span<const double> pos, std::span<const double> neg, double target_tpr) {
  std::vector<double> p(pos.begin(), pos.end());
  std::vector<double> n(neg.begin(), neg.end());
  std::sort(p.begin(), p.end(), std::greater<>());
  std::sort(n.begin(), n.end(), std::greater<>());

  const auto n_pos = static_cast<unsigned long long>(p.size());
  const auto n_neg = static_cast<unsigned long long>(n.size());
  Sweep out;
  bool target_reached = false;
  unsigned long long tp = 0, fp = 0;
  std::size_t i = 0, j = 0;
  double prev_recall = 0.0;
  // Walk distinct thresholds from the highest score down.
  while (i < p.size() || j < n.size()) {
    double tau;
    if (i < p.size() && j < n.size()) {
      tau = std::max(p[i], n[j]);
    } else {
      tau = i < p.size() ? p[i] : n[j];
    }
    unsigned long long gp = 0, gn = 0;
    while (i < p.size() && p[i] == tau) ++gp, ++i;
    while (j < n.size() && n[j] == tau) ++gn, ++j;

    // Positives in this group beat every negative below tau and tie with gn.
    const unsigned long long below = n_neg - fp - gn;
    out.auroc_twice += gp * (2 * below + gn);

    tp += gp;
    fp += gn;
    if (gp > 0) {
      const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      out.aupr += (recall - prev_recall) * precision;
      prev_recall = recall;
    }
    if (!target_reached &&
        static_cast<double>(tp) / static_cast<double>(n_pos) >= target_tpr) {
      target_reached = true;
      out.fpr_at_target = static_cast<double>(fp) / static_cast<double>(n_neg);
    }
  }
  return out;
}

double auroc_from_twice(unsigned long long twice, std::size_t n_pos, std::size_t n_neg) {
  return static_cast<double>(twice) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double auroc(std::span<const double> pos, std::span<const double> neg) {
  check_inputs(pos, neg, 1.0);
  return auroc_from_twice(sweep(pos, neg, 1.0).auroc_twice, pos.size(), neg.size());
}

double aupr(std::span<const double> pos, std::span<const double> neg) {
  check_inputs(pos, neg, 1.0);
  return sweep(pos, neg, 1.0).aupr;
}

double fpr_at_tpr(std::span<const double> pos, std::span<const double> neg, double target_tpr) {
  check_inputs(pos, neg, target_tpr);
  return sweep(pos, neg, target_tpr).fpr_at_target;
}

DetectionReport evaluate_detection(std::span<const double> pos, std::span<const double> neg,
                                   double target_tpr) {
  check_inputs(pos, neg, target_tpr);
  const Sweep s = sweep(pos, neg, target_tpr);
  DetectionReport r;
  r.auroc = auroc_from_twice(s.auroc_twice, pos.size(), neg.size());
  r.aupr = s.aupr;
  r.fpr95 = s.fpr_at_target;
  r.n_pos = pos.size();
  r.n_neg = neg.size();
  return r;
}

DetectionReport evaluate_detection(std::span<const ScoredSample> samples, double target_tpr) {
  std::vector<double> pos, neg;
  for (const auto& s : samples) {
    (s.label == Label::uncertain_positive ? pos : neg).push_back(s.score);
  }
  return evaluate_detection(pos, neg, target_tpr);
}

}  // namespace punc::detect
