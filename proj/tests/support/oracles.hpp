#pragma once

// Independent reference implementations used by unit and acceptance tests.
// Deliberately naive: brute-force counting, full DP tables, exhaustive
// threshold sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

struct PR {
  double precision = 0.0;
  double recall = 0.0;
};

inline std::vector<Tokens> all_grams(const Tokens& t, std::size_t n) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Tokens>& grams, const Tokens& g) {
  return static_cast<std::size_t>(std::count(grams.begin(), grams.end(), g));
}

/// ROUGE-n by listing every gram and counting occurrences by linear scans.
inline PR rouge_n(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto gc = all_grams(cand, n);
  const auto gr = all_grams(ref, n);
  std::vector<Tokens> distinct;
  for (const auto& g : gc) {
    if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
  }
  std::size_t overlap = 0;
  for (const auto& g : distinct) overlap += std::min(occurrences(gc, g), occurrences(gr, g));
  PR pr;
  if (!gc.empty()) pr.precision = static_cast<double>(overlap) / static_cast<double>(gc.size());
  if (!gr.empty()) pr.recall = static_cast<double>(overlap) / static_cast<double>(gr.size());
  return pr;
}

/// Textbook full-table LCS.
inline std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

inline PR rouge_l(const Tokens& cand, const Tokens& ref) {
  const double l = static_cast<double>(lcs(cand, ref));
  PR pr;
  if (!cand.empty()) pr.precision = l / static_cast<double>(cand.size());
  if (!ref.empty()) pr.recall = l / static_cast<double>(ref.size());
  return pr;
}

using Matrix = std::vector<std::vector<double>>;

inline double cos_sim(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

/// Greedy max-cosine per side, best match clamped to [0, 1], averaged.
inline PR bertscore(const Matrix& cand, const Matrix& ref) {
  auto side = [](const Matrix& from, const Matrix& to) {
    double sum = 0.0;
    for (const auto& x : from) {
      double best = -2.0;
      for (const auto& y : to) best = std::max(best, cos_sim(x, y));
      sum += std::clamp(best, 0.0, 1.0);
    }
    return sum / static_cast<double>(from.size());
  };
  return {side(cand, ref), side(ref, cand)};
}

/// Pairwise count: wins + ties / 2 over all (pos, neg) pairs.
inline double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline std::vector<double> thresholds_desc(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> t(pos);
  t.insert(t.end(), neg.begin(), neg.end());
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

inline std::size_t at_least(const std::vector<double>& v, double t) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double x) { return x >= t; }));
}

/// Step-interpolated average precision, recomputing counts at every threshold.
inline double aupr(const std::vector<double>& pos, const std::vector<double>& neg) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds_desc(pos, neg)) {
    const double tp = static_cast<double>(at_least(pos, t));
    const double fp = static_cast<double>(at_least(neg, t));
    const double recall = tp / static_cast<double>(pos.size());
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

/// FPR at the largest threshold reaching the target TPR (flag when score >= threshold).
inline double fpr_at_tpr(const std::vector<double>& pos, const std::vector<double>& neg, double target) {
  for (double t : thresholds_desc(pos, neg)) {
    const double tpr = static_cast<double>(at_least(pos, t)) / static_cast<double>(pos.size());
    if (tpr >= target) return static_cast<double>(at_least(neg, t)) / static_cast<double>(neg.size());
  }
  return 1.0;
}

}  // namespace oracle
