#pragma once

// Text-space similarity metrics with separate precision and recall.
//
// Naming follows the usual summarization convention: the *candidate* is the
// generated caption and the *reference* is the prompt. Precision is computed
// over the candidate side, recall over the reference side.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace punc::textsim {

class TokenSequence {
 public:
  TokenSequence() = default;

  /// Tokens must be non-empty and whitespace-free; throws PreconditionError otherwise.
  explicit TokenSequence(std::vector<std::string> tokens);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  /// Tokens joined by single spaces.
  std::string joined() const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<std::string> tokens_;
};

struct TokenizePolicy {
  bool lowercase = true;
  bool strip_punctuation = true;
};

/// Lowercase, split on Unicode whitespace, strip leading/trailing punctuation,
/// drop tokens that become empty.
TokenSequence tokenize(std::string_view text, const TokenizePolicy& policy = {});

using Gram = std::vector<std::string>;

struct GramMultiset {
  std::map<Gram, std::size_t> grams;
  std::size_t n = 1;

  std::size_t total() const noexcept;
  std::size_t count(const Gram& g) const;
};

/// Sliding-window n-grams with multiplicity. Throws PreconditionError for n = 0.
GramMultiset ngrams(const TokenSequence& seq, std::size_t n);

enum class MetricKind { rouge_n, rouge_l, bertscore };

struct MetricSelector {
  MetricKind kind = MetricKind::rouge_n;
  std::size_t n = 1;  // only meaningful for rouge_n

  static MetricSelector rouge(std::size_t n) { return {MetricKind::rouge_n, n}; }
  static MetricSelector rouge_longest() { return {MetricKind::rouge_l, 0}; }
  static MetricSelector bert() { return {MetricKind::bertscore, 0}; }

  /// "rouge_1", "rouge_2", ..., "rouge_l", "bertscore".
  std::string name() const;

  /// Inverse of name(); throws ConfigError on unknown names.
  static MetricSelector parse(std::string_view name);

  friend bool operator==(const MetricSelector&, const MetricSelector&) = default;
};

struct SimilarityReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  MetricSelector metric;
  bool degenerate = false;  // an empty-input convention was applied
};

/// Builds a report with f1 derived from precision and recall.
SimilarityReport make_report(double precision, double recall, MetricSelector metric,
                             bool degenerate);

SimilarityReport rouge_n(const TokenSequence& candidate, const TokenSequence& reference,
                         std::size_t n);

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

SimilarityReport rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

/// One row per token. All rows share a dimension and have non-zero norm.
class EmbeddingMatrix {
 public:
  /// Empty matrix with the given dimension (dim >= 1).
  explicit EmbeddingMatrix(std::size_t dim);

  /// Throws PreconditionError on ragged rows, dim 0, or zero-norm rows.
  EmbeddingMatrix(std::vector<std::vector<double>> rows, std::size_t dim);

  static EmbeddingMatrix from_rows(std::vector<std::vector<double>> rows);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
  std::size_t dim_;
};

/// dot(a, b) / (|a| |b|). Bitwise symmetric in its arguments.
double cosine(std::span<const double> a, std::span<const double> b);

/// Greedy max-cosine matching. Each per-token best cosine is clamped to [0, 1]
/// so anti-correlated tokens count as unmatched rather than negative.
/// Throws PreconditionError on empty input or dimension mismatch.
SimilarityReport bertscore(const EmbeddingMatrix& candidate, const EmbeddingMatrix& reference);

/// Source of token embeddings for bertscore.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::vector<EmbeddingMatrix> embed_texts(const std::vector<std::string>& texts) = 0;
};

/// Similarity of a caption (candidate) against its prompt (reference).
/// `embedder` is required for bertscore and ignored otherwise.
SimilarityReport score_alignment(std::string_view prompt, std::string_view caption,
                                 const MetricSelector& metric, TextEmbedder* embedder = nullptr);

}  // namespace punc::textsim
