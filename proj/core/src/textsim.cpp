#include "punc/textsim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "punc/errors.hpp"

namespace punc::textsim {

namespace {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes consumed
};

// Lenient UTF-8 decoder: invalid lead bytes decode as themselves, one byte long.
CodePoint decode_at(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
  }
  return {b0, 1};
}

bool is_unicode_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punctuation(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xAB: case 0xB7: case 0xBB: case 0xBF:
    case 0x2026: case 0x3001: case 0x3002:
      return true;
    default:
      return c >= 0x2010 && c <= 0x201F;  // dashes and typographic quotes
  }
}

std::string normalize_token(std::string_view raw, const TokenizePolicy& policy) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  if (policy.strip_punctuation) {
    while (begin < end) {
      const CodePoint cp = decode_at(raw, begin);
      if (!is_punctuation(cp.value)) break;
      begin += cp.length;
    }
    // Walk forward to find the last non-punctuation code point.
    std::size_t last_keep_end = begin;
    for (std::size_t i = begin; i < end;) {
      const CodePoint cp = decode_at(raw, i);
      i += cp.length;
      if (!is_punctuation(cp.value)) last_keep_end = i;
    }
    end = last_keep_end;
  }
  std::string out(raw.substr(begin, end - begin));
  if (policy.lowercase) {
    for (char& ch : out) {
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
  }
  return out;
}

std::size_t clipped_overlap(const GramMultiset& a, const GramMultiset& b) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : a.grams) {
    overlap += std::min(count, b.count(gram));
  }
  return overlap;
}

}  // namespace

TokenSequence::TokenSequence(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (const auto& t : tokens_) {
    if (t.empty()) throw PreconditionError("token sequence contains an empty token");
    for (std::size_t i = 0; i < t.size();) {
      const CodePoint cp = decode_at(t, i);
      if (is_unicode_space(cp.value)) {
        throw PreconditionError("token contains whitespace: '" + t + "'");
      }
      i += cp.length;
    }
  }
}

std::string TokenSequence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens_[i];
  }
  return out;
}

TokenSequence tokenize(std::string_view text, const TokenizePolicy& policy) {
  std::vector<std::string> tokens;
  std::size_t start = std::string_view::npos;
  auto flush = [&](std::size_t end) {
    if (start == std::string_view::npos) return;
    std::string tok = normalize_token(text.substr(start, end - start), policy);
    if (!tok.empty()) tokens.push_back(std::move(tok));
    start = std::string_view::npos;
  };
  for (std::size_t i = 0; i < text.size();) {
    const CodePoint cp = decode_at(text, i);
    if (is_unicode_space(cp.value)) {
      flush(i);
    } else if (start == std::string_view::npos) {
      start = i;
    }
    i += cp.length;
  }
  flush(text.size());
  return TokenSequence(std::move(tokens));
}

std::size_t GramMultiset::total() const noexcept {
  std::size_t sum = 0;
  for (const auto& [gram, count] : grams) sum += count;
  return sum;
}

std::size_t GramMultiset::count(const Gram& g) const {
  const auto it = grams.find(g);
  return it == grams.end() ? 0 : it->second;
}

GramMultiset ngrams(const TokenSequence& seq, std::size_t n) {
  if (n == 0) throw PreconditionError("n-gram order must be >= 1");
  GramMultiset out;
  out.n = n;
  const auto& toks = seq.tokens();
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out.grams[Gram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                     toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::string MetricSelector::name() const {
  switch (kind) {
    case MetricKind::rouge_n: return "rouge_" + std::to_string(n);
    case MetricKind::rouge_l: return "rouge_l";
    case MetricKind::bertscore: return "bertscore";
  }
  return "unknown";
}

MetricSelector MetricSelector::parse(std::string_view name) {
  if (name == "rouge_l") return rouge_longest();
  if (name == "bertscore") return bert();
  constexpr std::string_view prefix = "rouge_";
  if (name.starts_with(prefix)) {
    const std::string_view digits = name.substr(prefix.size());
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && n >= 1) return rouge(n);
  }
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected rouge_<n>, rouge_l or bertscore)");
}

SimilarityReport make_report(double precision, double recall, MetricSelector metric,
                             bool degenerate) {
  SimilarityReport r;
  r.precision = precision;
  r.recall = recall;
  r.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  r.metric = metric;
  r.degenerate = degenerate;
  return r;
}

SimilarityReport rouge_n(const TokenSequence& candidate, const TokenSequence& reference,
                         std::size_t n) {
  const GramMultiset c = ngrams(candidate, n);
  const GramMultiset r = ngrams(reference, n);
  const std::size_t c_total = c.total();
  const std::size_t r_total = r.total();
  const std::size_t overlap = clipped_overlap(c, r);
  const double precision = c_total ? static_cast<double>(overlap) / static_cast<double>(c_total) : 0.0;
  const double recall = r_total ? static_cast<double>(overlap) / static_cast<double>(r_total) : 0.0;
  return make_report(precision, recall, MetricSelector::rouge(n), c_total == 0 || r_total == 0);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  const auto& x = a.tokens();
  const auto& y = b.tokens();
  // Iterate over the shorter side in the inner loop; one rolling row.
  const auto& outer = x.size() >= y.size() ? x : y;
  const auto& inner = x.size() >= y.size() ? y : x;
  std::vector<std::size_t> row(inner.size() + 1, 0);
  for (const auto& o : outer) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= inner.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = (o == inner[j - 1]) ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row.back();
}

SimilarityReport rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  const std::size_t lcs = lcs_length(candidate, reference);
  const double precision =
      candidate.empty() ? 0.0 : static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double recall =
      reference.empty() ? 0.0 : static_cast<double>(lcs) / static_cast<double>(reference.size());
  return make_report(precision, recall, MetricSelector::rouge_longest(),
                     candidate.empty() || reference.empty());
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw PreconditionError("embedding dimension must be >= 1");
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::vector<double>> rows, std::size_t dim)
    : rows_(std::move(rows)), dim_(dim) {
  if (dim_ == 0) throw PreconditionError("embedding dimension must be >= 1");
  for (const auto& row : rows_) {
    if (row.size() != dim_) throw PreconditionError("embedding row has wrong dimension");
    double sq = 0.0;
    for (double v : row) {
      if (!std::isfinite(v)) throw PreconditionError("embedding row has a non-finite entry");
      sq += v * v;
    }
    if (sq == 0.0) throw PreconditionError("embedding row has zero norm");
  }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(std::vector<std::vector<double>> rows) {
  if (rows.empty()) throw PreconditionError("from_rows needs at least one row");
  const std::size_t dim = rows.front().size();
  return EmbeddingMatrix(std::move(rows), dim);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  // sqrt(na) * sqrt(nb) keeps the product commutative, so cosine(a,b) == cosine(b,a) bitwise.
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

SimilarityReport bertscore(const EmbeddingMatrix& candidate, const EmbeddingMatrix& reference) {
  if (candidate.empty() || reference.empty()) {
    throw PreconditionError("bertscore needs non-empty embedding matrices");
  }
  if (candidate.dim() != reference.dim()) {
    throw PreconditionError("bertscore dimension mismatch: " + std::to_string(candidate.dim()) +
                            " vs " + std::to_string(reference.dim()));
  }
  const std::size_t nc = candidate.size();
  const std::size_t nr = reference.size();
  std::vector<double> best_c(nc, -2.0), best_r(nr, -2.0);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      const double s = cosine(candidate.rows()[i], reference.rows()[j]);
      best_c[i] = std::max(best_c[i], s);
      best_r[j] = std::max(best_r[j], s);
    }
  }
  auto clamped_mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double s : v) sum += std::clamp(s, 0.0, 1.0);
    return sum / static_cast<double>(v.size());
  };
  return make_report(clamped_mean(best_c), clamped_mean(best_r), MetricSelector::bert(), false);
}

SimilarityReport score_alignment(std::string_view prompt, std::string_view caption,
                                 const MetricSelector& metric, TextEmbedder* embedder) {
  const TokenSequence reference = tokenize(prompt);
  const TokenSequence candidate = tokenize(caption);
  switch (metric.kind) {
    case MetricKind::rouge_n:
      return rouge_n(candidate, reference, metric.n);
    case MetricKind::rouge_l:
      return rouge_l(candidate, reference);
    case MetricKind::bertscore: {
      if (embedder == nullptr) throw PreconditionError("bertscore requires an embedder");
      if (candidate.empty() || reference.empty()) {
        return make_report(0.0, 0.0, metric, true);
      }
      const auto matrices = embedder->embed_texts({std::string(caption), std::string(prompt)});
      if (matrices.size() != 2) {
        throw PreconditionError("embedder returned " + std::to_string(matrices.size()) +
                                " matrices for 2 texts");
      }
      if (matrices[0].empty() || matrices[1].empty()) return make_report(0.0, 0.0, metric, true);
      return bertscore(matrices[0], matrices[1]);
    }
  }
  throw PreconditionError("unsupported metric");
}

}  // namespace punc::textsim
