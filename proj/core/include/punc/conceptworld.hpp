#pragma once

// Deterministic simulator of generation in an abstract concept space.
//
// A prompt and an image are both reduced to sets of discrete concepts. The
// simulated model drops concepts it does not know (epistemic) and injects
// extra known concepts, more of them for short prompts (aleatoric). Every
// random draw is keyed by (seed, nonce, concept), so results are bit-exact and
// independent of iteration order.

#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace punc::conceptworld {

class ConceptSet {
 public:
  ConceptSet() = default;
  ConceptSet(std::initializer_list<std::string> concepts) : concepts_(concepts) {}
  explicit ConceptSet(const std::set<std::string>& concepts)
      : concepts_(concepts.begin(), concepts.end()) {}

  template <typename It>
  ConceptSet(It first, It last) : concepts_(first, last) {}

  bool contains(std::string_view c) const { return concepts_.find(c) != concepts_.end(); }
  void insert(std::string c) { concepts_.insert(std::move(c)); }
  std::size_t size() const noexcept { return concepts_.size(); }
  bool empty() const noexcept { return concepts_.empty(); }

  /// Sorted by byte order.
  auto begin() const { return concepts_.begin(); }
  auto end() const { return concepts_.end(); }
  const std::set<std::string, std::less<>>& items() const noexcept { return concepts_; }

  std::size_t intersection_size(const ConceptSet& other) const;

  friend bool operator==(const ConceptSet&, const ConceptSet&) = default;

 private:
  std::set<std::string, std::less<>> concepts_;
};

struct WorldParams {
  std::uint64_t seed = 0;
  /// Base per-concept injection probability for each generation.
  double aleatoric_rate = 0.0;
  /// Probability that an unknown prompt concept is dropped.
  double epistemic_drop = 1.0;
  /// Vagueness constant K: injection is scaled by max(1, K / |prompt|).
  double vagueness_k = 4.0;
};

class ConceptWorld {
 public:
  /// Concept ids must be valid tokens (non-empty, lowercase, no whitespace, no
  /// leading/trailing punctuation). `known` must be a subset of `vocabulary`.
  /// Throws ConfigError otherwise.
  ConceptWorld(std::vector<std::string> vocabulary, std::vector<std::string> known,
               WorldParams params = {});

  const ConceptSet& vocabulary() const noexcept { return vocabulary_; }
  const ConceptSet& known() const noexcept { return known_; }
  const WorldParams& params() const noexcept { return params_; }

  bool in_vocabulary(std::string_view c) const { return vocabulary_.contains(c); }
  bool is_known(std::string_view c) const { return known_.contains(c); }

  /// Injection probability applied to each candidate extra concept.
  double injection_probability(std::size_t prompt_size) const;

  /// Concepts mentioned in free text. Multi-word concepts are written with
  /// underscores ("darth_vader") and match either that token or the word run
  /// "darth vader".
  ConceptSet extract(std::string_view text) const;

 private:
  ConceptSet vocabulary_;
  ConceptSet known_;
  WorldParams params_;
  std::size_t max_concept_words_ = 1;
};

/// Simulated generation. Throws PreconditionError for concepts outside the vocabulary.
ConceptSet generate_concepts(const ConceptSet& prompt_concepts, const ConceptWorld& world,
                             std::uint64_t nonce);

/// Re-draws `input` toward a fresh generation of `prompt_concepts`. Each concept
/// is taken from the fresh draw with probability `strength`, otherwise kept as
/// in `input`. strength 0 returns `input`; strength 1 returns the fresh draw,
/// which depends only on the prompt and `seed`. `salt` separates perturbation
/// families (noise vs. mask patterns).
ConceptSet perturb_concepts(const ConceptSet& input, const ConceptSet& prompt_concepts,
                            const ConceptWorld& world, std::uint64_t seed, double strength,
                            std::string_view salt);

struct ConceptPrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  bool degenerate = false;
};

/// precision = |P ∩ I| / |I|, recall = |P ∩ I| / |P|; an empty denominator gives 0.
ConceptPrecisionRecall concept_precision_recall(const ConceptSet& prompt_concepts,
                                                const ConceptSet& image_concepts);

double jaccard(const ConceptSet& a, const ConceptSet& b);

/// Pseudo-image payload: "PCIM", version byte, u32 count, then u32-length-prefixed
/// UTF-8 ids in sorted order. All integers big-endian.
std::string render_pseudo_image(const ConceptSet& image_concepts, const ConceptWorld& world);

/// Throws ParseError on a malformed payload.
ConceptSet decode_pseudo_image(std::string_view payload);

bool is_pseudo_image(std::string_view payload) noexcept;

/// Concept ids in canonical order joined by single spaces, underscores written as
/// spaces. Throws ParseError on a malformed payload or ids outside the vocabulary.
std::string caption_pseudo_image(std::string_view payload, const ConceptWorld& world);

}  // namespace punc::conceptworld
