#pragma once

// Image-space uncertainty baselines adapted to text-to-image generation:
//   ddpm_ood: noise the generation to several t, denoise, compare to the generation
//   lmd:      mask portions of the generation, inpaint, compare to the generation
//   twoxdm:   two generations from different seeds, compare them
// Each returns 1 - mean similarity, so higher means more uncertain.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "punc/backend.hpp"

namespace punc::baselines {

enum class SimilarityMetric { mse, concept_jaccard, plugin };
enum class Normalization { none, per_pixel_unit_scale };

using SimilarityPlugin = std::function<double(const backend::ImageRef&, const backend::ImageRef&)>;

/// Registers an external image similarity (e.g. a perceptual-distance service)
/// under `id`. The function must return values in [0, 1].
void register_similarity_plugin(const std::string& id, SimilarityPlugin fn);
bool has_similarity_plugin(const std::string& id);

struct ImageSimilarityConfig {
  SimilarityMetric metric = SimilarityMetric::concept_jaccard;
  Normalization normalization = Normalization::none;
  std::string plugin_id;  // metric == plugin
};

std::string to_string(SimilarityMetric m);
SimilarityMetric parse_similarity_metric(std::string_view name);

/// Numeric-array payload: "PARR", version byte, u32 count (big-endian), then
/// IEEE-754 doubles little-endian.
std::string encode_numeric_payload(std::span<const double> values);

/// Decodes a numeric-array payload; any other payload is read as raw bytes
/// (0..255, or 0..1 under per_pixel_unit_scale).
std::vector<double> decode_numeric_payload(std::string_view payload, Normalization normalization);

/// Similarity in [0, 1]. mse: 1 / (1 + MSE); concept_jaccard: Jaccard of the
/// decoded pseudo-image concept sets. Throws PreconditionError on shape mismatch.
double image_similarity(const backend::ImageRef& a, const backend::ImageRef& b,
                        const ImageSimilarityConfig& cfg);

enum class Method { ddpm_ood, lmd, twoxdm };

std::string to_string(Method m);
Method parse_method(std::string_view name);

struct BaselineScore {
  double value = 0.0;
  std::vector<double> parts;  // similarities, in the order the timesteps or masks were given
  Method method = Method::twoxdm;
};

/// value = 1 - mean(parts). Throws PreconditionError for empty parts.
BaselineScore aggregate(Method method, std::vector<double> parts);

BaselineScore twoxdm_score(std::string_view prompt, backend::Backend& backend,
                           std::pair<std::uint64_t, std::uint64_t> seeds,
                           const ImageSimilarityConfig& sim);

BaselineScore ddpm_ood_score(std::string_view prompt, backend::Backend& backend,
                             std::span<const double> timesteps, std::uint64_t seed,
                             const ImageSimilarityConfig& sim);

struct MaskSpec {
  std::string pattern;
  double coverage = 0.5;
};

BaselineScore lmd_score(std::string_view prompt, backend::Backend& backend,
                        std::span<const MaskSpec> masks, std::uint64_t seed,
                        const ImageSimilarityConfig& sim);

}  // namespace punc::baselines
