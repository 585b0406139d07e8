#include "punc/baselines.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <mutex>

#include "punc/conceptworld.hpp"
#include "punc/errors.hpp"
#include "punc/parallel.hpp"

namespace punc::baselines {

namespace {

constexpr std::string_view kArrayMagic = "PARR";
constexpr unsigned char kArrayVersion = 1;

std::mutex& plugin_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, SimilarityPlugin>& plugins() {
  static std::map<std::string, SimilarityPlugin> registry;
  return registry;
}

void require_capability(backend::Backend& b, backend::Capability c) {
  if (!b.supports(c)) {
    throw CapabilityError("backend '" + b.config().model_id + "' does not support " +
                          backend::to_string(c));
  }
}

// Reconstructs the baseline generation under each spec and measures similarity.
std::vector<double> reconstruction_similarities(std::string_view prompt, backend::Backend& b,
                                                const std::vector<backend::ReconstructionSpec>& specs,
                                                std::uint64_t seed, const ImageSimilarityConfig& sim) {
  require_capability(b, backend::Capability::generate);
  require_capability(b, backend::Capability::reconstruct);
  const backend::ImageRef base = b.generate(prompt, seed);
  std::vector<double> parts(specs.size());
  parallel_for(specs.size(), static_cast<std::size_t>(b.config().max_in_flight), [&](std::size_t i) {
    const backend::ImageRef rec = b.reconstruct(base, specs[i], prompt, seed);
    parts[i] = image_similarity(rec, base, sim);
  });
  return parts;
}

}  // namespace

void register_similarity_plugin(const std::string& id, SimilarityPlugin fn) {
  std::lock_guard lock(plugin_mutex());
  plugins()[id] = std::move(fn);
}

bool has_similarity_plugin(const std::string& id) {
  std::lock_guard lock(plugin_mutex());
  return plugins().count(id) > 0;
}

std::string to_string(SimilarityMetric m) {
  switch (m) {
    case SimilarityMetric::mse: return "mse";
    case SimilarityMetric::concept_jaccard: return "concept_jaccard";
    case SimilarityMetric::plugin: return "plugin";
  }
  return "unknown";
}

SimilarityMetric parse_similarity_metric(std::string_view name) {
  if (name == "mse") return SimilarityMetric::mse;
  if (name == "concept_jaccard") return SimilarityMetric::concept_jaccard;
  if (name == "plugin") return SimilarityMetric::plugin;
  throw ConfigError("unknown image similarity '" + std::string(name) +
                    "' (expected mse, concept_jaccard or plugin)");
}

std::string encode_numeric_payload(std::span<const double> values) {
  std::string out(kArrayMagic);
  out.push_back(static_cast<char>(kArrayVersion));
  const auto n = static_cast<std::uint32_t>(values.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
  return out;
}

std::vector<double> decode_numeric_payload(std::string_view payload, Normalization normalization) {
  std::vector<double> out;
  if (payload.size() >= 9 && payload.starts_with(kArrayMagic) &&
      static_cast<unsigned char>(payload[4]) == kArrayVersion) {
    std::uint32_t n = 0;
    for (int k = 5; k < 9; ++k) n = (n << 8) | static_cast<unsigned char>(payload[k]);
    if (payload.size() != 9 + 8 * static_cast<std::size_t>(n)) {
      throw PreconditionError("numeric payload length does not match its count");
    }
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[9 + 8 * i + k])) << (8 * k);
      }
      out.push_back(std::bit_cast<double>(bits));
    }
    return out;
  }
  out.reserve(payload.size());
  const double scale = normalization == Normalization::per_pixel_unit_scale ? 1.0 / 255.0 : 1.0;
  for (char c : payload) out.push_back(static_cast<unsigned char>(c) * scale);
  return out;
}

double image_similarity(const backend::ImageRef& a, const backend::ImageRef& b,
                        const ImageSimilarityConfig& cfg) {
  switch (cfg.metric) {
    case SimilarityMetric::concept_jaccard:
      return conceptworld::jaccard(conceptworld::decode_pseudo_image(a.payload),
                                   conceptworld::decode_pseudo_image(b.payload));
    case SimilarityMetric::mse: {
      const auto x = decode_numeric_payload(a.payload, cfg.normalization);
      const auto y = decode_numeric_payload(b.payload, cfg.normalization);
      if (x.size() != y.size()) {
        throw PreconditionError("image shapes differ: " + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()));
      }
      if (x.empty()) return 1.0;
      double sum = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
      return 1.0 / (1.0 + sum / static_cast<double>(x.size()));
    }
    case SimilarityMetric::plugin: {
      SimilarityPlugin fn;
      {
        std::lock_guard lock(plugin_mutex());
        const auto it = plugins().find(cfg.plugin_id);
        if (it == plugins().end()) throw ConfigError("no similarity plugin '" + cfg.plugin_id + "'");
        fn = it->second;
      }
      const double s = fn(a, b);
      if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("similarity plugin returned a value outside [0,1]");
      return s;
    }
  }
  throw PreconditionError("unsupported similarity metric");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::ddpm_ood: return "ddpm_ood";
    case Method::lmd: return "lmd";
    case Method::twoxdm: return "twoxdm";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "ddpm_ood") return Method::ddpm_ood;
  if (name == "lmd") return Method::lmd;
  if (name == "twoxdm" || name == "2xdm") return Method::twoxdm;
  throw ConfigError("unknown baseline '" + std::string(name) + "' (expected ddpm_ood, lmd or twoxdm)");
}

BaselineScore aggregate(Method method, std::vector<double> parts) {
  if (parts.empty()) throw PreconditionError("baseline needs at least one similarity");
  double sum = 0.0;
  for (double p : parts) sum += p;
  BaselineScore s;
  s.value = 1.0 - sum / static_cast<double>(parts.size());
  s.parts = std::move(parts);
  s.method = method;
  return s;
}

BaselineScore twoxdm_score(std::string_view prompt, backend::Backend& backend,
                           std::pair<std::uint64_t, std::uint64_t> seeds,
                           const ImageSimilarityConfig& sim) {
  if (seeds.first == seeds.second) throw PreconditionError("2XDM needs two distinct seeds");
  require_capability(backend, backend::Capability::generate);
  const backend::ImageRef first = backend.generate(prompt, seeds.first);
  const backend::ImageRef second = backend.generate(prompt, seeds.second);
  return aggregate(Method::twoxdm, {image_similarity(first, second, sim)});
}

BaselineScore ddpm_ood_score(std::string_view prompt, backend::Backend& backend,
                             std::span<const double> timesteps, std::uint64_t seed,
                             const ImageSimilarityConfig& sim) {
  if (timesteps.empty()) throw PreconditionError("DDPM-OOD needs at least one timestep");
  std::vector<backend::ReconstructionSpec> specs;
  for (double t : timesteps) {
    specs.push_back(backend::ReconstructionSpec::noise(t));
    specs.back().validate();
  }
  return aggregate(Method::ddpm_ood, reconstruction_similarities(prompt, backend, specs, seed, sim));
}

BaselineScore lmd_score(std::string_view prompt, backend::Backend& backend,
                        std::span<const MaskSpec> masks, std::uint64_t seed,
                        const ImageSimilarityConfig& sim) {
  if (masks.empty()) throw PreconditionError("LMD needs at least one mask");
  std::vector<backend::ReconstructionSpec> specs;
  for (const auto& m : masks) {
    specs.push_back(backend::ReconstructionSpec::mask(m.pattern, m.coverage));
    specs.back().validate();
  }
  return aggregate(Method::lmd, reconstruction_similarities(prompt, backend, specs, seed, sim));
}

}  // namespace punc::baselines
