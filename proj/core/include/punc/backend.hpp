#pragma once

// The model boundary. A Backend generates images from prompts, captions them,
// embeds text, answers yes/no probes, and (optionally) reconstructs perturbed
// versions of an image. Implementations: MockBackend (in-process, built on the
// concept world) and HttpBackend (the JSON wire protocol).

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "punc/textsim.hpp"

namespace punc::backend {

enum class Capability { generate, caption, embed, probe, reconstruct };

std::string to_string(Capability c);
/// Throws ParseError on unknown names.
Capability parse_capability(std::string_view name);

using CapabilitySet = std::set<Capability>;

CapabilitySet all_capabilities();

struct BackendConfig {
  /// "http://host:port[/prefix]", "mock:" (world from the run config) or "mock:<world.json>".
  std::string endpoint = "mock:";
  std::string model_id = "mock";
  int inference_steps = 20;
  std::optional<double> guidance_scale = 7.5;
  int max_caption_tokens = 77;
  int timeout_ms = 60000;
  int max_retries = 3;
  int retry_backoff_ms = 100;
  int max_in_flight = 4;
  std::optional<std::string> bearer_token;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  bool is_mock() const { return endpoint.starts_with("mock:"); }

  /// Fields that change backend outputs, as canonical JSON. Used for cache keys.
  std::string identity() const;

  /// Named generation/caption defaults: "sd15", "sdxl", "pixart_sigma", "sdxs".
  static BackendConfig profile(std::string_view name);
};

struct ImageRef {
  std::string id;
  std::string payload;  // may be empty when only a locator is known
  std::optional<std::string> locator;
  std::string producer;
  std::uint64_t seed = 0;

  /// id = SHA-256 of the payload.
  static ImageRef from_payload(std::string payload, std::string producer, std::uint64_t seed);

  bool has_payload() const noexcept { return !payload.empty(); }

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct ReconstructionSpec {
  enum class Kind { noise_to_t, mask };

  Kind kind = Kind::noise_to_t;
  double t = 0.5;         // noise_to_t
  std::string pattern;    // mask
  double coverage = 0.5;  // mask

  static ReconstructionSpec noise(double t);
  static ReconstructionSpec mask(std::string pattern, double coverage);

  /// t and coverage must lie in (0, 1]; 1 means full re-noising / full mask.
  void validate() const;

  /// Perturbation strength: t or coverage.
  double strength() const noexcept { return kind == Kind::noise_to_t ? t : coverage; }
};

/// Non-virtual public interface validates preconditions, then dispatches.
class Backend {
 public:
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendConfig& config() const noexcept { return config_; }

  CapabilitySet capabilities() { return do_capabilities(); }
  bool supports(Capability c);

  ImageRef generate(std::string_view prompt, std::uint64_t seed);

  /// `max_tokens` defaults to config().max_caption_tokens.
  std::string caption(const ImageRef& image, std::string_view instruction,
                      std::optional<int> max_tokens = std::nullopt);

  std::vector<textsim::EmbeddingMatrix> embed(const std::vector<std::string>& texts);

  bool probe(const ImageRef& image, std::string_view question);

  ImageRef reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                       std::string_view prompt, std::uint64_t seed);

 protected:
  explicit Backend(BackendConfig config);

  virtual CapabilitySet do_capabilities() = 0;
  virtual ImageRef do_generate(std::string_view prompt, std::uint64_t seed) = 0;
  virtual std::string do_caption(const ImageRef& image, std::string_view instruction,
                                 int max_tokens) = 0;
  virtual std::vector<textsim::EmbeddingMatrix> do_embed(const std::vector<std::string>& texts) = 0;
  virtual bool do_probe(const ImageRef& image, std::string_view question) = 0;
  virtual ImageRef do_reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                                  std::string_view prompt, std::uint64_t seed) = 0;

 private:
  BackendConfig config_;
};

/// Adapts a backend's embed operation for textsim::score_alignment.
class BackendEmbedder final : public textsim::TextEmbedder {
 public:
  explicit BackendEmbedder(Backend& backend) : backend_(backend) {}
  std::vector<textsim::EmbeddingMatrix> embed_texts(const std::vector<std::string>& texts) override {
    return backend_.embed(texts);
  }

 private:
  Backend& backend_;
};

/// Truncates to the first `max_tokens` whitespace-separated words (normalized tokens count).
std::string truncate_caption(std::string_view caption, int max_tokens);

}  // namespace punc::backend
