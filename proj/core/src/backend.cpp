#include "punc/backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <nlohmann/json.hpp>

#include "punc/errors.hpp"
#include "punc/hash.hpp"

namespace punc::backend {

namespace {

constexpr std::array<std::pair<Capability, std::string_view>, 5> kCapabilityNames = {{
    {Capability::generate, "generate"},
    {Capability::caption, "caption"},
    {Capability::embed, "embed"},
    {Capability::probe, "probe"},
    {Capability::reconstruct, "reconstruct"},
}};

void require(Backend& b, Capability c) {
  if (!b.supports(c)) {
    throw CapabilityError("backend '" + b.config().model_id + "' does not support " + to_string(c));
  }
}

}  // namespace

std::string to_string(Capability c) {
  for (const auto& [cap, name] : kCapabilityNames) {
    if (cap == c) return std::string(name);
  }
  return "unknown";
}

Capability parse_capability(std::string_view name) {
  for (const auto& [cap, n] : kCapabilityNames) {
    if (n == name) return cap;
  }
  throw ParseError("unknown capability '" + std::string(name) + "'");
}

CapabilitySet all_capabilities() {
  CapabilitySet out;
  for (const auto& [cap, name] : kCapabilityNames) out.insert(cap);
  return out;
}

void BackendConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("backend endpoint is empty");
  if (!is_mock() && !endpoint.starts_with("http://")) {
    throw ConfigError("backend endpoint must be http://... or mock:..., got '" + endpoint + "'");
  }
  if (inference_steps < 1) throw ConfigError("inference_steps must be >= 1");
  if (timeout_ms <= 0) throw ConfigError("timeout_ms must be > 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (retry_backoff_ms < 0) throw ConfigError("retry_backoff_ms must be >= 0");
  if (max_caption_tokens < 1) throw ConfigError("max_caption_tokens must be >= 1");
}

std::string BackendConfig::identity() const {
  nlohmann::json j{{"endpoint", endpoint},
                   {"model_id", model_id},
                   {"steps", inference_steps},
                   {"guidance", guidance_scale ? nlohmann::json(*guidance_scale) : nlohmann::json()},
                   {"max_caption_tokens", max_caption_tokens}};
  return j.dump();
}

BackendConfig BackendConfig::profile(std::string_view name) {
  BackendConfig c;
  c.model_id = std::string(name);
  if (name == "sd15") {
    c.model_id = "sd-legacy/stable-diffusion-v1-5";
  } else if (name == "sdxl") {
    c.model_id = "stabilityai/stable-diffusion-xl-base-1.0";
  } else if (name == "pixart_sigma") {
    c.model_id = "PixArt-alpha/PixArt-Sigma";
    c.guidance_scale = 4.5;
    c.max_caption_tokens = 300;
  } else if (name == "sdxs") {
    c.model_id = "IDKiro/sdxs-512-0.9";
    c.inference_steps = 1;
    c.guidance_scale.reset();
  } else {
    throw ConfigError("unknown backend profile '" + std::string(name) +
                      "' (expected sd15, sdxl, pixart_sigma or sdxs)");
  }
  return c;
}

ImageRef ImageRef::from_payload(std::string payload, std::string producer, std::uint64_t seed) {
  ImageRef r;
  r.id = sha256_hex(payload);
  r.payload = std::move(payload);
  r.producer = std::move(producer);
  r.seed = seed;
  return r;
}

ReconstructionSpec ReconstructionSpec::noise(double t) {
  ReconstructionSpec s;
  s.kind = Kind::noise_to_t;
  s.t = t;
  return s;
}

ReconstructionSpec ReconstructionSpec::mask(std::string pattern, double coverage) {
  ReconstructionSpec s;
  s.kind = Kind::mask;
  s.pattern = std::move(pattern);
  s.coverage = coverage;
  return s;
}

void ReconstructionSpec::validate() const {
  if (kind == Kind::noise_to_t && !(t > 0.0 && t <= 1.0)) {
    throw PreconditionError("reconstruction t must lie in (0, 1]");
  }
  if (kind == Kind::mask && !(coverage > 0.0 && coverage <= 1.0)) {
    throw PreconditionError("mask coverage must lie in (0, 1]");
  }
}

Backend::Backend(BackendConfig config) : config_(std::move(config)) { config_.validate(); }

bool Backend::supports(Capability c) { return do_capabilities().count(c) > 0; }

ImageRef Backend::generate(std::string_view prompt, std::uint64_t seed) {
  const auto first = prompt.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) throw PreconditionError("prompt is empty");
  require(*this, Capability::generate);
  return do_generate(prompt, seed);
}

std::string Backend::caption(const ImageRef& image, std::string_view instruction,
                             std::optional<int> max_tokens) {
  if (image.id.empty() && !image.has_payload()) throw PreconditionError("image is not resolvable");
  const int budget = max_tokens.value_or(config_.max_caption_tokens);
  if (budget < 1) throw PreconditionError("caption token budget must be >= 1");
  require(*this, Capability::caption);
  return do_caption(image, instruction, budget);
}

std::vector<textsim::EmbeddingMatrix> Backend::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw PreconditionError("embed needs at least one text");
  require(*this, Capability::embed);
  auto out = do_embed(texts);
  if (out.size() != texts.size()) {
    throw ProtocolError("embed returned " + std::to_string(out.size()) + " matrices for " +
                        std::to_string(texts.size()) + " texts");
  }
  for (const auto& m : out) {
    if (m.dim() != out.front().dim()) throw ProtocolError("embed returned mixed dimensions");
  }
  return out;
}

bool Backend::probe(const ImageRef& image, std::string_view question) {
  if (question.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw PreconditionError("probe question is empty");
  }
  if (image.id.empty() && !image.has_payload()) throw PreconditionError("image is not resolvable");
  require(*this, Capability::probe);
  return do_probe(image, question);
}

ImageRef Backend::reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                              std::string_view prompt, std::uint64_t seed) {
  spec.validate();
  if (image.id.empty() && !image.has_payload()) throw PreconditionError("image is not resolvable");
  require(*this, Capability::reconstruct);
  return do_reconstruct(image, spec, prompt, seed);
}

std::string truncate_caption(std::string_view caption, int max_tokens) {
  if (max_tokens < 1) return {};
  const auto budget = static_cast<std::size_t>(max_tokens);
  const auto toks = textsim::tokenize(caption);
  if (toks.size() <= budget) return std::string(caption);
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  // Keep whole raw words while their token count fits the budget.
  std::size_t kept = 0;
  std::size_t pos = 0;
  std::size_t cut = 0;
  while (pos < caption.size()) {
    while (pos < caption.size() && is_space(caption[pos])) ++pos;
    if (pos >= caption.size()) break;
    std::size_t end = pos;
    while (end < caption.size() && !is_space(caption[end])) ++end;
    const std::size_t word_tokens = textsim::tokenize(caption.substr(pos, end - pos)).size();
    if (kept + word_tokens > budget) break;
    kept += word_tokens;
    cut = end;
    if (kept == budget) break;
    pos = end;
  }
  if (kept == 0) {
    // A single raw word carries more tokens than the budget.
    return textsim::TokenSequence(std::vector<std::string>(toks.tokens().begin(),
                                                           toks.tokens().begin() + max_tokens))
        .joined();
  }
  return std::string(caption.substr(0, cut));
}

}  // namespace punc::backend
