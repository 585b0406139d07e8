#pragma once

#include <atomic>
#include <cstdint>

#include "punc/backend.hpp"
#include "punc/conceptworld.hpp"

namespace punc::backend {

/// In-process backend over a concept world. Pure function of (world, request,
/// seed) and safe to call concurrently.
///
/// - generate: prompt concepts are the vocabulary terms found in the prompt;
///   the image is the pseudo-image of conceptworld::generate_concepts(.., seed).
/// - caption: the canonical caption of the decoded concepts, truncated to the
///   token budget. The instruction is ignored.
/// - embed: one hash-seeded unit vector per token, so equal tokens embed equally.
/// - probe: "yes" iff a concept named in the question is in the image.
/// - reconstruct: conceptworld::perturb_concepts with strength t or coverage.
class MockBackend final : public Backend {
 public:
  MockBackend(BackendConfig config, conceptworld::ConceptWorld world,
              CapabilitySet capabilities = all_capabilities(), std::size_t embed_dim = 64);

  const conceptworld::ConceptWorld& world() const noexcept { return world_; }

  /// Number of operations served (capability queries excluded).
  std::uint64_t calls() const noexcept { return calls_.load(); }

  /// The deterministic token vector used by embed.
  static std::vector<double> token_vector(std::string_view token, std::size_t dim);

 protected:
  CapabilitySet do_capabilities() override { return capabilities_; }
  ImageRef do_generate(std::string_view prompt, std::uint64_t seed) override;
  std::string do_caption(const ImageRef& image, std::string_view instruction,
                         int max_tokens) override;
  std::vector<textsim::EmbeddingMatrix> do_embed(const std::vector<std::string>& texts) override;
  bool do_probe(const ImageRef& image, std::string_view question) override;
  ImageRef do_reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                          std::string_view prompt, std::uint64_t seed) override;

 private:
  conceptworld::ConceptSet decode(const ImageRef& image) const;
  std::string producer() const { return "mock:" + config().model_id; }

  conceptworld::ConceptWorld world_;
  CapabilitySet capabilities_;
  std::size_t embed_dim_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace punc::backend
