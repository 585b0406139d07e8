#pragma once

#include <memory>

#include "punc/backend.hpp"

namespace punc::backend {

/// Client for the JSON wire protocol (see wire.hpp).
///
/// Every request carries a request_id derived from its content, reused across
/// retries so servers can deduplicate. Transport failures, 429 and 5xx are
/// retried with exponential backoff up to config().max_retries; at most
/// config().max_in_flight requests are outstanding at once. Safe to call from
/// multiple threads.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  ~HttpBackend() override;

 protected:
  CapabilitySet do_capabilities() override;
  ImageRef do_generate(std::string_view prompt, std::uint64_t seed) override;
  std::string do_caption(const ImageRef& image, std::string_view instruction,
                         int max_tokens) override;
  std::vector<textsim::EmbeddingMatrix> do_embed(const std::vector<std::string>& texts) override;
  bool do_probe(const ImageRef& image, std::string_view question) override;
  ImageRef do_reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                          std::string_view prompt, std::uint64_t seed) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace punc::backend
