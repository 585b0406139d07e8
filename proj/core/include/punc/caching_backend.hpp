#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "punc/backend.hpp"

namespace punc::backend {

/// Read-through disk cache in front of another backend. Keys hash the operation,
/// its arguments, and a caller-supplied namespace (backend identity). Errors are
/// never cached. Entries are written atomically, so concurrent use is safe.
/// Capabilities are asked once per instance and kept in memory only.
class CachingBackend final : public Backend {
 public:
  CachingBackend(Backend& inner, std::filesystem::path directory, std::string namespace_key);

  std::uint64_t hits() const noexcept { return hits_.load(); }
  std::uint64_t misses() const noexcept { return misses_.load(); }

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
  std::string key_for(const nlohmann::json& request) const;
  std::optional<nlohmann::json> lookup(const std::string& key);
  void store(const std::string& key, const nlohmann::json& value);

  Backend& inner_;
  std::filesystem::path directory_;
  std::string namespace_key_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> tmp_counter_{0};
  std::mutex caps_mutex_;
  std::optional<CapabilitySet> caps_;
};

}  // namespace punc::backend
