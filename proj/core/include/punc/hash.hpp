#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace punc {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based draw in [0, 1) keyed by (seed, nonce, key, stream). Draws for
/// different keys are independent of evaluation order.
double keyed_uniform(std::uint64_t seed, std::uint64_t nonce, std::string_view key,
                     std::uint64_t stream = 0) noexcept;

std::uint64_t keyed_u64(std::uint64_t seed, std::uint64_t nonce, std::string_view key,
                        std::uint64_t stream = 0) noexcept;

/// Sequential splitmix64 stream. Portable, unlike the standard distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box-Muller.
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

std::string base64_encode(std::string_view bytes);

/// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace punc
