#pragma once

// Hand-rolled generators for property tests. std::mt19937_64 is portable;
// only the engine output is used, never the standard distributions.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t u64() { return eng_(); }
  /// Uniform in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  /// Uniform in [lo, hi].
  int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double real(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool coin(double p = 0.5) { return unit() < p; }

 private:
  std::mt19937_64 eng_;
};

inline std::vector<std::string> tokens(Rng& r, std::size_t max_len, std::size_t alphabet) {
  std::vector<std::string> out(r.below(max_len + 1));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + r.below(alphabet)));
  return out;
}

inline std::vector<std::vector<double>> matrix(Rng& r, std::size_t rows, std::size_t dim) {
  std::vector<std::vector<double>> m(rows, std::vector<double>(dim));
  for (auto& row : m) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : row) {
        v = r.real(-1.0, 1.0);
        norm += v * v;
      }
    } while (norm == 0.0);
  }
  return m;
}

/// Scores drawn from a small grid so ties are common.
inline std::vector<double> scores(Rng& r, std::size_t n, int levels) {
  std::vector<double> out(n);
  for (auto& s : out) s = static_cast<double>(r.range(0, levels - 1)) / levels;
  return out;
}

}  // namespace gen
