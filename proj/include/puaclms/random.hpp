#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace puaclms {

namespace detail {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based 64-bit generator. Output i is a pure function of
/// (seed, stream, i), so streams can be split per trial and replayed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), key_(detail::mix64(seed ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL))), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent child stream, e.g. one per Monte-Carlo trial.
  RngStream split(std::uint64_t index) const {
    return RngStream(seed_, detail::mix64(stream_ * 0x9E3779B97F4A7C15ULL + index + 1));
  }

  std::uint64_t next_u64() {
    const std::uint64_t c = counter_++;
    return detail::mix64(key_ + detail::mix64(c * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Circular complex Gaussian with E|x|^2 = variance.
  std::complex<double> circular_normal(double variance = 1.0) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
  }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace puaclms
