#pragma once

#include <cstdint>
#include <string_view>

namespace lopt {

/// Counter-based splittable generator.
///
/// Draw k of a stream is splitmix64_mix(key + k * golden_gamma), where the key
/// is derived from (seed, stream). The output depends only on integer
/// arithmetic, so sequences are identical on every platform. Child streams
/// get a key mixed from the parent key and the child index; a stream object
/// has a single owner and parallel work uses split() children.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-counter-v1";

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (both variates are used).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  RngStream split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t draws() const { return counter_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace lopt
