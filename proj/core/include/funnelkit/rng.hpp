#pragma once

// Counter-based random streams. Every stochastic operation takes a stream
// derived from (seed, label path), so outputs do not depend on the order in
// which independent pieces of work are evaluated.

#include <cstdint>
#include <limits>
#include <string_view>

namespace funnelkit {

// Stable 64-bit non-cryptographic hash: FNV-1a over the bytes followed by the
// murmur3 fmix64 finalizer. Fixed forever; assignment buckets depend on it.
std::uint64_t stable_hash64(std::string_view bytes);
std::uint64_t mix64(std::uint64_t x);

class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::string_view label);

  // Independent sub-streams.
  RngStream child(std::string_view label) const;
  RngStream child(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double uniform();  // [0, 1)
  bool bernoulli(double p);
  double normal();  // standard normal, Box-Muller
  double gamma(double shape);
  double beta(double a, double b);
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)

  std::uint64_t key() const { return key_; }

 private:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace funnelkit
