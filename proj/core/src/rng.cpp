#include "funnelkit/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace funnelkit {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

std::uint64_t stable_hash64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : key_(mix64(seed ^ stable_hash64(label))) {}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(mix64(key_ ^ stable_hash64(label) ^ 0x5851f42d4c957f2dULL));
}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(mix64(key_ + 0x9e3779b97f4a7c15ULL * (index + 1)) ^ 0x2545f4914f6cdd1dULL);
}

RngStream::result_type RngStream::operator()() {
  // SplitMix64 keyed by the stream: output i = mix(key + (i+1) * golden).
  ++counter_;
  std::uint64_t z = key_ + counter_ * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

bool RngStream::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform() < p;
}

double RngStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gamma(double shape) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(*this);
}

double RngStream::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  if (x + y <= 0.0) return a >= b ? 1.0 : 0.0;
  return x / (x + y);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n <= 1) return 0;
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(*this);
}

}  // namespace funnelkit
