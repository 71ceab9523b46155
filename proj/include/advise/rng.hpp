#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace advise {

/// 64-bit seed plus the label path that produced it. Streams are derived by
/// hashing labels into the parent seed, so identical paths give identical
/// streams and sibling paths are decorrelated.
class RngSeed {
 public:
  RngSeed() = default;
  explicit RngSeed(std::uint64_t value) : value_(value) {}

  [[nodiscard]] RngSeed derive(std::string_view label) const;
  [[nodiscard]] RngSeed derive(std::string_view label, std::uint64_t index) const;

  [[nodiscard]] constexpr std::uint64_t value() const { return value_; }
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::uint64_t value_ = 0;
  std::string path_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 14695981039346656037ULL);

/// Portable random stream: mt19937_64 engine with distributions written out
/// here so results do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(splitmix64(seed.value())) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0,1).
  double uniform();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean, double sd);
  double exponential(double mean);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace advise
