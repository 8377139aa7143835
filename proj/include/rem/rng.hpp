#pragma once

#include <cstdint>
#include <string_view>

namespace rem {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used for seeding and for
// deriving per-item seeds from (seed, index) pairs.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Order-sensitive hash of two 64-bit values.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632BE59BD9B4E019ULL + (a << 6) + (a >> 2)));
}

template <typename... Rest>
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix_seed(mix_seed(a, b), static_cast<std::uint64_t>(rest)...);
}

// FNV-1a over the bytes of a string, for keying draws on sample ids.
constexpr std::uint64_t hash_string(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// xoshiro256** 1.0 (Blackman & Vigna), state seeded from SplitMix64 over
// mix_seed(seed, stream). Only integer arithmetic touches the state, so the
// stream is identical on every platform. Gaussian draws use Box-Muller on
// 53-bit uniforms rather than std::normal_distribution, whose algorithm is
// implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi] inclusive.
  long uniform_int(long lo, long hi);
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // Independent child generator; does not advance this one.
  SeededRng split(std::uint64_t stream) const { return SeededRng(mix_seed(seed_, stream_), stream); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rem
