#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ahip {

/// Counter-based generator (Philox4x32-10). A stream is identified by a
/// 64-bit key; every named stochastic site derives its own key from the run
/// seed, so draws never depend on the order in which sites execute.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t key) : key_(key) {}

  /// Stream for `name` under `seed`.
  static Rng stream(std::uint64_t seed, std::string_view name);

  /// Child stream; independent of the parent's position.
  Rng split(std::string_view name) const;

  std::uint64_t key() const { return key_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n). `n` must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  /// Normal(0, std) resampled until it falls inside +-2 std.
  double truncated_normal(double std);
  /// Index drawn from an (unnormalised) nonnegative weight vector.
  std::size_t categorical(const std::vector<double>& weights);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  void refill();

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int available_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// 64-bit FNV-1a over a byte range; used for stream naming and content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace ahip
