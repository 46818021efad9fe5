#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bpre {

/// Philox4x32-10 counter-based generator.
///
/// The 128-bit counter is split into a 64-bit block index (low words) and a
/// 64-bit stream id (high words); the 64-bit key is the root seed. Every
/// (seed, stream) pair therefore addresses an independent, reproducible
/// sequence without any generator state shared between workers.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Raw bijection, exposed for known-answer tests.
  static Block encrypt(Block counter, Key key) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int cursor_ = 4;
};

using RandomStream = Philox4x32;

/// Stream domains; every estimator draws from its own.
enum class StreamDomain : std::uint64_t {
  ConstD = 1,
  ConstK1 = 2,
  ConstK = 3,
  Ladder = 4,
  BaxterSeries = 5,
  BaxterDirect = 6,
  GammaMean = 7,
  SurvivalNaive = 8,
  SurvivalBigJump = 9,
  WalkBigJump = 10,
  PopulationBigJump = 11,
  Simulate = 12,
  LocalLimit = 13,
  Test = 63,
};

/// Stream ids are `domain << 40 | index`: each estimator owns a domain, each
/// shard or run inside it owns an index.
RandomStream make_stream(std::uint64_t seed, std::uint64_t domain,
                         std::uint64_t index) noexcept;
inline RandomStream make_stream(std::uint64_t seed, StreamDomain domain,
                                std::uint64_t index) noexcept {
  return make_stream(seed, static_cast<std::uint64_t>(domain), index);
}

/// Uniform on the open interval (0, 1).
double uniform_open(RandomStream& rng) noexcept;
double standard_normal(RandomStream& rng);

/// Pareto(beta, scale): P(T > t) = (scale / t)^beta for t >= scale.
double pareto(RandomStream& rng, double beta, double scale);

/// Counts are carried as doubles: exact integers below 2^53, and populations
/// far beyond the int64 range remain representable.
double poisson_count(RandomStream& rng, double mean);
double binomial_count(RandomStream& rng, double trials, double prob);

/// Number of failures before the first success, P(K = k) = q p^k.
double geometric_count(RandomStream& rng, double log_p);

/// Sum of `successes` independent geometric_count draws.
double negative_binomial_count(RandomStream& rng, double successes, double p,
                               double q, double log_p);

}  // namespace bpre
