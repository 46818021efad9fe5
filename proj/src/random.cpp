#include "bpre/random.hpp"

#include <cmath>
#include <random>

namespace bpre {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Above these sizes exact integer samplers lose either speed or accuracy
// (lgamma-based rejection at huge means); a moment-matched normal is used,
// whose skewness there is below 1e-4.
constexpr double kExactPoissonLimit = 1e9;
constexpr double kExactBinomialLimit = 1e9;
constexpr double kSmallNegBinom = 16.0;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

double normal_count(RandomStream& rng, double mean, double variance) {
  const double draw = std::round(mean + std::sqrt(variance) * standard_normal(rng));
  return draw < 0.0 ? 0.0 : draw;
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream) {}

Philox4x32::Block Philox4x32::encrypt(Block ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

void Philox4x32::refill() noexcept {
  const Block counter{static_cast<std::uint32_t>(block_),
                      static_cast<std::uint32_t>(block_ >> 32),
                      static_cast<std::uint32_t>(stream_),
                      static_cast<std::uint32_t>(stream_ >> 32)};
  const Key key{static_cast<std::uint32_t>(seed_),
                static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = encrypt(counter, key);
  ++block_;
  cursor_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() noexcept {
  if (cursor_ >= 4) refill();
  const std::uint64_t lo = buffer_[cursor_];
  const std::uint64_t hi = buffer_[cursor_ + 1];
  cursor_ += 2;
  return (hi << 32) | lo;
}

RandomStream make_stream(std::uint64_t seed, std::uint64_t domain,
                         std::uint64_t index) noexcept {
  return RandomStream(seed, (domain << 40) | (index & ((1ULL << 40) - 1)));
}

double uniform_open(RandomStream& rng) noexcept {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(RandomStream& rng) {
  // Box-Muller, one variate per call so the stream position depends only on
  // the number of calls.
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double pareto(RandomStream& rng, double beta, double scale) {
  return scale * std::exp(-std::log(uniform_open(rng)) / beta);
}

double poisson_count(RandomStream& rng, double mean) {
  if (!(mean > 0.0)) return 0.0;
  if (!std::isfinite(mean)) return mean;
  if (mean < kExactPoissonLimit) {
    std::poisson_distribution<long long> dist(mean);
    return static_cast<double>(dist(rng));
  }
  return normal_count(rng, mean, mean);
}

double binomial_count(RandomStream& rng, double trials, double prob) {
  if (trials <= 0.0 || prob <= 0.0) return 0.0;
  if (prob >= 1.0) return trials;
  if (trials < kExactBinomialLimit) {
    std::binomial_distribution<long long> dist(static_cast<long long>(trials), prob);
    return static_cast<double>(dist(rng));
  }
  return normal_count(rng, trials * prob, trials * prob * (1.0 - prob));
}

double geometric_count(RandomStream& rng, double log_p) {
  if (log_p == -std::numeric_limits<double>::infinity()) return 0.0;
  if (log_p >= 0.0) return std::numeric_limits<double>::infinity();
  return std::floor(std::log(uniform_open(rng)) / log_p);
}

double negative_binomial_count(RandomStream& rng, double successes, double p,
                               double q, double log_p) {
  if (successes <= 0.0 || p <= 0.0) return 0.0;
  if (successes <= kSmallNegBinom) {
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(successes); ++i)
      total += geometric_count(rng, log_p);
    return total;
  }
  const double scale = p / q;
  if (!std::isfinite(scale)) return std::numeric_limits<double>::infinity();
  std::gamma_distribution<double> mixing(successes, scale);
  return poisson_count(rng, mixing(rng));
}

}  // namespace bpre
