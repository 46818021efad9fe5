#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace bpre {

/// Streaming mean/variance (Welford), mergeable with the pooled-moment rule.
class Accumulator {
 public:
  void add(double x) noexcept;
  void merge(const Accumulator& other) noexcept;

  std::int64_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double sum() const noexcept { return mean_ * static_cast<double>(count_); }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const noexcept;
  double std_error() const noexcept;

 private:
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

enum class Method { Naive, BigJumpIS, Conditional, Exact };
std::string to_string(Method method);

struct Estimate {
  double point = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  Method method = Method::Naive;
  /// Set when the estimate rests on no positive observation.
  bool flagged = false;

  static Estimate from(const Accumulator& acc, Method method);
  /// Binomial proportion with Wilson interval.
  static Estimate proportion(std::int64_t successes, std::int64_t trials);
  double relative_error() const noexcept {
    return point > 0.0 ? std_error / point : 0.0;
  }
};

/// 95% Wilson score interval.
std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t trials,
                                          double z = 1.959963984540054);

double normal_cdf(double x) noexcept;

struct KsResult {
  double stat = 0.0;
  double p_value = 1.0;
  std::int64_t n = 0;
};

/// Asymptotic Kolmogorov survival function P(K > x).
double kolmogorov_sf(double x) noexcept;

/// Two-sided one-sample KS test; input need not be sorted.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Weighted empirical cdf against `cdf`; effective size (sum w)^2 / sum w^2
/// is used for the p-value.
KsResult ks_test_weighted(std::vector<std::pair<double, double>> samples,
                          const std::function<double(double)>& cdf);

/// Weighted Pearson correlation.
double correlation(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& w);

}  // namespace bpre
