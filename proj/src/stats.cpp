#include "bpre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace bpre {

void Accumulator::add(double x) noexcept {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

void Accumulator::merge(const Accumulator& other) noexcept {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const double delta = other.mean_ - mean_;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  count_ += other.count_;
}

double Accumulator::variance() const noexcept {
  return count_ > 1 ? std::max(0.0, m2_ / static_cast<double>(count_ - 1)) : 0.0;
}

double Accumulator::std_error() const noexcept {
  return count_ > 0 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Naive: return "naive";
    case Method::BigJumpIS: return "big_jump_is";
    case Method::Conditional: return "conditional";
    case Method::Exact: return "exact";
  }
  return "unknown";
}

Estimate Estimate::from(const Accumulator& acc, Method method) {
  Estimate e;
  e.point = acc.mean();
  e.std_error = acc.std_error();
  e.n_samples = acc.count();
  e.ci_lo = e.point - 1.959963984540054 * e.std_error;
  e.ci_hi = e.point + 1.959963984540054 * e.std_error;
  e.method = method;
  e.flagged = !(e.point > 0.0);
  return e;
}

Estimate Estimate::proportion(std::int64_t successes, std::int64_t trials) {
  Estimate e;
  e.method = Method::Naive;
  e.n_samples = trials;
  if (trials == 0) {
    e.ci_hi = 1.0;
    e.flagged = true;
    return e;
  }
  const double n = static_cast<double>(trials);
  e.point = static_cast<double>(successes) / n;
  e.std_error = std::sqrt(e.point * (1.0 - e.point) / n);
  std::tie(e.ci_lo, e.ci_hi) = wilson_interval(successes, trials);
  e.flagged = successes == 0;
  return e;
}

std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t trials,
                                          double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_sf(double x) noexcept {
  if (x <= 0.0) return 1.0;
  if (x < 0.3) {
    // Alternating series converges slowly here; the cdf is ~0.
    const double t = M_PI * M_PI / (8.0 * x * x);
    double cdf = 0.0;
    for (int k = 1; k <= 7; k += 2) cdf += std::exp(-static_cast<double>(k * k) * t);
    return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / x * cdf, 0.0, 1.0);
  }
  double total = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    total += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * total, 0.0, 1.0);
}

namespace {

KsResult finish(double stat, double effective_n, std::int64_t n) {
  KsResult r;
  r.stat = stat;
  r.n = n;
  const double root = std::sqrt(effective_n);
  // Stephens' finite-sample correction.
  r.p_value = kolmogorov_sf((root + 0.12 + 0.11 / root) * stat);
  return r;
}

}  // namespace

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 8) throw std::invalid_argument("ks_test: fewer than 8 samples");
  for (double x : samples)
    if (std::isnan(x)) throw std::invalid_argument("ks_test: NaN sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    stat = std::max({stat, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return finish(stat, n, static_cast<std::int64_t>(samples.size()));
}

KsResult ks_test_weighted(std::vector<std::pair<double, double>> samples,
                          const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test_weighted: no samples");
  double total = 0.0;
  double total_sq = 0.0;
  for (const auto& [x, w] : samples) {
    if (std::isnan(x) || !(w >= 0.0)) throw std::invalid_argument("ks_test_weighted: bad sample");
    total += w;
    total_sq += w * w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("ks_test_weighted: zero total weight");
  std::sort(samples.begin(), samples.end());
  double stat = 0.0;
  double below = 0.0;
  for (std::size_t i = 0; i < samples.size();) {
    const double x = samples[i].first;
    const double f = cdf(x);
    stat = std::max(stat, f - below / total);
    while (i < samples.size() && samples[i].first == x) below += samples[i++].second;
    stat = std::max(stat, below / total - f);
  }
  return finish(stat, total * total / total_sq, static_cast<std::int64_t>(samples.size()));
}

double correlation(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& w) {
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += w[i] * dx * dx;
    syy += w[i] * dy * dy;
    sxy += w[i] * dx * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace bpre
