#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace bpre::oracle {

std::vector<double> offspring_pmf(const OffspringLaw& law, int len) {
  std::vector<double> pmf(static_cast<std::size_t>(len), 0.0);
  for (int k = 0; k < len; ++k) {
    double mass = 0.0;
    switch (law.kind) {
      case LawKind::Geometric:
        mass = law.q * std::pow(law.p, k);
        break;
      case LawKind::FractionalAtom:
        mass = (1.0 - law.gamma) * law.q * std::pow(law.p, k) + (k == 0 ? law.gamma : 0.0);
        break;
      case LawKind::Poisson:
        mass = std::exp(k * std::log(law.lambda) - law.lambda - std::lgamma(k + 1.0));
        break;
      case LawKind::SingleOffspring:
        mass = k == 1 ? 1.0 : 0.0;
        break;
    }
    pmf[static_cast<std::size_t>(k)] = mass;
  }
  return pmf;
}

namespace {

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t len = x.size();
  std::vector<double> out(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    if (x[i] == 0.0) continue;
    for (std::size_t j = 0; i + j < len; ++j) out[i + j] += x[i] * y[j];
  }
  return out;
}

}  // namespace

std::vector<double> population_pmf(const std::vector<OffspringLaw>& laws, int len) {
  std::vector<double> dist(static_cast<std::size_t>(len), 0.0);
  dist[1] = 1.0;
  for (const OffspringLaw& law : laws) {
    const std::vector<double> child = offspring_pmf(law, len);
    std::vector<double> next(static_cast<std::size_t>(len), 0.0);
    std::vector<double> power(static_cast<std::size_t>(len), 0.0);
    power[0] = 1.0;
    for (int z = 0; z < len; ++z) {
      if (z > 0) power = convolve(power, child);
      const double w = dist[static_cast<std::size_t>(z)];
      if (w == 0.0) continue;
      for (int k = 0; k < len; ++k) next[static_cast<std::size_t>(k)] += w * power[static_cast<std::size_t>(k)];
    }
    dist = std::move(next);
  }
  return dist;
}

double extinction_probability(const std::vector<OffspringLaw>& laws, int len) {
  return population_pmf(laws, len)[0];
}

double second_moment(const std::vector<OffspringLaw>& laws, int len) {
  const std::vector<double> dist = population_pmf(laws, len);
  double total = 0.0;
  for (std::size_t z = 0; z < dist.size(); ++z) total += static_cast<double>(z * z) * dist[z];
  return total;
}

double gw_survival(double p, int n) {
  const double m = p / (1.0 - p);
  if (std::abs(m - 1.0) < 1e-12) return 1.0 / (n + 1.0);
  return std::pow(m, n) * (m - 1.0) / (std::pow(m, n + 1) - 1.0);
}

double gw_survival_series(double p) {
  double total = 0.0;
  for (int j = 0; j < 100000; ++j) {
    const double term = gw_survival(p, j);
    total += term;
    if (term < 1e-18) break;
  }
  return total;
}

int brute_force_argmin(const std::vector<double>& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool is_min = true;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[j] < s[i]) is_min = false;
    if (is_min) return static_cast<int>(i);
  }
  return -1;
}

double pareto_negative_part(double beta, double x_m, double c) {
  if (x_m >= c) return 0.0;
  // Substituting t = x_m / v^{1/beta} turns the density into d v on (0, 1].
  const double v_lo = std::pow(x_m / c, beta);
  const int panels = 200000;
  const double h = (1.0 - v_lo) / panels;
  auto f = [&](double v) { return std::exp(x_m * std::pow(v, -1.0 / beta) - c); };
  double total = f(v_lo) + f(1.0);
  for (int i = 1; i < panels; ++i) total += (i % 2 ? 4.0 : 2.0) * f(v_lo + i * h);
  return total * h / 3.0;
}

namespace {

double pareto_tail(double beta, double x_m, double t) {
  return t <= x_m ? 1.0 : std::pow(x_m / t, beta);
}

}  // namespace

double centred_interval_mass(double beta, double x_m, double c, double a, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return pareto_tail(beta, x_m, lo + c - a) - pareto_tail(beta, x_m, hi + c - a);
}

MeanAndError local_probability(double beta, double x_m, double c, int n, double x, double h,
                               std::int64_t samples, std::uint64_t seed) {
  const double a = c - beta * x_m / (beta - 1.0);
  RandomStream rng = make_stream(seed, StreamDomain::LocalLimit, 0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t i = 0; i < samples; ++i) {
    double s = 0.0, m = -INFINITY;
    for (int k = 0; k < n - 1; ++k) {
      const double y = pareto(rng, beta, x_m) - c + a;
      s += y;
      m = std::max(m, y);
    }
    const double v = n * centred_interval_mass(beta, x_m, c, a, std::max(x - s, m), x + h - s);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / samples;
  const double var = std::max(0.0, sum_sq / samples - mean * mean);
  return {mean, std::sqrt(var / samples)};
}

MeanAndError tail_frequency(const EnvironmentModel& model, double x, std::int64_t samples,
                            std::uint64_t seed) {
  RandomStream rng = make_stream(seed, StreamDomain::Test, 1);
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < samples; ++i)
    if (model.sample_increment(rng) > x) ++hits;
  const double p = static_cast<double>(hits) / samples;
  return {p, std::sqrt(p * (1.0 - p) / samples)};
}

}  // namespace bpre::oracle
