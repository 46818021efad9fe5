#include "bpre/process.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpre {

namespace {

constexpr double kIndividualDrawLimit = 1e4;
constexpr double kBoundTolerance = 1e-12;

bool all_linear_fractional(const EnvRealization& env, int k, int n) {
  for (int j = k; j < n; ++j)
    if (!env.laws[static_cast<std::size_t>(j)].linear_fractional()) return false;
  return true;
}

}  // namespace

double offspring_count(const OffspringLaw& law, RandomStream& rng) {
  switch (law.kind) {
    case LawKind::Geometric: return geometric_count(rng, law.log_p);
    case LawKind::Poisson: return poisson_count(rng, law.lambda);
    case LawKind::FractionalAtom:
      if (uniform_open(rng) < law.gamma) return 0.0;
      return geometric_count(rng, law.log_p);
    case LawKind::SingleOffspring: break;
  }
  return 1.0;
}

namespace {

double log_sum_exp(double x, double y) {
  if (x == -INFINITY) return y;
  if (y == -INFINITY) return x;
  const double hi = std::max(x, y);
  return hi + std::log1p(std::exp(std::min(x, y) - hi));
}

}  // namespace

EnvRealization::EnvRealization(std::vector<OffspringLaw> laws_in)
    : laws(std::move(laws_in)), s(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(laws.size()) + 1)) {
  for (std::size_t k = 0; k < laws.size(); ++k)
    s[static_cast<Eigen::Index>(k) + 1] = s[static_cast<Eigen::Index>(k)] + laws[k].log_mean;
}

EnvRealization sample_environment(const EnvironmentModel& model, int n, RandomStream& rng) {
  std::vector<OffspringLaw> laws;
  laws.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) laws.push_back(model.sample_law(rng));
  return EnvRealization(std::move(laws));
}

double next_generation(const OffspringLaw& law, double z, RandomStream& rng) {
  if (z <= 0.0) return 0.0;
  switch (law.kind) {
    case LawKind::Geometric:
      return negative_binomial_count(rng, z, law.p, law.q, law.log_p);
    case LawKind::Poisson:
      return poisson_count(rng, z * law.lambda);
    case LawKind::FractionalAtom: {
      const double breeders = binomial_count(rng, z, 1.0 - law.gamma);
      return negative_binomial_count(rng, breeders, law.p, law.q, law.log_p);
    }
    case LawKind::SingleOffspring:
      break;
  }
  return z;
}

double max_offspring_quantile(const OffspringLaw& law, double z, double v) {
  // F(m)^z >= v  <=>  1 - F(m) <= w.
  const double w = -std::expm1(std::log(v) / z);
  switch (law.kind) {
    case LawKind::Geometric:
      return std::max(0.0, std::ceil(std::log(w) / law.log_p) - 1.0);
    case LawKind::FractionalAtom:
      return std::max(0.0, std::ceil((std::log(w) - std::log1p(-law.gamma)) / law.log_p) - 1.0);
    case LawKind::Poisson: {
      double lo = -1.0;
      double hi = std::ceil(law.lambda + 40.0 * std::sqrt(law.lambda) + 40.0);
      while (1.0 - law.cdf(hi) > w) hi *= 2.0;
      while (hi - lo > 1.0) {
        const double mid = std::floor(0.5 * (lo + hi));
        if (1.0 - law.cdf(mid) <= w) hi = mid; else lo = mid;
      }
      return hi;
    }
    case LawKind::SingleOffspring:
      break;
  }
  return 1.0;
}

DetailedGeneration next_generation_detailed(const OffspringLaw& law, double z,
                                            RandomStream& rng) {
  DetailedGeneration out;
  if (z <= 0.0) return out;
  if (z <= kIndividualDrawLimit) {
    const int count = static_cast<int>(z);
    for (int i = 0; i < count; ++i) {
      const double children = offspring_count(law, rng);
      out.total += children;
      out.max_individual = std::max(out.max_individual, children);
    }
    return out;
  }
  out.max_individual = max_offspring_quantile(law, z, uniform_open(rng));
  out.total = out.max_individual + next_generation(law, z - 1.0, rng);
  return out;
}

PathRecord simulate_path(const EnvRealization& env, RandomStream& rng,
                         const PathOptions& opts) {
  const int n = env.length();
  PathRecord path;
  path.laws = env.laws;
  path.s = env.s;
  path.z = Eigen::VectorXd::Zero(n + 1);
  path.z[0] = opts.z0;
  double z = opts.z0;
  bool jump_seen = false;
  for (int k = 0; k < n; ++k) {
    const OffspringLaw& law = env.laws[static_cast<std::size_t>(k)];
    const bool is_jump =
        !jump_seen && opts.jump_threshold && law.log_mean > *opts.jump_threshold;
    if (is_jump) {
      jump_seen = true;
      path.big_jump_index = k + 1;
    }
    if (z <= 0.0) {
      if (opts.stop_at_extinction) break;
      continue;
    }
    if (path.capped) {
      z = std::min(opts.cap, z * std::exp(law.log_mean));
    } else if (is_jump) {
      const DetailedGeneration gen = next_generation_detailed(law, z, rng);
      path.n_big_jump_offspring = gen.max_individual;
      z = gen.total;
    } else {
      z = next_generation(law, z, rng);
    }
    if (!(z <= opts.cap)) {
      z = opts.cap;
      path.capped = true;
    }
    path.z[k + 1] = z;
  }
  return path;
}

PathRecord simulate_path(const EnvironmentModel& model, int n, RandomStream& rng,
                         const PathOptions& opts) {
  if (n < 1) throw ConfigError("simulate_path needs n >= 1");
  const EnvRealization env = sample_environment(model, n, rng);
  return simulate_path(env, rng, opts);
}

double compose_pgf_complement(const EnvRealization& env, int k, int n, double u) {
  if (k < 0 || k > n || n > env.length()) throw std::out_of_range("compose_pgf: bad k, n");
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("compose_pgf: s outside [0, 1]");
  if (all_linear_fractional(env, k, n)) {
    MobiusMap<double> map;
    for (int j = k; j < n; ++j)
      map = map.then_inner(MobiusMap<double>::from_law(env.laws[static_cast<std::size_t>(j)]));
    return map(u);
  }
  for (int j = n - 1; j >= k; --j) u = pgf_complement(env.laws[static_cast<std::size_t>(j)], u);
  return u;
}

double compose_pgf(const EnvRealization& env, int k, int n, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("compose_pgf: s outside [0, 1]");
  return 1.0 - compose_pgf_complement(env, k, n, 1.0 - s);
}

double g_function(const OffspringLaw& law, double u) {
  switch (law.kind) {
    case LawKind::Geometric:
      return 1.0;
    case LawKind::FractionalAtom:
      return 1.0 / (1.0 - law.gamma);
    case LawKind::Poisson: {
      const double x = law.lambda * u;
      if (x < 1e-3) return 0.5 + x / 12.0 - x * x * x / 720.0;
      return -1.0 / std::expm1(-x) - 1.0 / x;
    }
    case LawKind::SingleOffspring:
      break;
  }
  return 0.0;
}

SurvivalPair exact_survival_prob(const EnvRealization& env, int n) {
  if (n < 1 || n > env.length()) throw std::out_of_range("exact_survival_prob: bad n");
  SurvivalPair out;
  out.direct = compose_pgf_complement(env, 0, n, 1.0);

  // Terms e^{-S_k} are summed relative to the largest one.
  const Eigen::VectorXd neg_s = -env.s.head(n + 1);
  const double shift = neg_s.maxCoeff();
  double total = std::exp(neg_s[n] - shift);
  double u = 1.0;
  for (int k = n - 1; k >= 0; --k) {
    const OffspringLaw& law = env.laws[static_cast<std::size_t>(k)];
    const double g = g_function(law, u);
    const double bound = 2.0 * eta(law);
    if (!(g >= -kBoundTolerance && g <= bound * (1.0 + kBoundTolerance) + kBoundTolerance))
      ++out.g_violations;
    total += g * std::exp(neg_s[k] - shift);
    u = pgf_complement(law, u);
  }
  out.formula = std::exp(-shift) / total;

  const double min_bound = std::exp(env.s.head(n + 1).minCoeff());
  if (out.direct > min_bound * (1.0 + kBoundTolerance)) ++out.bound_violations;
  return out;
}

Eigen::VectorXd survival_profile(const EnvRealization& env, int n) {
  if (n < 0 || n > env.length()) throw std::out_of_range("survival_profile: bad n");
  Eigen::VectorXd out(n + 1);
  out[0] = 1.0;
  if (all_linear_fractional(env, 0, n)) {
    MobiusMap<double> prefix;
    for (int j = 1; j <= n; ++j) {
      prefix = prefix.then_inner(MobiusMap<double>::from_law(env.laws[static_cast<std::size_t>(j - 1)]));
      out[j] = prefix(1.0);
    }
    return out;
  }
  for (int j = 1; j <= n; ++j) out[j] = compose_pgf_complement(env, 0, j, 1.0);
  return out;
}

SecondMoment second_moment(const EnvRealization& env, int n) {
  if (n < 1 || n > env.length()) throw std::out_of_range("second_moment: bad n");
  const double s_n = env.s[n];
  double log_sum = -INFINITY;
  for (int k = 0; k < n; ++k) {
    const double e = eta(env.laws[static_cast<std::size_t>(k)]);
    if (e > 0.0) log_sum = log_sum_exp(log_sum, std::log(e) - env.s[k]);
  }
  SecondMoment out;
  out.log_value = log_sum_exp(std::log(2.0) + 2.0 * s_n + log_sum, s_n);
  out.value = std::exp(out.log_value);
  out.overflow = !std::isfinite(out.value);
  return out;
}

WalkFunctionals walk_functionals(const Eigen::VectorXd& s, double a) {
  const int n = static_cast<int>(s.size()) - 1;
  WalkFunctionals w;
  w.M_n = n >= 1 ? s.tail(n).maxCoeff() : 0.0;
  w.L_n = s[0];
  for (int k = 1; k <= n; ++k) {
    if (s[k] < w.L_n) {
      w.L_n = s[k];
      w.tau_n = k;
    }
  }
  const double threshold = n * a;
  for (int k = 1; k <= n; ++k) {
    if (!w.tau && s[k] < 0.0) w.tau = k;
    if (!w.U_n && s[k] - s[k - 1] > threshold) w.U_n = k;
    if (w.tau && w.U_n) break;
  }
  return w;
}

DiagnosticEvents diagnostic_events(const EnvRealization& env, double a) {
  const int n = env.length();
  DiagnosticEvents d;
  double band = 0.0;
  double eta_sum = 1.0;
  for (int k = 1; k <= n; ++k) {
    band = std::max(band, std::abs(env.s[k] + k * a));
    eta_sum += eta(env.laws[static_cast<std::size_t>(k - 1)]);
  }
  const double nn = static_cast<double>(n);
  d.G_n = band < std::pow(nn, 2.0 / 3.0);
  d.H_n = n <= 1 || eta_sum <= 2.0 * nn * std::exp(nn / std::log(nn));
  return d;
}

}  // namespace bpre
