#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bpre/random.hpp"

namespace bpre {

/// Invalid model or experiment parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LawKind { Geometric, Poisson, FractionalAtom, SingleOffspring };

/// One generation's offspring law.
///
/// Geometric:      f(s) = q / (1 - p s)
/// Poisson:        f(s) = exp(lambda (s - 1))
/// FractionalAtom: f(s) = gamma + (1 - gamma) q / (1 - p s)
/// SingleOffspring: f(s) = s  (test law, every particle has one child)
///
/// p and q are stored separately so that q stays accurate when p -> 1.
struct OffspringLaw {
  LawKind kind = LawKind::SingleOffspring;
  double p = 0.0;
  double q = 1.0;
  double log_p = -std::numeric_limits<double>::infinity();
  double lambda = 0.0;
  double gamma = 0.0;
  double log_mean = 0.0;

  static OffspringLaw geometric(double p);
  /// Geometric law with mean exp(log_mean), built without cancellation.
  static OffspringLaw geometric_from_log_mean(double log_mean);
  static OffspringLaw poisson(double lambda);
  static OffspringLaw poisson_from_log_mean(double log_mean);
  /// log_ratio = log(p / q); the law's log mean is log(1 - gamma) + log_ratio.
  static OffspringLaw fractional_atom(double gamma, double log_ratio);
  static OffspringLaw single_offspring();

  bool linear_fractional() const noexcept {
    return kind != LawKind::Poisson;
  }
  double mean() const noexcept;
  /// f''(1).
  double second_factorial_moment() const noexcept;
  /// P(Z_1 <= m) for one parent.
  double cdf(double m) const noexcept;
};

/// f''(1) / (2 f'(1)^2).
double eta(const OffspringLaw& law);

/// Generating function f(s).
template <class Scalar>
Scalar pgf(const OffspringLaw& law, Scalar s) {
  using std::exp;
  switch (law.kind) {
    case LawKind::Geometric:
      return Scalar(law.q) / (Scalar(1) - Scalar(law.p) * s);
    case LawKind::Poisson:
      return exp(Scalar(law.lambda) * (s - Scalar(1)));
    case LawKind::FractionalAtom:
      return Scalar(law.gamma) +
             Scalar(1 - law.gamma) * Scalar(law.q) / (Scalar(1) - Scalar(law.p) * s);
    case LawKind::SingleOffspring:
      break;
  }
  return s;
}

/// 1 - f(1 - u), evaluated without forming f near 1.
template <class Scalar>
Scalar pgf_complement(const OffspringLaw& law, Scalar u) {
  using std::expm1;
  switch (law.kind) {
    case LawKind::Geometric:
      return Scalar(law.p) * u / (Scalar(law.q) + Scalar(law.p) * u);
    case LawKind::Poisson:
      return -expm1(-Scalar(law.lambda) * u);
    case LawKind::FractionalAtom:
      return Scalar(1 - law.gamma) * Scalar(law.p) * u /
             (Scalar(law.q) + Scalar(law.p) * u);
    case LawKind::SingleOffspring:
      break;
  }
  return u;
}

enum class Family {
  ParetoGeometric,
  ParetoPoisson,
  ParetoFractionalAtom,
  /// Every generation uses the same law (Galton-Watson); validation only.
  Fixed,
};

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// Law of the limit variable gamma: Uniform[lo, hi], a point mass if lo == hi.
struct GammaLaw {
  double lo = 0.0;
  double hi = 0.0;

  bool degenerate() const noexcept { return lo == hi; }
  double mean() const noexcept { return 0.5 * (lo + hi); }
  double sample(RandomStream& rng) const;
};

/// I.i.d. environment law. X = log f'(1) is built as X = T - c with
/// T ~ Pareto(beta, x_m), plus log(1 - gamma) for the atom family.
class EnvironmentModel {
 public:
  static EnvironmentModel pareto_geometric(double beta, double x_m, double shift_c);
  static EnvironmentModel pareto_poisson(double beta, double x_m, double shift_c);
  static EnvironmentModel pareto_fractional_atom(double beta, double x_m,
                                                 double shift_c, GammaLaw gamma_law);
  static EnvironmentModel fixed(const OffspringLaw& law);
  /// beta = 3, x_m = 1, c = 2: a = 0.5, sigma^2 = 0.75, A(x) = (x + 2)^-3.
  static EnvironmentModel defaults(Family family = Family::ParetoGeometric);

  Family family() const noexcept { return family_; }
  double beta() const noexcept { return beta_; }
  double x_m() const noexcept { return x_m_; }
  double shift_c() const noexcept { return shift_c_; }
  const GammaLaw& gamma_law() const noexcept { return gamma_law_; }
  const OffspringLaw& fixed_law() const noexcept { return fixed_law_; }

  /// a = -E[X] > 0.
  double drift() const noexcept { return drift_; }
  double variance() const noexcept { return variance_; }
  double essential_infimum() const noexcept;

  /// Exact A(x) = P(X > x).
  double tail(double x) const;
  /// Pure-Pareto majorant of A: P(T - c > x) >= A(x).
  double tail_majorant(double x) const noexcept;
  /// Integral of tail_majorant(a t) over t in [k, inf).
  double tail_majorant_integral(double k) const noexcept;

  OffspringLaw sample_law(RandomStream& rng) const;
  /// Law conditioned on X > x (exact).
  OffspringLaw sample_law_above(double x, RandomStream& rng) const;
  /// Law conditioned on X <= x (exact).
  OffspringLaw sample_law_at_most(double x, RandomStream& rng) const;

  // Same draws, returning only X = log f'(1).
  double sample_increment(RandomStream& rng) const;
  double sample_increment_above(double x, RandomStream& rng) const;
  double sample_increment_at_most(double x, RandomStream& rng) const;

  /// gamma is identically zero for the pure geometric and Poisson families.
  GammaLaw gamma_limit_law() const noexcept;

 private:
  EnvironmentModel() = default;
  struct Draw {
    double gamma = 0.0;
    double t = 0.0;
  };
  void finalize();
  Draw draw(RandomStream& rng) const;
  Draw draw_above(double x, RandomStream& rng) const;
  Draw draw_at_most(double x, RandomStream& rng) const;
  double increment_of(const Draw& d) const noexcept;
  OffspringLaw law_from(const Draw& d) const;

  Family family_ = Family::ParetoGeometric;
  double beta_ = 3.0;
  double x_m_ = 1.0;
  double shift_c_ = 2.0;
  GammaLaw gamma_law_{};
  OffspringLaw fixed_law_{};
  double drift_ = 0.0;
  double variance_ = 0.0;
};

// Free-function spellings of the model operations.
inline OffspringLaw sample_law(const EnvironmentModel& model, RandomStream& rng) {
  return model.sample_law(rng);
}
inline double exact_tail(const EnvironmentModel& model, double x) {
  return model.tail(x);
}
inline GammaLaw gamma_limit_law(const EnvironmentModel& model) {
  return model.gamma_limit_law();
}

}  // namespace bpre
