#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "bpre/env_models.hpp"
#include "bpre/random.hpp"

namespace bpre {

/// Laws pi_0..pi_{n-1} and the walk S_0..S_n they induce.
struct EnvRealization {
  std::vector<OffspringLaw> laws;
  Eigen::VectorXd s;

  EnvRealization() : s(Eigen::VectorXd::Zero(1)) {}
  explicit EnvRealization(std::vector<OffspringLaw> laws_in);

  int length() const noexcept { return static_cast<int>(laws.size()); }
  double increment(int j) const noexcept { return laws[static_cast<std::size_t>(j - 1)].log_mean; }
};

EnvRealization sample_environment(const EnvironmentModel& model, int n, RandomStream& rng);

struct PathOptions {
  double z0 = 1.0;
  /// Record N_{U_n} at the first generation whose increment exceeds this.
  std::optional<double> jump_threshold;
  /// Populations above this are clamped and the path is marked capped.
  double cap = 1e300;
  /// Stop simulating once the population is extinct (z stays 0).
  bool stop_at_extinction = true;
};

struct PathRecord {
  Eigen::VectorXd z;
  Eigen::VectorXd s;
  std::vector<OffspringLaw> laws;
  std::optional<double> n_big_jump_offspring;
  std::optional<int> big_jump_index;
  bool capped = false;

  int length() const noexcept { return static_cast<int>(z.size()) - 1; }
  bool survived() const noexcept { return z[z.size() - 1] > 0.0; }
};

struct WalkFunctionals {
  double M_n = 0.0;
  double L_n = 0.0;
  int tau_n = 0;
  std::optional<int> tau;
  std::optional<int> U_n;
};

/// Offspring count of one individual.
double offspring_count(const OffspringLaw& law, RandomStream& rng);

/// Z_{k+1} given Z_k = z under one law, sampled in closed form.
double next_generation(const OffspringLaw& law, double z, RandomStream& rng);

struct DetailedGeneration {
  double total = 0.0;
  double max_individual = 0.0;
};

/// Same transition, also returning the largest single family.
/// Individual draws for z <= 1e4, max-cdf inversion above.
DetailedGeneration next_generation_detailed(const OffspringLaw& law, double z,
                                            RandomStream& rng);

/// Smallest m with P(max of z offspring counts <= m) >= v.
double max_offspring_quantile(const OffspringLaw& law, double z, double v);

PathRecord simulate_path(const EnvRealization& env, RandomStream& rng,
                         const PathOptions& opts = {});
PathRecord simulate_path(const EnvironmentModel& model, int n, RandomStream& rng,
                         const PathOptions& opts = {});

/// Linear-fractional map u -> (A u) / (C u + D) in u = 1 - s coordinates,
/// stored as [[A, 0], [C, D]]. Entries stay nonnegative, so products do not
/// cancel; the matrix is rescaled after each product.
template <class Scalar>
struct MobiusMap {
  Eigen::Matrix<Scalar, 2, 2> m = Eigen::Matrix<Scalar, 2, 2>::Identity();

  static MobiusMap from_law(const OffspringLaw& law) {
    MobiusMap map;
    const Scalar alpha =
        law.kind == LawKind::FractionalAtom ? Scalar((1.0 - law.gamma) * law.p) : Scalar(law.p);
    if (law.kind == LawKind::SingleOffspring) return map;
    map.m << alpha, Scalar(0), Scalar(law.p), Scalar(law.q);
    return map;
  }

  /// (this o other)(u) = this(other(u)).
  MobiusMap then_inner(const MobiusMap& inner) const {
    MobiusMap out;
    out.m = m * inner.m;
    out.normalize();
    return out;
  }

  void normalize() {
    using std::abs;
    const Scalar scale = m.cwiseAbs().maxCoeff();
    if (scale > Scalar(0)) m /= scale;
  }

  Scalar operator()(Scalar u) const {
    return m(0, 0) * u / (m(1, 0) * u + m(1, 1));
  }
};

/// f_{k,n}(s).
double compose_pgf(const EnvRealization& env, int k, int n, double s);
/// 1 - f_{k,n}(1 - u), without forming s near 1.
double compose_pgf_complement(const EnvRealization& env, int k, int n, double u);

/// g(s) = 1 / (1 - f(s)) - 1 / (f'(1)(1 - s)) as a function of u = 1 - s.
double g_function(const OffspringLaw& law, double u);

struct SurvivalPair {
  double direct = 0.0;
  double formula = 0.0;
  /// Evaluations with g_k outside [0, 2 eta_{k+1}].
  int g_violations = 0;
  /// Evaluations where 1 - f_{0,j}(0) exceeded min_{i<=j} e^{S_i}.
  int bound_violations = 0;
};

/// P_pi(Z_n > 0) from the composed pgf and from the g_k series.
SurvivalPair exact_survival_prob(const EnvRealization& env, int n);

/// 1 - f_{0,j}(0) for j = 0..n.
Eigen::VectorXd survival_profile(const EnvRealization& env, int n);

struct SecondMoment {
  double value = 0.0;
  /// log of the value; finite even when `value` overflows.
  double log_value = 0.0;
  bool overflow = false;
};

/// E_pi[Z_n^2] = 2 e^{2 S_n} sum_k eta_{k+1} e^{-S_k} + e^{S_n}.
SecondMoment second_moment(const EnvRealization& env, int n);

WalkFunctionals walk_functionals(const Eigen::VectorXd& s, double a);
inline WalkFunctionals walk_functionals(const PathRecord& path, double a) {
  return walk_functionals(path.s, a);
}

struct DiagnosticEvents {
  bool G_n = false;
  bool H_n = false;
};

DiagnosticEvents diagnostic_events(const EnvRealization& env, double a);

}  // namespace bpre
