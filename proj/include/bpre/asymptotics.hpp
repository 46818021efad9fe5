#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bpre/env_models.hpp"
#include "bpre/stats.hpp"

namespace bpre {

/// Root seed and worker count for a Monte Carlo run. Results depend on the
/// seed only; the worker count changes scheduling, not output.
struct RunSettings {
  std::uint64_t seed = 1;
  int workers = 1;
};

struct ConstantReport {
  std::string name;
  double value = 0.0;
  int truncation_index = 0;
  double truncation_bound = 0.0;
  double mc_stderr = 0.0;
  std::uint64_t seed = 0;
};

/// D = sum_k P(S_k >= 0) / k, truncated at k_max, one walk pool for all k.
ConstantReport const_D(const EnvironmentModel& model, int k_max, std::int64_t samples,
                       const RunSettings& run);

/// E[e^{S_n}; S_n < 0] for n = 1..n_max from one walk pool.
struct NegativePartMoments {
  Eigen::VectorXd mean;
  /// Covariance of the per-walk vectors, divided by the sample count.
  Eigen::MatrixXd covariance;
  std::int64_t samples = 0;
};
NegativePartMoments negative_part_moments(const EnvironmentModel& model, int n_max,
                                          std::int64_t samples, const RunSettings& run,
                                          StreamDomain domain = StreamDomain::ConstK1);

/// K1 = (beta / a) exp(sum_n E[e^{S_n}; S_n < 0] / n).
ConstantReport const_K1(const EnvironmentModel& model, int n_max, std::int64_t samples,
                        const RunSettings& run);

/// Per-j terms E[1 - f_{0,j}(gamma)], gamma independent of the environment.
struct SurvivalSeries {
  Eigen::VectorXd term;
  Eigen::VectorXd term_stderr;
  ConstantReport K;
};

/// K = sum_j E[1 - f_{0,j}(gamma)] for j <= j_max. The truncation bound is
/// the MC mean of sum_{j_max < j <= tail_horizon} e^{S_{tau_j}}.
SurvivalSeries const_K(const EnvironmentModel& model, int j_max, std::int64_t env_samples,
                       const RunSettings& run, int tail_horizon = 0);

/// K A(na).
double theoretical_survival(const EnvironmentModel& model, const ConstantReport& K, int n);

/// e^D A(an), the predicted P(tau > n).
double tau_tail_law(const EnvironmentModel& model, const ConstantReport& D, int n);

/// P(tau > k) for k = 0..k_max and E[tau].
struct LadderSeries {
  Eigen::VectorXd tail;
  ConstantReport E_tau;
};
LadderSeries ladder_series(const EnvironmentModel& model, int k_max, std::int64_t samples,
                           const RunSettings& run, int walk_cap = 100000);

/// P(tau > j - 1) / E[tau].
double durrett_law(const LadderSeries& ladder, int j);

/// E[1 - f_{0,j-1}(gamma)] / K.
double un_yaglom_law(const SurvivalSeries& series, int j);
/// Bound on the mass beyond j_max: truncation bound of K over K.
double un_yaglom_tail_bound(const SurvivalSeries& series);

struct LocalLimitPrediction {
  double value = 0.0;
  double threshold = 0.0;
  /// x below N sqrt(n log(n + 1)): the uniform regime is not guaranteed.
  bool below_uniform_regime = false;
};

/// h beta n B(x) / x with B(x) = A(x - a).
LocalLimitPrediction local_limit_prediction(const EnvironmentModel& model, int n, double x,
                                            double h, double N = 2.0);

struct BaxterReport {
  Eigen::VectorXd series;     // coefficient n of exp(sum t^n c_n / n)
  Eigen::VectorXd direct;     // E[e^{S_n}; M_n < 0]
  Eigen::VectorXd combined_stderr;
  Eigen::VectorXd z_score;
  /// (series - direct) / direct.
  Eigen::VectorXd relative_deviation;
};

BaxterReport baxter_check(const EnvironmentModel& model, int n_max, std::int64_t samples,
                          const RunSettings& run);

/// Power-series coefficients b_0..b_n of exp(sum_k t^k c_k / k) and the
/// Jacobian db_n / dc_k (rows n = 0..n_max, columns k = 1..n_max).
void exp_series(const Eigen::VectorXd& c, Eigen::VectorXd& b, Eigen::MatrixXd& jacobian);

struct GammaMeanReport {
  Estimate indicator;  // P(Z_1 <= e^{x(1 + delta(x))} | X > x)
  Estimate pgf;        // E[f(1 - e^{-x(1 + delta(x))}) | X > x]
  double combined_stderr = 0.0;
};

/// Default delta(x) = -1/sqrt(x).
double default_gamma_delta(double x);

GammaMeanReport empirical_gamma_mean(const EnvironmentModel& model, double x,
                                     std::int64_t samples, const RunSettings& run,
                                     const std::function<double(double)>& delta_fn =
                                         default_gamma_delta);

}  // namespace bpre
