#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "bpre/asymptotics.hpp"
#include "bpre/env_models.hpp"
#include "bpre/stats.hpp"

namespace bpre {

/// c log n, c / log n, c n, c n^p or a constant.
struct SequenceSpec {
  enum class Kind { Log, InvLog, Linear, Power, Constant };
  Kind kind = Kind::Log;
  double scale = 1.0;
  double power = 1.0;

  static SequenceSpec log(double c = 1.0) { return {Kind::Log, c, 1.0}; }
  static SequenceSpec inv_log(double c) { return {Kind::InvLog, c, 1.0}; }
  static SequenceSpec linear(double c = 1.0) { return {Kind::Linear, c, 1.0}; }
  static SequenceSpec constant(double c) { return {Kind::Constant, c, 1.0}; }
  /// Accepts "log", "2*log", "3/log", "n", "0.5*n", "n^0.5", "2*n^0.5", "4".
  static SequenceSpec parse(const std::string& text);

  double operator()(int n) const;
  std::string describe() const;
};

struct BigJumpConfig {
  /// Largest forced jump position; 0 means n (no neglected remainder).
  int j_max = 0;
  SequenceSpec h_n = SequenceSpec::log(1.0);
  SequenceSpec delta_n = SequenceSpec::inv_log(3.0);
  /// Forced increments exceed split_level * na; U_n is still tracked at na.
  double split_level = 0.3;

  int jump_positions(int n) const { return j_max > 0 ? std::min(j_max, n) : n; }
  /// h_n -> inf, h_n / n -> 0, delta_n -> 0 and n(delta_n - 2 / log n) -> inf,
  /// checked on the grid and at 10x and 100x its largest point.
  void validate(const std::vector<int>& grid) const;
};

/// P(Z_n > 0) by direct simulation of populations.
Estimate estimate_survival_naive(const EnvironmentModel& model, int n, std::int64_t samples,
                                 const RunSettings& run);

struct BigJumpEstimate {
  Estimate total;
  /// P(Z_n > 0, U_n = j), j = 1..j_max.
  Eigen::VectorXd per_j;
  Eigen::VectorXd per_j_stderr;
  /// Survival with no increment above the split level before j_max.
  Estimate remainder;
  /// (1 - A)^{j_max} E[e^{L_n}] over the remainder environments.
  double remainder_bound = 0.0;
  double jump_prob = 0.0;
  int j_max = 0;
};

/// Big-jump decomposition with the quenched survival probability of every
/// branch environment computed exactly.
BigJumpEstimate estimate_survival_bigjump(const EnvironmentModel& model, int n,
                                          std::int64_t samples, const BigJumpConfig& cfg,
                                          const RunSettings& run);

struct WalkBigJumpEstimate {
  /// P(tau > n).
  Estimate tau_tail;
  /// P(tau > n, U_n = j), j = 1..j_max.
  Eigen::VectorXd tau_per_j;
  /// E[e^{S_n}; S_n < 0].
  Estimate negative_part;
  /// Conditional law of U_n given tau > n, j = 1..j_max, with ratio stderr.
  Eigen::VectorXd conditional;
  Eigen::VectorXd conditional_stderr;
  std::int64_t hits = 0;
  double jump_prob = 0.0;
  int j_max = 0;
};

WalkBigJumpEstimate estimate_walk_bigjump(const EnvironmentModel& model, int n,
                                          std::int64_t samples, const BigJumpConfig& cfg,
                                          const RunSettings& run);

enum class HarvestMode {
  /// Unconditioned paths.
  Naive,
  /// Forced jump at every position, remainder included.
  BigJump,
  /// Forced jump at j < h_n only, kept when N_{U_n} >= e^{n(a + delta_n)}.
  Explosion,
};

struct SurvivorRecord {
  std::int64_t sample = 0;
  double weight = 0.0;
  /// 0 when no increment exceeds na.
  int U = 0;
  double N_Un = 0.0;
  double z_before = 0.0;
  bool survived = false;
  /// U_n < h_n and N_{U_n} >= e^{n(a + delta_n)}.
  bool exploded = false;
  bool capped = false;
  Eigen::VectorXd z;
  Eigen::VectorXd s;
};

struct Harvest {
  std::vector<SurvivorRecord> records;
  std::int64_t samples = 0;
  std::int64_t survivors = 0;
  /// Per-sample weighted survival count: estimates P(Z_n > 0) (BigJump, Naive).
  Estimate mass;
  double jump_prob = 0.0;
  bool insufficient = false;
};

/// Draws until `target_survivors` surviving branch instances are recorded
/// or `max_samples` base samples are used. Records with `exploded` but not
/// `survived` are kept too.
Harvest harvest_survivors(const EnvironmentModel& model, int n, std::int64_t target_survivors,
                          const BigJumpConfig& cfg, const RunSettings& run, HarvestMode mode,
                          bool keep_paths, std::int64_t max_samples = 2'000'000'000);

struct ConditionalLaw {
  /// P(U_n = j | condition), j = 1..j_max; `beyond` holds U_n > j_max or none.
  Eigen::VectorXd mass;
  Eigen::VectorXd std_error;
  double beyond = 0.0;
  std::int64_t survivors = 0;
  double effective_survivors = 0.0;
  bool insufficient = false;
};

ConditionalLaw conditional_un_distribution(const EnvironmentModel& model, int n,
                                           std::int64_t min_survivors, const BigJumpConfig& cfg,
                                           const RunSettings& run,
                                           HarvestMode mode = HarvestMode::BigJump);

/// Law of U_n given tau > n from the walk kernel.
ConditionalLaw conditional_un_distribution_tau(const EnvironmentModel& model, int n,
                                               std::int64_t samples, const BigJumpConfig& cfg,
                                               const RunSettings& run);

/// Weighted law of U_n over records satisfying `select`, lumped above j_max.
template <class Select>
ConditionalLaw record_law(const Harvest& harvest, int j_max, Select&& select);

/// TV distance between two laws on {1..J, beyond}.
double tv_distance(const Eigen::VectorXd& p, double p_beyond, const Eigen::VectorXd& q,
                   double q_beyond);

struct ExplosionStats {
  double freq_early_jump = 0.0;
  double freq_big_family = 0.0;
  double freq_both = 0.0;
  double freq_both_stderr = 0.0;
  /// TV between laws of (min(U_n, 11), 1{Z_n > 0}) given survival and given
  /// the explosion event.
  double tv_diagnostic = 0.0;
  std::int64_t survivors = 0;
  double h = 0.0;
  double log_family_threshold = 0.0;
};

ExplosionStats explosion_statistics(const EnvironmentModel& model, int n,
                                    std::int64_t survivors, const BigJumpConfig& cfg,
                                    const RunSettings& run);
ExplosionStats explosion_statistics(const Harvest& harvest, const EnvironmentModel& model,
                                    int n, const BigJumpConfig& cfg);

struct FltReport {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean_R;
  Eigen::VectorXd ks_W;      // KS of W(t) against N(0, t), t > 0
  Eigen::VectorXd ks_W_p;
  Eigen::MatrixXd cov_W;     // weighted covariance over the grid
  double ks_increment = 0.0; // W(1) - W(eps) against N(0, 1 - eps)
  double ks_increment_p = 1.0;
  double epsilon = 0.2;
  double corr_half_one = 0.0;
  double max_mean_R_dev = 0.0;
  std::int64_t survivors = 0;
  std::int64_t excluded_capped = 0;
  /// Per-survivor grid values (rows: survivors, cols: grid), for CSV export.
  Eigen::MatrixXd R;
  Eigen::MatrixXd W;
  Eigen::VectorXd weights;
  Eigen::VectorXi U;
  Eigen::VectorXd N_Un;
};

/// Default grid 0, 0.05, ..., 1.
Eigen::VectorXd default_flt_grid();

FltReport flt_suite(const EnvironmentModel& model, int n, std::int64_t survivors,
                    const Eigen::VectorXd& grid, const BigJumpConfig& cfg, const RunSettings& run,
                    HarvestMode mode = HarvestMode::Explosion, double epsilon = 0.2);
FltReport flt_statistics(const Harvest& harvest, const EnvironmentModel& model, int n,
                         const Eigen::VectorXd& grid, double epsilon = 0.2);

// Template definition.

template <class Select>
ConditionalLaw record_law(const Harvest& harvest, int j_max, Select&& select) {
  ConditionalLaw law;
  law.mass = Eigen::VectorXd::Zero(j_max);
  law.std_error = Eigen::VectorXd::Zero(j_max);
  // Ratio estimator p_j = sum_i a_ij / sum_i b_i over base samples i; the
  // delta-method variance needs per-sample sums, gathered from the records.
  std::vector<std::pair<std::int64_t, std::pair<int, double>>> hits;
  for (const SurvivorRecord& r : harvest.records) {
    if (!select(r)) continue;
    const int bucket = (r.U >= 1 && r.U <= j_max) ? r.U : 0;
    hits.push_back({r.sample, {bucket, r.weight}});
    ++law.survivors;
  }
  std::sort(hits.begin(), hits.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  Eigen::VectorXd a_sum = Eigen::VectorXd::Zero(j_max + 1);
  Eigen::VectorXd a_sq = Eigen::VectorXd::Zero(j_max + 1);
  Eigen::VectorXd ab = Eigen::VectorXd::Zero(j_max + 1);
  double b_sum = 0.0, b_sq = 0.0, w_sq = 0.0;
  for (std::size_t i = 0; i < hits.size();) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(j_max + 1);
    const std::int64_t sample = hits[i].first;
    for (; i < hits.size() && hits[i].first == sample; ++i) {
      a[hits[i].second.first] += hits[i].second.second;
      w_sq += hits[i].second.second * hits[i].second.second;
    }
    const double b = a.sum();
    a_sum += a;
    a_sq += a.cwiseProduct(a);
    ab += b * a;
    b_sum += b;
    b_sq += b * b;
  }
  if (b_sum <= 0.0) {
    law.insufficient = true;
    return law;
  }
  const double n = static_cast<double>(harvest.samples);
  const Eigen::VectorXd p = a_sum / b_sum;
  const double b_mean = b_sum / n;
  // sum_i (a_ij - p_j b_i)^2 / (n b_mean^2)
  const Eigen::VectorXd resid =
      (a_sq - 2.0 * p.cwiseProduct(ab) + p.cwiseProduct(p) * b_sq).cwiseMax(0.0);
  const Eigen::VectorXd se = (resid / (n * n * b_mean * b_mean)).cwiseSqrt();
  law.mass = p.tail(j_max);
  law.std_error = se.tail(j_max);
  law.beyond = p[0];
  law.effective_survivors = b_sum * b_sum / w_sq;
  return law;
}

}  // namespace bpre
