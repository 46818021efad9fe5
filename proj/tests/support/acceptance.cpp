#include "acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "bpre/asymptotics.hpp"
#include "bpre/commands.hpp"
#include "bpre/montecarlo.hpp"
#include "bpre/parallel.hpp"
#include "bpre/process.hpp"
#include "oracles.hpp"

namespace bpre::acceptance {

namespace {

// Tolerances and run sizes.
constexpr double kExactRelTol = 1e-10;
constexpr double kExactSeconds = 10.0;
constexpr int kExactEnvironments = 1000;
constexpr int kExactSteps = 50;
constexpr int kMomentEnvironments = 20;
constexpr int kMomentSteps = 5;
constexpr std::int64_t kMomentPaths = 10'000'000;
constexpr double kMomentOracleTol = 1e-8;
constexpr double kZ = 4.0;
constexpr int kSeriesJMax = 60;
constexpr std::int64_t kEnvSamples = 100'000;
constexpr std::int64_t kIsSamples = 100'000;
constexpr double kIsRelStderr = 0.02;
constexpr double kRatioTol = 0.25;
constexpr double kTrendSlack = 0.05;
constexpr double kSurvivalSeconds = 300.0;
constexpr int kDKMax = 200;
constexpr std::int64_t kWalkSamples = 1'000'000;
constexpr double kTauLo = 0.75, kTauHi = 1.25;
constexpr int kLawN = 60;
constexpr std::int64_t kLawSurvivors = 2000;
constexpr int kLawTable = 10;
constexpr double kTvTol = 0.10;
constexpr int kExplosionN = 100;
constexpr double kExplosionFreq = 0.9;
constexpr int kFltN = 100;
constexpr std::int64_t kFltSurvivors = 20'000;
constexpr double kKsTol = 0.08;
constexpr double kMeanRTol = 0.05;
constexpr double kCorrTol = 0.1;
constexpr double kNeeLo = 0.7, kNeeHi = 1.3;
constexpr int kBaxterN = 6;
constexpr std::int64_t kBaxterSamples = 1'000'000;
constexpr double kGammaX = 25.0;
constexpr std::int64_t kGammaSamples = 1'000'000;
constexpr double kGammaTolAtom = 0.05;
constexpr double kGammaTolGeometric = 0.02;
constexpr double kGwP = 0.4;
constexpr int kGwMaxN = 20;
constexpr std::int64_t kGwSamples = 1'000'000;
constexpr double kGwSeriesTol = 1e-8;

std::string num(double x, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

RunSettings settings(const Options& o) { return {o.seed, o.workers}; }

EnvironmentModel geometric() { return EnvironmentModel::defaults(Family::ParetoGeometric); }
EnvironmentModel atom() { return EnvironmentModel::defaults(Family::ParetoFractionalAtom); }

struct ExactSweep {
  double max_rel = 0.0;
  int g_violations = 0;
  int bound_violations = 0;
  int evaluations = 0;
};

void check_exact(const EnvRealization& env, int n, ExactSweep& sweep) {
  const SurvivalPair pair = exact_survival_prob(env, n);
  const double rel = pair.direct > 0.0 ? std::abs(pair.direct - pair.formula) / pair.direct
                                       : std::abs(pair.formula);
  sweep.max_rel = std::max(sweep.max_rel, rel);
  sweep.g_violations += pair.g_violations;
  sweep.bound_violations += pair.bound_violations;
  sweep.evaluations += n;
}

// The 50-step environments of criterion 1, all three families.
ExactSweep exact_sweep(const Options& o) {
  ExactSweep sweep;
  const Family families[] = {Family::ParetoGeometric, Family::ParetoFractionalAtom, Family::ParetoPoisson};
  for (Family f : families) {
    const EnvironmentModel model = EnvironmentModel::defaults(f);
    RandomStream rng = make_stream(o.seed, StreamDomain::Test, 100 + static_cast<std::uint64_t>(f));
    for (int i = 0; i < kExactEnvironments; ++i) check_exact(sample_environment(model, kExactSteps, rng), kExactSteps, sweep);
  }
  return sweep;
}

std::vector<EnvRealization> moment_environments(const Options& o) {
  RandomStream rng = make_stream(o.seed, StreamDomain::Test, 200);
  std::vector<EnvRealization> envs;
  for (int i = 0; i < kMomentEnvironments; ++i) envs.push_back(sample_environment(geometric(), kMomentSteps, rng));
  return envs;
}

std::vector<std::vector<OffspringLaw>> tiny_environments() {
  return {
      {OffspringLaw::geometric(0.3), OffspringLaw::geometric(0.5), OffspringLaw::geometric(0.45)},
      {OffspringLaw::geometric(0.55), OffspringLaw::geometric(0.2), OffspringLaw::geometric(0.4),
       OffspringLaw::geometric(0.5), OffspringLaw::geometric(0.35)},
      {OffspringLaw::poisson(0.8), OffspringLaw::poisson(1.1), OffspringLaw::poisson(0.6)},
      {OffspringLaw::fractional_atom(0.25, std::log(0.5 / 0.5)), OffspringLaw::geometric(0.4),
       OffspringLaw::poisson(0.9), OffspringLaw::fractional_atom(0.1, std::log(0.45 / 0.55))},
      {OffspringLaw::geometric(0.5), OffspringLaw::geometric(0.5), OffspringLaw::geometric(0.5),
       OffspringLaw::geometric(0.5), OffspringLaw::geometric(0.5)},
  };
}

Accumulator empirical_square(const EnvRealization& env, std::int64_t paths, std::uint64_t stream,
                             const Options& o) {
  constexpr std::int64_t shard_size = 1 << 16;
  const std::vector<Accumulator> parts = run_shards<Accumulator>(
      shard_count(paths, shard_size), o.workers, [&](std::int64_t shard) {
        RandomStream rng = make_stream(o.seed, StreamDomain::Test, (stream << 24) | static_cast<std::uint64_t>(shard));
        Accumulator acc;
        const std::int64_t count = shard_length(shard, paths, shard_size);
        for (std::int64_t i = 0; i < count; ++i) {
          double z = 1.0;
          for (int k = 0; k < env.length() && z > 0.0; ++k)
            z = next_generation(env.laws[static_cast<std::size_t>(k)], z, rng);
          acc.add(z * z);
        }
        return acc;
      });
  Accumulator total;
  for (const Accumulator& a : parts) total.merge(a);
  return total;
}

double tv_lumped(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return tv_distance(p, 1.0 - p.sum(), q, 1.0 - q.sum());
}

double tv_renormalized(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return tv_distance(p / p.sum(), 0.0, q / q.sum(), 0.0);
}

CriterionResult c1(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExactSweep sweep = exact_sweep(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CriterionResult r;
  r.passed = sweep.max_rel <= kExactRelTol && secs < kExactSeconds;
  r.detail = "max |direct - formula| / direct = " + num(sweep.max_rel) + " (tol " + num(kExactRelTol) +
             ") over " + std::to_string(3 * kExactEnvironments) + " environments of " +
             std::to_string(kExactSteps) + " steps, three families; time " + num(secs, 3) + " s (< " +
             num(kExactSeconds) + ")";
  return r;
}

CriterionResult c2(const Options& o) {
  const std::vector<EnvRealization> envs = moment_environments(o);
  double worst_z = 0.0;
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const double formula = second_moment(envs[i], kMomentSteps).value;
    const Accumulator acc = empirical_square(envs[i], kMomentPaths, i, o);
    worst_z = std::max(worst_z, std::abs(formula - acc.mean()) / acc.std_error());
  }
  double worst_rel = 0.0;
  for (const auto& laws : tiny_environments()) {
    const double formula = second_moment(EnvRealization(laws), static_cast<int>(laws.size())).value;
    const double exact = oracle::second_moment(laws);
    worst_rel = std::max(worst_rel, std::abs(formula - exact) / exact);
  }
  CriterionResult r;
  r.passed = worst_z <= kZ && worst_rel <= kMomentOracleTol;
  r.detail = "max |formula - MC| / SE = " + num(worst_z) + " over " + std::to_string(kMomentEnvironments) +
             " environments x " + num(static_cast<double>(kMomentPaths)) + " paths (tol " + num(kZ) +
             "); max rel. gap to convolution oracle = " + num(worst_rel) + " (tol " + num(kMomentOracleTol) + ")";
  return r;
}

CriterionResult c3(const Options& o) {
  ExactSweep sweep = exact_sweep(o);
  for (const EnvRealization& env : moment_environments(o)) check_exact(env, kMomentSteps, sweep);
  for (const auto& laws : tiny_environments()) check_exact(EnvRealization(laws), static_cast<int>(laws.size()), sweep);
  CriterionResult r;
  r.passed = sweep.g_violations == 0 && sweep.bound_violations == 0;
  r.detail = "g_k outside [0, 2 eta_{k+1}]: " + std::to_string(sweep.g_violations) +
             "; survival above min e^{S_i}: " + std::to_string(sweep.bound_violations) + " (of " +
             std::to_string(sweep.evaluations) + " evaluations)";
  return r;
}

CriterionResult c4(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const EnvironmentModel model = geometric();
  const RunSettings run = settings(o);
  const SurvivalSeries K = const_K(model, kSeriesJMax, kEnvSamples, run);
  const BigJumpConfig cfg;
  double r40 = 0.0, r80 = 0.0, worst_rel = 0.0;
  std::string ratios;
  for (int n : {40, 60, 80}) {
    const BigJumpEstimate e = estimate_survival_bigjump(model, n, kIsSamples, cfg, run);
    const double ratio = e.total.point / theoretical_survival(model, K.K, n);
    worst_rel = std::max(worst_rel, e.total.relative_error());
    if (n == 40) r40 = ratio;
    if (n == 80) r80 = ratio;
    ratios += "r(" + std::to_string(n) + ")=" + num(ratio) + " ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CriterionResult r;
  r.passed = worst_rel < kIsRelStderr && std::abs(r80 - 1.0) < kRatioTol &&
             std::abs(r80 - 1.0) <= std::abs(r40 - 1.0) + kTrendSlack && secs < kSurvivalSeconds;
  r.detail = ratios + "(K=" + num(K.K.value) + "); need |r(80)-1| < " + num(kRatioTol) +
             ", |r(80)-1| <= |r(40)-1| + " + num(kTrendSlack) + ", max rel. stderr " + num(worst_rel) +
             " < " + num(kIsRelStderr) + ", time " + num(secs, 3) + " s";
  return r;
}

CriterionResult c5(const Options& o) {
  const EnvironmentModel model = geometric();
  const RunSettings run = settings(o);
  const ConstantReport D = const_D(model, kDKMax, kWalkSamples, run);
  const BigJumpConfig cfg;
  const auto ratio = [&](int n) {
    return estimate_walk_bigjump(model, n, kIsSamples, cfg, run).tau_tail.point / tau_tail_law(model, D, n);
  };
  const double r40 = ratio(40), r80 = ratio(80);
  CriterionResult r;
  r.passed = r80 >= kTauLo && r80 <= kTauHi && std::abs(r80 - 1.0) <= std::abs(r40 - 1.0) + kTrendSlack;
  r.detail = "P(tau>n)/(e^D A(an)): n=40 " + num(r40) + ", n=80 " + num(r80) + " (need [" + num(kTauLo) +
             ", " + num(kTauHi) + "] at 80, trend slack " + num(kTrendSlack) + "); D=" + num(D.value);
  return r;
}

CriterionResult c6(const Options& o) {
  const RunSettings run = settings(o);
  const BigJumpConfig cfg;
  CriterionResult r;
  r.passed = true;
  for (const EnvironmentModel& model : {geometric(), atom()}) {
    const SurvivalSeries K = const_K(model, kSeriesJMax, kEnvSamples, run);
    const ConditionalLaw law = conditional_un_distribution(model, kLawN, kLawSurvivors, cfg, run);
    Eigen::VectorXd q(kLawTable);
    for (int j = 1; j <= kLawTable; ++j) q[j - 1] = un_yaglom_law(K, j);
    const Eigen::VectorXd p = law.mass.head(kLawTable);
    const double tv = tv_lumped(p, q);
    r.passed = r.passed && tv < kTvTol && law.survivors >= kLawSurvivors;
    r.detail += to_string(model.family()) + ": TV " + num(tv) + " (" + std::to_string(law.survivors) +
                " survivors, mass beyond j=10 " + num(1.0 - p.sum()) + ", TV given U_n<=10 " +
                num(tv_renormalized(p, q)) + "); ";
  }
  r.detail += "tol " + num(kTvTol);
  return r;
}

CriterionResult c7(const Options& o) {
  const EnvironmentModel model = geometric();
  const RunSettings run = settings(o);
  const LadderSeries ladder = ladder_series(model, kLawTable, kWalkSamples, run);
  const ConditionalLaw law = conditional_un_distribution_tau(model, kLawN, kIsSamples, BigJumpConfig{}, run);
  Eigen::VectorXd q(kLawTable);
  for (int j = 1; j <= kLawTable; ++j) q[j - 1] = durrett_law(ladder, j);
  const Eigen::VectorXd p = law.mass.head(kLawTable);
  const double tv = tv_lumped(p, q);
  CriterionResult r;
  r.passed = tv < kTvTol && law.survivors >= kLawSurvivors;
  r.detail = "TV " + num(tv) + " (tol " + num(kTvTol) + "; " + std::to_string(law.survivors) +
             " paths with tau>n, E[tau]=" + num(ladder.E_tau.value) + ", mass beyond j=10 " +
             num(1.0 - p.sum()) + ", TV given U_n<=10 " + num(tv_renormalized(p, q)) + ")";
  return r;
}

CriterionResult c8(const Options& o) {
  const ExplosionStats st = explosion_statistics(geometric(), kExplosionN, kLawSurvivors, BigJumpConfig{}, settings(o));
  CriterionResult r;
  r.passed = st.freq_both >= kExplosionFreq;
  r.detail = "P(U_n < log n, N_{U_n} >= e^{n(a+3/log n)} | Z_n>0) = " + num(st.freq_both) + " +- " +
             num(st.freq_both_stderr) + " (need >= " + num(kExplosionFreq) + "); U_n < log n alone " +
             num(st.freq_early_jump) + ", big family alone " + num(st.freq_big_family);
  return r;
}

CriterionResult c9(const Options& o) {
  const Eigen::VectorXd grid = default_flt_grid();
  const FltReport f = flt_suite(geometric(), kFltN, kFltSurvivors, grid, BigJumpConfig{}, settings(o));
  const double ks1 = f.ks_W[grid.size() - 1];
  const double corr_gap = std::abs(f.corr_half_one - std::sqrt(0.5));
  CriterionResult r;
  r.passed = f.survivors >= kLawSurvivors && ks1 < kKsTol && f.ks_increment < kKsTol &&
             f.max_mean_R_dev < kMeanRTol && corr_gap < kCorrTol;
  r.detail = "KS W(1) " + num(ks1) + ", KS W(1)-W(0.2) " + num(f.ks_increment) + " (tol " + num(kKsTol) +
             "); max |mean R(t)-1| " + num(f.max_mean_R_dev) + " (tol " + num(kMeanRTol) + "); corr " +
             num(f.corr_half_one) + " (|gap| tol " + num(kCorrTol) + "); " + std::to_string(f.survivors) +
             " survivors, " + std::to_string(f.excluded_capped) + " capped excluded";
  return r;
}

CriterionResult c10(const Options& o) {
  const EnvironmentModel model = geometric();
  const WalkBigJumpEstimate w = estimate_walk_bigjump(model, kLawN, kIsSamples, BigJumpConfig{}, settings(o));
  const double ratio = model.drift() * w.negative_part.point / (model.beta() * model.tail(model.drift() * kLawN));
  CriterionResult r;
  r.passed = ratio >= kNeeLo && ratio <= kNeeHi;
  r.detail = "a E[e^{S_n}; S_n<0] / (beta A(an)) at n=60: " + num(ratio) + " +- " +
             num(ratio * w.negative_part.relative_error()) + " (need [" + num(kNeeLo) + ", " + num(kNeeHi) + "])";
  return r;
}

CriterionResult c11(const Options& o) {
  const BaxterReport b = baxter_check(geometric(), kBaxterN, kBaxterSamples, settings(o));
  const double worst = b.z_score.cwiseAbs().maxCoeff();
  CriterionResult r;
  r.passed = worst <= kZ;
  r.detail = "max |series - direct| / SE over n<=" + std::to_string(kBaxterN) + ": " + num(worst) + " (tol " +
             num(kZ) + "); max rel. deviation " + num(b.relative_deviation.cwiseAbs().maxCoeff());
  return r;
}

CriterionResult c12(const Options& o) {
  const RunSettings run = settings(o);
  const GammaMeanReport fa = empirical_gamma_mean(atom(), kGammaX, kGammaSamples, run);
  const GammaMeanReport ge = empirical_gamma_mean(geometric(), kGammaX, kGammaSamples, run);
  const double target = atom().gamma_limit_law().mean();
  CriterionResult r;
  r.passed = std::abs(fa.indicator.point - target) <= kGammaTolAtom && std::abs(fa.pgf.point - target) <= kGammaTolAtom &&
             std::abs(ge.indicator.point) <= kGammaTolGeometric && std::abs(ge.pgf.point) <= kGammaTolGeometric;
  r.detail = "fractional atom: indicator " + num(fa.indicator.point) + ", pgf " + num(fa.pgf.point) + " vs " +
             num(target) + " (tol " + num(kGammaTolAtom) + "); geometric: indicator " + num(ge.indicator.point) +
             ", pgf " + num(ge.pgf.point) + " vs 0 (tol " + num(kGammaTolGeometric) + ")";
  return r;
}

CriterionResult c13(const Options& o) {
  const OffspringLaw law = OffspringLaw::geometric(kGwP);
  const EnvironmentModel model = EnvironmentModel::fixed(law);
  const RunSettings run = settings(o);
  double worst_z = 0.0, worst_exact = 0.0;
  const EnvRealization env(std::vector<OffspringLaw>(kGwMaxN, law));
  for (int n = 1; n <= kGwMaxN; ++n) {
    const double truth = oracle::gw_survival(kGwP, n);
    const Estimate e = estimate_survival_naive(model, n, kGwSamples, run);
    worst_z = std::max(worst_z, std::abs(e.point - truth) / std::sqrt(truth * (1.0 - truth) / kGwSamples));
    worst_exact = std::max(worst_exact, std::abs(exact_survival_prob(env, n).direct - truth) / truth);
  }
  const SurvivalSeries K = const_K(model, kSeriesJMax, 1000, run);
  const double series_gap = std::abs(K.K.value - oracle::gw_survival_series(kGwP));
  CriterionResult r;
  r.passed = worst_z <= kZ && series_gap <= kGwSeriesTol && worst_exact <= kExactRelTol;
  r.detail = "p=" + num(kGwP) + ", n<=" + std::to_string(kGwMaxN) + ": max |MC - closed form| / SE " + num(worst_z) +
             " (tol " + num(kZ) + "); exact composition rel. gap " + num(worst_exact) + "; K series gap " +
             num(series_gap) + " (tol " + num(kGwSeriesTol) + ")";
  return r;
}

ExperimentConfig small_config(const Options& o, std::vector<int> n) {
  ExperimentConfig cfg;
  cfg.run.seed = o.seed;
  cfg.run.workers = o.workers;
  cfg.run.n = std::move(n);
  cfg.run.samples = 2000;
  cfg.run.min_survivors = 200;
  cfg.run.walk_samples = 20000;
  cfg.run.env_samples = 2000;
  cfg.run.k_max = 50;
  cfg.run.series_j_max = 20;
  cfg.output.format = "csv";
  return cfg;
}

CriterionResult c14(const Options& o) {
  std::vector<std::pair<std::string, ExperimentConfig>> runs;
  ExperimentConfig sim = small_config(o, {5});
  sim.run.samples = 10;
  sim.run.full_paths = true;
  runs.push_back({"simulate", sim});
  runs.push_back({"constants", small_config(o, {20})});
  runs.push_back({"survival", small_config(o, {20, 30})});
  runs.push_back({"unlaw", small_config(o, {20})});
  runs.push_back({"flt", small_config(o, {30})});
  CriterionResult r;
  r.passed = true;
  std::size_t files = 0;
  for (const auto& [name, cfg] : runs) {
    const CommandOutput first = run_command(name, cfg);
    const CommandOutput second = run_command(name, cfg);
    const bool same = first.files == second.files && !first.files.empty();
    files += first.files.size();
    if (!same) r.detail += name + " differs; ";
    r.passed = r.passed && same;
  }
  r.detail += std::to_string(runs.size()) + " commands run twice, " + std::to_string(files) +
              " files compared byte for byte";
  return r;
}

}  // namespace

std::vector<int> criterion_ids() {
  std::vector<int> ids;
  for (int i = 1; i <= 14; ++i) ids.push_back(i);
  return ids;
}

std::string criterion_name(int id) {
  static const char* names[] = {"",
                                "exact-survival-formula",
                                "second-moment-formula",
                                "g-bounds",
                                "survival-ratio",
                                "tau-tail-ratio",
                                "un-law-given-survival",
                                "un-law-given-tau",
                                "big-jump-explosion",
                                "functional-limit",
                                "negative-part-ratio",
                                "baxter-identity",
                                "gamma-recovery",
                                "galton-watson-closed-form",
                                "reproducibility"};
  if (id < 1 || id > 14) throw std::out_of_range("no acceptance criterion " + std::to_string(id));
  return names[id];
}

CriterionResult run_criterion(int id, const Options& opts) {
  static const std::function<CriterionResult(const Options&)> table[] = {
      c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13, c14};
  const std::string name = criterion_name(id);
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r = table[id - 1](opts);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.id = id;
  r.name = name;
  return r;
}

std::string format_line(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "%s [%2d] %s: ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  return head + r.detail;
}

}  // namespace bpre::acceptance
