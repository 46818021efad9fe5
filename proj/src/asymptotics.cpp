#include "bpre/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "bpre/parallel.hpp"
#include "bpre/process.hpp"

namespace bpre {

namespace {

constexpr std::int64_t kWalkShard = 1 << 14;
constexpr std::int64_t kEnvShard = 1 << 12;

// Sums of a vector statistic and its outer products, merged in shard order.
struct MomentSums {
  Eigen::VectorXd sum;
  Eigen::MatrixXd outer;
  std::int64_t count = 0;

  explicit MomentSums(int dim = 0)
      : sum(Eigen::VectorXd::Zero(dim)), outer(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& v) {
    sum += v;
    outer.noalias() += v * v.transpose();
    ++count;
  }
  void merge(const MomentSums& other) {
    sum += other.sum;
    outer += other.outer;
    count += other.count;
  }
  Eigen::VectorXd mean() const { return sum / static_cast<double>(count); }
  /// Covariance of the mean.
  Eigen::MatrixXd mean_covariance() const {
    const double n = static_cast<double>(count);
    const Eigen::VectorXd m = mean();
    Eigen::MatrixXd cov = (outer - n * m * m.transpose()) / std::max(n - 1.0, 1.0);
    return cov / n;
  }
};

template <class Shard, class Fn>
Shard merge_shards(std::int64_t samples, std::int64_t shard_size, const RunSettings& run,
                   Shard init, Fn&& fn) {
  const std::int64_t shards = shard_count(samples, shard_size);
  std::vector<Shard> parts = run_shards<Shard>(shards, run.workers, [&](std::int64_t shard) {
    Shard part = init;
    fn(shard, shard_length(shard, samples, shard_size), part);
    return part;
  });
  Shard total = init;
  for (const Shard& part : parts) total.merge(part);
  return total;
}

}  // namespace

ConstantReport const_D(const EnvironmentModel& model, int k_max, std::int64_t samples,
                       const RunSettings& run) {
  if (k_max < 1) throw ConfigError("const_D needs k_max >= 1");
  const Accumulator acc = merge_shards(
      samples, kWalkShard, run, Accumulator{},
      [&](std::int64_t shard, std::int64_t count, Accumulator& part) {
        for (std::int64_t i = 0; i < count; ++i) {
          // One stream per walk, so a longer truncation extends the same walks.
          RandomStream rng = make_stream(run.seed, StreamDomain::ConstD,
                                         static_cast<std::uint64_t>(shard * kWalkShard + i));
          double s = 0.0;
          double v = 0.0;
          for (int k = 1; k <= k_max; ++k) {
            s += model.sample_increment(rng);
            if (s >= 0.0) v += 1.0 / k;
          }
          part.add(v);
        }
      });
  ConstantReport r;
  r.name = "D";
  r.value = acc.mean();
  r.mc_stderr = acc.std_error();
  r.truncation_index = k_max;
  // P(S_k >= 0) ~ k A(ak), so the tail is about the integral of A(at).
  r.truncation_bound = 2.0 * model.tail_majorant_integral(k_max);
  r.seed = run.seed;
  return r;
}

NegativePartMoments negative_part_moments(const EnvironmentModel& model, int n_max,
                                          std::int64_t samples, const RunSettings& run,
                                          StreamDomain domain) {
  const MomentSums sums = merge_shards(
      samples, kWalkShard, run, MomentSums(n_max),
      [&](std::int64_t shard, std::int64_t count, MomentSums& part) {
        RandomStream rng = make_stream(run.seed, domain, static_cast<std::uint64_t>(shard));
        Eigen::VectorXd v(n_max);
        for (std::int64_t i = 0; i < count; ++i) {
          double s = 0.0;
          for (int k = 0; k < n_max; ++k) {
            s += model.sample_increment(rng);
            v[k] = s < 0.0 ? std::exp(s) : 0.0;
          }
          part.add(v);
        }
      });
  NegativePartMoments out;
  out.mean = sums.mean();
  out.covariance = sums.mean_covariance();
  out.samples = sums.count;
  return out;
}

ConstantReport const_K1(const EnvironmentModel& model, int n_max, std::int64_t samples,
                        const RunSettings& run) {
  if (n_max < 1) throw ConfigError("const_K1 needs n_max >= 1");
  const NegativePartMoments m = negative_part_moments(model, n_max, samples, run);
  const Eigen::VectorXd weights =
      Eigen::VectorXd::LinSpaced(n_max, 1.0, static_cast<double>(n_max)).cwiseInverse();
  const double exponent = weights.dot(m.mean);
  const double prefactor = model.beta() / model.drift();
  ConstantReport r;
  r.name = "K1";
  r.value = prefactor * std::exp(exponent);
  r.mc_stderr = r.value * std::sqrt(std::max(0.0, weights.dot(m.covariance * weights)));
  r.truncation_index = n_max;
  // Tail terms ~ (beta / a) A(an) / n.
  const double tail = prefactor * model.tail_majorant_integral(n_max) / (n_max + 1.0);
  r.truncation_bound = r.value * std::expm1(2.0 * tail);
  r.seed = run.seed;
  return r;
}

namespace {

struct SeriesShard {
  MomentSums terms;
  Accumulator total;
  Accumulator tail;

  void merge(const SeriesShard& other) {
    terms.merge(other.terms);
    total.merge(other.total);
    tail.merge(other.tail);
  }
};

}  // namespace

SurvivalSeries const_K(const EnvironmentModel& model, int j_max, std::int64_t env_samples,
                       const RunSettings& run, int tail_horizon) {
  if (j_max < 0) throw ConfigError("const_K needs j_max >= 0");
  const int horizon = std::max(tail_horizon > 0 ? tail_horizon : 4 * j_max, j_max);
  const GammaLaw gamma_law = model.gamma_limit_law();
  SeriesShard init{MomentSums(j_max + 1), {}, {}};
  const SeriesShard sums = merge_shards(
      env_samples, kEnvShard, run, init,
      [&](std::int64_t shard, std::int64_t count, SeriesShard& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::ConstK, static_cast<std::uint64_t>(shard));
        Eigen::VectorXd term(j_max + 1);
        for (std::int64_t i = 0; i < count; ++i) {
          const double u0 = 1.0 - gamma_law.sample(rng);
          const EnvRealization env = sample_environment(model, horizon, rng);
          term[0] = u0;
          bool lf = true;
          for (const OffspringLaw& law : env.laws) lf = lf && law.linear_fractional();
          if (lf) {
            MobiusMap<double> prefix;
            for (int j = 1; j <= j_max; ++j) {
              prefix = prefix.then_inner(MobiusMap<double>::from_law(env.laws[static_cast<std::size_t>(j - 1)]));
              term[j] = prefix(u0);
            }
          } else {
            for (int j = 1; j <= j_max; ++j) term[j] = compose_pgf_complement(env, 0, j, u0);
          }
          double min_s = 0.0;
          double tail = 0.0;
          for (int j = 1; j <= horizon; ++j) {
            min_s = std::min(min_s, env.s[j]);
            if (j > j_max) tail += std::exp(min_s);
          }
          part.terms.add(term);
          part.total.add(term.sum());
          part.tail.add(tail);
        }
      });
  SurvivalSeries out;
  out.term = sums.terms.mean();
  out.term_stderr = sums.terms.mean_covariance().diagonal().cwiseMax(0.0).cwiseSqrt();
  out.K.name = "K";
  out.K.value = sums.total.mean();
  out.K.mc_stderr = sums.total.std_error();
  out.K.truncation_index = j_max;
  out.K.truncation_bound = sums.tail.mean();
  out.K.seed = run.seed;
  return out;
}

double theoretical_survival(const EnvironmentModel& model, const ConstantReport& K, int n) {
  return K.value * model.tail(n * model.drift());
}

double tau_tail_law(const EnvironmentModel& model, const ConstantReport& D, int n) {
  return std::exp(D.value) * model.tail(model.drift() * n);
}

LadderSeries ladder_series(const EnvironmentModel& model, int k_max, std::int64_t samples,
                           const RunSettings& run, int walk_cap) {
  struct Counts {
    Eigen::VectorXd alive;
    Accumulator tau;
    void merge(const Counts& o) {
      alive += o.alive;
      tau.merge(o.tau);
    }
  };
  Counts start{Eigen::VectorXd::Zero(k_max + 1), {}};
  const Counts counts = merge_shards(
      samples, kWalkShard, run, start,
      [&](std::int64_t shard, std::int64_t count, Counts& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::Ladder, static_cast<std::uint64_t>(shard));
        for (std::int64_t i = 0; i < count; ++i) {
          double s = 0.0;
          int tau = 0;
          while (tau < walk_cap) {
            ++tau;
            s += model.sample_increment(rng);
            if (s < 0.0) break;
          }
          // tau > k for k = 0..tau-1
          const int upto = std::min(tau - 1, k_max);
          part.alive.head(upto + 1).array() += 1.0;
          part.tau.add(tau);
        }
      });
  LadderSeries out;
  out.tail = counts.alive / static_cast<double>(counts.tau.count());
  out.E_tau.name = "E_tau";
  out.E_tau.value = counts.tau.mean();
  out.E_tau.mc_stderr = counts.tau.std_error();
  out.E_tau.truncation_index = walk_cap;
  out.E_tau.truncation_bound = 2.0 * model.tail_majorant_integral(walk_cap);
  out.E_tau.seed = run.seed;
  return out;
}

double durrett_law(const LadderSeries& ladder, int j) {
  if (j < 1 || j - 1 >= ladder.tail.size()) throw std::out_of_range("durrett_law: j out of range");
  return ladder.tail[j - 1] / ladder.E_tau.value;
}

double un_yaglom_law(const SurvivalSeries& series, int j) {
  if (j < 1 || j - 1 >= series.term.size()) throw std::out_of_range("un_yaglom_law: j out of range");
  return series.term[j - 1] / series.K.value;
}

double un_yaglom_tail_bound(const SurvivalSeries& series) {
  return series.K.truncation_bound / series.K.value;
}

LocalLimitPrediction local_limit_prediction(const EnvironmentModel& model, int n, double x,
                                            double h, double N) {
  if (!(h > 0.0)) throw ConfigError("local_limit_prediction needs h > 0");
  LocalLimitPrediction out;
  const double nn = static_cast<double>(n);
  out.value = h * model.beta() * nn * model.tail(x - model.drift()) / x;
  out.threshold = N * std::sqrt(nn * std::log(nn + 1.0));
  out.below_uniform_regime = x < out.threshold;
  return out;
}

void exp_series(const Eigen::VectorXd& c, Eigen::VectorXd& b, Eigen::MatrixXd& jacobian) {
  const int n_max = static_cast<int>(c.size());
  b = Eigen::VectorXd::Zero(n_max + 1);
  jacobian = Eigen::MatrixXd::Zero(n_max + 1, n_max);
  b[0] = 1.0;
  // n b_n = sum_{k=1}^n c_k b_{n-k}
  for (int n = 1; n <= n_max; ++n) {
    for (int k = 1; k <= n; ++k) {
      b[n] += c[k - 1] * b[n - k];
      jacobian.row(n) += c[k - 1] * jacobian.row(n - k);
      jacobian(n, k - 1) += b[n - k];
    }
    b[n] /= n;
    jacobian.row(n) /= n;
  }
}

BaxterReport baxter_check(const EnvironmentModel& model, int n_max, std::int64_t samples,
                          const RunSettings& run) {
  if (n_max < 1 || n_max > 8) throw ConfigError("baxter_check needs 1 <= n_max <= 8");
  const NegativePartMoments c =
      negative_part_moments(model, n_max, samples, run, StreamDomain::BaxterSeries);
  const MomentSums direct = merge_shards(
      samples, kWalkShard, run, MomentSums(n_max),
      [&](std::int64_t shard, std::int64_t count, MomentSums& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::BaxterDirect, static_cast<std::uint64_t>(shard));
        Eigen::VectorXd v(n_max);
        for (std::int64_t i = 0; i < count; ++i) {
          double s = 0.0;
          bool below = true;
          for (int k = 0; k < n_max; ++k) {
            s += model.sample_increment(rng);
            below = below && s < 0.0;
            v[k] = below ? std::exp(s) : 0.0;
          }
          part.add(v);
        }
      });
  Eigen::VectorXd b;
  Eigen::MatrixXd jac;
  exp_series(c.mean, b, jac);
  BaxterReport r;
  r.series = b.tail(n_max);
  r.direct = direct.mean();
  const Eigen::MatrixXd J = jac.bottomRows(n_max);
  const Eigen::VectorXd series_var = (J * c.covariance * J.transpose()).diagonal();
  const Eigen::VectorXd direct_var = direct.mean_covariance().diagonal();
  r.combined_stderr = (series_var + direct_var).cwiseMax(0.0).cwiseSqrt();
  r.z_score = (r.series - r.direct).cwiseQuotient(r.combined_stderr);
  r.relative_deviation = (r.series - r.direct).cwiseQuotient(r.direct);
  return r;
}

double default_gamma_delta(double x) { return -1.0 / std::sqrt(x); }

namespace {

struct GammaShard {
  Accumulator indicator;
  Accumulator pgf;
  void merge(const GammaShard& o) {
    indicator.merge(o.indicator);
    pgf.merge(o.pgf);
  }
};

}  // namespace

GammaMeanReport empirical_gamma_mean(const EnvironmentModel& model, double x,
                                     std::int64_t samples, const RunSettings& run,
                                     const std::function<double(double)>& delta_fn) {
  const double y = x * (1.0 + delta_fn(x));
  const double count_threshold = std::exp(y);
  const double u = std::exp(-y);
  const GammaShard sums = merge_shards(
      samples, kWalkShard, run, GammaShard{},
      [&](std::int64_t shard, std::int64_t count, GammaShard& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::GammaMean, static_cast<std::uint64_t>(shard));
        for (std::int64_t i = 0; i < count; ++i) {
          const OffspringLaw law = model.sample_law_above(x, rng);
          part.indicator.add(offspring_count(law, rng) <= count_threshold ? 1.0 : 0.0);
          part.pgf.add(1.0 - pgf_complement(law, u));
        }
      });
  GammaMeanReport r;
  r.indicator = Estimate::from(sums.indicator, Method::Conditional);
  r.pgf = Estimate::from(sums.pgf, Method::Conditional);
  r.combined_stderr = std::hypot(r.indicator.std_error, r.pgf.std_error);
  return r;
}

}  // namespace bpre
