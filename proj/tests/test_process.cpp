#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bpre/process.hpp"
#include "bpre/stats.hpp"
#include "oracles.hpp"

using namespace bpre;

namespace {

EnvRealization env_of(std::vector<OffspringLaw> laws) { return EnvRealization(std::move(laws)); }

EnvRealization walk_env(const std::vector<double>& increments) {
  std::vector<OffspringLaw> laws;
  for (double x : increments) laws.push_back(OffspringLaw::geometric_from_log_mean(x));
  return env_of(laws);
}

}  // namespace

TEST_CASE("one generation of a geometric law") {
  const EnvRealization env = env_of({OffspringLaw::geometric(0.4)});
  RandomStream rng = make_stream(1, StreamDomain::Test, 0);
  constexpr int n = 200000;
  int extinct = 0;
  for (int i = 0; i < n; ++i)
    if (simulate_path(env, rng).z[1] == 0.0) ++extinct;
  CHECK(std::abs(extinct / double(n) - 0.6) < 4.0 * std::sqrt(0.24 / n));
  CHECK(compose_pgf(env, 0, 1, 0.0) == doctest::Approx(0.6));
}

TEST_CASE("Poisson generation from a fixed population") {
  const OffspringLaw law = OffspringLaw::poisson(0.8);
  RandomStream rng = make_stream(2, StreamDomain::Test, 0);
  Accumulator acc;
  for (int i = 0; i < 1'000'000; ++i) acc.add(next_generation(law, 25.0, rng));
  CHECK(std::abs(acc.mean() - 20.0) < 4.0 * acc.std_error());
  CHECK(acc.variance() == doctest::Approx(20.0).epsilon(0.01));
}

TEST_CASE("fractional atom generation mean") {
  const OffspringLaw law = OffspringLaw::fractional_atom(0.3, std::log(1.5));
  RandomStream rng = make_stream(3, StreamDomain::Test, 0);
  Accumulator acc;
  for (int i = 0; i < 300000; ++i) acc.add(next_generation(law, 10.0, rng));
  CHECK(std::abs(acc.mean() - 10.0 * law.mean()) < 4.0 * acc.std_error());
}

TEST_CASE("paths are absorbed at zero and keep the walk") {
  const EnvironmentModel m = EnvironmentModel::defaults();
  RandomStream rng = make_stream(4, StreamDomain::Test, 0);
  for (int i = 0; i < 2000; ++i) {
    const PathRecord p = simulate_path(m, 30, rng);
    REQUIRE(p.z.size() == 31);
    REQUIRE(p.s.size() == 31);
    REQUIRE(p.s[0] == 0.0);
    for (int k = 1; k <= 30; ++k) {
      REQUIRE(p.s[k] - p.s[k - 1] == doctest::Approx(p.laws[k - 1].log_mean).epsilon(1e-12));
      if (p.z[k - 1] == 0.0) REQUIRE(p.z[k] == 0.0);
    }
  }
}

TEST_CASE("quenched mean in a fixed environment") {
  const EnvironmentModel m = EnvironmentModel::defaults();
  RandomStream env_rng = make_stream(5, StreamDomain::Test, 0);
  const EnvRealization env = sample_environment(m, 6, env_rng);
  RandomStream rng = make_stream(5, StreamDomain::Test, 1);
  Accumulator acc;
  for (int i = 0; i < 1'000'000; ++i) acc.add(simulate_path(env, rng).z[6]);
  CHECK(std::abs(acc.mean() - std::exp(env.s[6])) < 4.0 * acc.std_error());
}

TEST_CASE("big-jump family size is recorded") {
  const EnvRealization env = walk_env({-0.5, 6.0, -0.5});
  RandomStream rng = make_stream(6, StreamDomain::Test, 0);
  PathOptions opts;
  opts.jump_threshold = 1.5;
  int seen = 0;
  for (int i = 0; i < 5000; ++i) {
    const PathRecord p = simulate_path(env, rng, opts);
    REQUIRE(p.big_jump_index == 2);
    if (p.n_big_jump_offspring) {
      ++seen;
      REQUIRE(*p.n_big_jump_offspring <= p.z[2]);
    }
  }
  CHECK(seen > 0);
}

TEST_CASE("max of many families by cdf inversion") {
  const OffspringLaw law = OffspringLaw::geometric(0.6);
  for (double z : {2e4, 1e6}) {
    const double m = max_offspring_quantile(law, z, 0.5);
    CHECK(std::pow(law.cdf(m), z) >= 0.5);
    CHECK(std::pow(law.cdf(m - 1.0), z) < 0.5);
  }
}

TEST_CASE("compose_pgf edge cases") {
  const EnvRealization env = walk_env({-0.3, 0.2, -1.0});
  CHECK(compose_pgf(env, 3, 3, 0.37) == 0.37);
  CHECK(compose_pgf(env, 1, 1, 0.0) == 0.0);
  CHECK_THROWS_AS(compose_pgf(env, 0, 3, 1.5), std::domain_error);
  CHECK_THROWS_AS(compose_pgf(env, 0, 3, -0.1), std::domain_error);
}

TEST_CASE("composition against the convolution oracle") {
  const std::vector<OffspringLaw> laws{OffspringLaw::geometric(0.3), OffspringLaw::geometric(0.55),
                                       OffspringLaw::geometric(0.2)};
  const EnvRealization env = env_of(laws);
  CHECK(std::abs(compose_pgf(env, 0, 3, 0.0) - oracle::extinction_probability(laws)) < 1e-10);
  const std::vector<OffspringLaw> mixed{OffspringLaw::poisson(1.2), OffspringLaw::fractional_atom(0.2, 0.1),
                                        OffspringLaw::geometric(0.4)};
  CHECK(std::abs(compose_pgf(env_of(mixed), 0, 3, 0.0) - oracle::extinction_probability(mixed)) < 1e-10);
}

TEST_CASE("exact survival at n = 1") {
  const EnvRealization env = env_of({OffspringLaw::geometric(0.3)});
  const SurvivalPair pair = exact_survival_prob(env, 1);
  CHECK(pair.direct == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(pair.formula == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("exact survival bounds on random environments") {
  for (Family f : {Family::ParetoGeometric, Family::ParetoPoisson, Family::ParetoFractionalAtom}) {
    const EnvironmentModel m = EnvironmentModel::defaults(f);
    RandomStream rng = make_stream(7, StreamDomain::Test, static_cast<std::uint64_t>(f));
    for (int i = 0; i < 200; ++i) {
      const EnvRealization env = sample_environment(m, 40, rng);
      const SurvivalPair pair = exact_survival_prob(env, 40);
      REQUIRE(pair.g_violations == 0);
      REQUIRE(pair.bound_violations == 0);
      REQUIRE(pair.direct <= std::exp(env.s[40]) * (1 + 1e-12));
      REQUIRE(std::abs(pair.direct - pair.formula) <= 1e-10 * pair.direct);
      const Eigen::VectorXd profile = survival_profile(env, 40);
      REQUIRE(profile[0] == 1.0);
      for (int j = 1; j <= 40; ++j) REQUIRE(profile[j] <= profile[j - 1]);
    }
  }
}

TEST_CASE("g function range") {
  for (const OffspringLaw& law : {OffspringLaw::geometric(0.7), OffspringLaw::poisson(0.3),
                                  OffspringLaw::fractional_atom(0.4, 0.5)}) {
    for (double u : {1e-12, 1e-7, 1e-3, 0.2, 0.9, 1.0}) {
      const double g = g_function(law, u);
      CHECK(g >= 0.0);
      CHECK(g <= 2.0 * eta(law) * (1 + 1e-12));
    }
  }
}

TEST_CASE("second moment closed forms") {
  const double p = 0.35, q = 0.65;
  const EnvRealization one = env_of({OffspringLaw::geometric(p)});
  CHECK(second_moment(one, 1).value == doctest::Approx(2 * p * p / (q * q) + p / q).epsilon(1e-14));
  const EnvRealization flat = env_of(std::vector<OffspringLaw>(5, OffspringLaw::single_offspring()));
  CHECK(second_moment(flat, 5).value == doctest::Approx(1.0));
  const std::vector<OffspringLaw> laws{OffspringLaw::poisson(1.3), OffspringLaw::geometric(0.45),
                                       OffspringLaw::fractional_atom(0.2, 0.3)};
  CHECK(std::abs(second_moment(env_of(laws), 3).value / oracle::second_moment(laws) - 1.0) < 1e-8);
}

TEST_CASE("second moment overflow goes to log space") {
  const EnvRealization env = walk_env(std::vector<double>(10, 80.0));
  const SecondMoment m = second_moment(env, 10);
  CHECK(m.overflow);
  CHECK(std::isfinite(m.log_value));
  CHECK(m.log_value > 1500.0);
}

TEST_CASE("walk functionals of a decreasing walk") {
  Eigen::VectorXd s(5);
  s << 0.0, -1.0, -2.0, -2.5, -4.0;
  const WalkFunctionals w = walk_functionals(s, 0.5);
  CHECK(w.tau == 1);
  CHECK(w.tau_n == 4);
  CHECK(w.M_n == -1.0);
  CHECK(w.L_n == -4.0);
  CHECK_FALSE(w.U_n.has_value());
}

TEST_CASE("walk functionals: first big increment") {
  Eigen::VectorXd s(6);
  s << 0.0, 0.5, 0.0, 3.0, 2.0, 6.0;
  const WalkFunctionals w = walk_functionals(s, 0.5);
  REQUIRE(w.U_n);
  CHECK(*w.U_n == 3);
  CHECK(w.tau_n == 0);
  CHECK_FALSE(w.tau.has_value());
  CHECK(w.M_n == 6.0);
}

TEST_CASE("tau_n agrees with a brute-force argmin") {
  const EnvironmentModel m = EnvironmentModel::defaults();
  RandomStream rng = make_stream(8, StreamDomain::Test, 0);
  constexpr int n = 12;
  for (int i = 0; i < 1'000'000; ++i) {
    std::vector<double> s(n + 1, 0.0);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n + 1);
    for (int k = 1; k <= n; ++k) {
      s[k] = s[k - 1] + std::round(m.sample_increment(rng) * 2.0) / 2.0;
      v[k] = s[k];
    }
    const WalkFunctionals w = walk_functionals(v, m.drift());
    REQUIRE(w.tau_n == oracle::brute_force_argmin(s));
  }
}

TEST_CASE("diagnostic events") {
  const EnvRealization calm = walk_env({-0.5, -0.4, -0.6, -0.5});
  const DiagnosticEvents e = diagnostic_events(calm, 0.5);
  CHECK(e.G_n);
  CHECK(e.H_n);
  const EnvRealization wild = walk_env({-0.5, 9.0, -0.6, -0.5});
  CHECK_FALSE(diagnostic_events(wild, 0.5).G_n);

  const EnvironmentModel m = EnvironmentModel::defaults();
  RandomStream rng = make_stream(9, StreamDomain::Test, 0);
  std::vector<double> freq;
  for (int n : {50, 100, 200}) {
    int both = 0;
    for (int i = 0; i < 20000; ++i) {
      const DiagnosticEvents d = diagnostic_events(sample_environment(m, n, rng), m.drift());
      if (d.G_n && d.H_n) ++both;
    }
    freq.push_back(both / 20000.0);
  }
  CHECK(freq[2] >= freq[0] - 0.01);
  CHECK(freq[2] > 0.9);
}
