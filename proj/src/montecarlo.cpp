#include "bpre/montecarlo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "bpre/parallel.hpp"
#include "bpre/process.hpp"

namespace bpre {

namespace {

constexpr std::int64_t kNaiveShard = 1 << 14;
constexpr std::int64_t kBigJumpShard = 1 << 10;
constexpr std::int64_t kHarvestShard = 1 << 10;
constexpr std::int64_t kHarvestBatch = 8;
constexpr double kPopulationCap = 1e300;

double parse_number(const std::string& text, const std::string& whole) {
  if (text.empty()) return 1.0;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("cannot parse sequence '" + whole + "'");
  return value;
}

std::string strip_suffix_op(const std::string& text, char op) {
  if (!text.empty() && text.back() == op) return text.substr(0, text.size() - 1);
  return text;
}

// One generation; once a population passes the cap it follows its
// conditional mean, which is what the quenched law of large numbers gives.
double advance(const OffspringLaw& law, double z, RandomStream& rng, bool& capped) {
  if (z <= 0.0) return 0.0;
  if (capped) return std::min(kPopulationCap, z * std::exp(law.log_mean));
  z = next_generation(law, z, rng);
  if (!(z <= kPopulationCap)) {
    z = kPopulationCap;
    capped = true;
  }
  return z;
}

// A(na) and the derived branch weights.
struct JumpWeights {
  double jump_prob = 0.0;
  double threshold = 0.0;  // forced increments exceed this
  double jump_level = 0.0; // U_n is the first increment above this
  int positions = 0;
  bool prefix_possible = true;
  Eigen::VectorXd w;  // w[j-1] = A (1 - A)^{j-1}
  double remainder = 0.0;

  JumpWeights(const EnvironmentModel& model, int n, const BigJumpConfig& cfg, double level) {
    jump_level = n * model.drift();
    threshold = level * jump_level;
    jump_prob = model.tail(threshold);
    positions = cfg.jump_positions(n);
    // Below the support every increment is a jump: only j = 1 remains.
    prefix_possible = jump_prob < 1.0;
    if (!prefix_possible) positions = 1;
    w.resize(positions);
    const double log_stay = std::log1p(-jump_prob);
    for (int j = 1; j <= positions; ++j)
      w[j - 1] = prefix_possible ? jump_prob * std::exp((j - 1) * log_stay) : 1.0;
    remainder = prefix_possible ? std::exp(positions * log_stay) : 0.0;
  }
};

template <class Shard, class Fn>
Shard run_merged(std::int64_t samples, std::int64_t shard_size, const RunSettings& run,
                 const Shard& init, Fn&& fn) {
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

SequenceSpec SequenceSpec::parse(const std::string& raw) {
  std::string text;
  for (char c : raw)
    if (c != ' ') text += c;
  if (text.empty()) throw ConfigError("empty sequence descriptor");
  const auto inv = text.find("/log");
  if (inv != std::string::npos && inv + 4 == text.size())
    return inv_log(parse_number(text.substr(0, inv), raw));
  if (text.size() >= 3 && text.compare(text.size() - 3, 3, "log") == 0)
    return log(parse_number(strip_suffix_op(text.substr(0, text.size() - 3), '*'), raw));
  const auto pw = text.find("n^");
  if (pw != std::string::npos) {
    SequenceSpec spec{Kind::Power, parse_number(strip_suffix_op(text.substr(0, pw), '*'), raw),
                      parse_number(text.substr(pw + 2), raw)};
    return spec;
  }
  if (text.back() == 'n')
    return linear(parse_number(strip_suffix_op(text.substr(0, text.size() - 1), '*'), raw));
  return constant(parse_number(text, raw));
}

double SequenceSpec::operator()(int n) const {
  const double x = static_cast<double>(n);
  switch (kind) {
    case Kind::Log: return scale * std::log(x);
    case Kind::InvLog: return scale / std::log(x);
    case Kind::Linear: return scale * x;
    case Kind::Power: return scale * std::pow(x, power);
    case Kind::Constant: break;
  }
  return scale;
}

std::string SequenceSpec::describe() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case Kind::Log: out << scale << "*log"; break;
    case Kind::InvLog: out << scale << "/log"; break;
    case Kind::Linear: out << scale << "*n"; break;
    case Kind::Power: out << scale << "*n^" << power; break;
    case Kind::Constant: out << scale; break;
  }
  return out.str();
}

void BigJumpConfig::validate(const std::vector<int>& grid) const {
  if (j_max < 0) throw ConfigError("j_max must be >= 0");
  if (grid.empty()) return;
  const int top = *std::max_element(grid.begin(), grid.end());
  std::vector<int> points = grid;
  points.push_back(10 * top);
  points.push_back(100 * top);
  std::sort(points.begin(), points.end());
  double prev_h = -INFINITY, prev_ratio = INFINITY, prev_delta = INFINITY, prev_margin = -INFINITY;
  for (int n : points) {
    if (n < 3) throw ConfigError("experiment grid needs n >= 3");
    const double h = h_n(n);
    const double d = delta_n(n);
    const double margin = n * (d - 2.0 / std::log(static_cast<double>(n)));
    if (!(h > 0.0 && h <= n)) throw ConfigError("h_n must lie in (0, n] at n = " + std::to_string(n));
    if (!(h >= prev_h)) throw ConfigError("h_n must grow with n");
    if (!(h / n <= prev_ratio)) throw ConfigError("h_n / n must decrease to 0");
    if (!(d > 0.0 && d <= prev_delta)) throw ConfigError("delta_n must be positive and decrease to 0");
    if (!(margin > 0.0 && margin >= prev_margin))
      throw ConfigError("n (delta_n - 2 / log n) must be positive and grow with n");
    prev_h = h;
    prev_ratio = h / n;
    prev_delta = d;
    prev_margin = margin;
  }
  if (!(h_n(100 * top) > h_n(top))) throw ConfigError("h_n must tend to infinity");
  if (!(h_n(100 * top) / (100.0 * top) < h_n(top) / top)) throw ConfigError("h_n / n must tend to 0");
}

Estimate estimate_survival_naive(const EnvironmentModel& model, int n, std::int64_t samples,
                                 const RunSettings& run) {
  if (n < 0) throw ConfigError("n must be >= 0");
  if (n == 0) {
    Estimate e;
    e.point = e.ci_lo = e.ci_hi = 1.0;
    e.n_samples = samples;
    e.method = Method::Exact;
    return e;
  }
  struct Count {
    std::int64_t alive = 0;
    void merge(const Count& o) { alive += o.alive; }
  };
  const Count total = run_merged(
      samples, kNaiveShard, run, Count{},
      [&](std::int64_t shard, std::int64_t count, Count& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::SurvivalNaive, static_cast<std::uint64_t>(shard));
        for (std::int64_t i = 0; i < count; ++i) {
          double z = 1.0;
          bool capped = false;
          for (int k = 0; k < n && z > 0.0; ++k) z = advance(model.sample_law(rng), z, rng, capped);
          if (z > 0.0) ++part.alive;
        }
      });
  return Estimate::proportion(total.alive, samples);
}

namespace {

struct BigJumpShard {
  Accumulator total;
  Accumulator remainder;
  Accumulator bound;
  Eigen::VectorXd per_j;  // index U_n, 0 for none or beyond j_max
  Eigen::VectorXd per_j_sq;

  void merge(const BigJumpShard& o) {
    total.merge(o.total);
    remainder.merge(o.remainder);
    bound.merge(o.bound);
    per_j += o.per_j;
    per_j_sq += o.per_j_sq;
  }
};

// Applies the prefix maps pi_0..pi_{j-1} (outermost first) to u.
double apply_prefix(const std::vector<OffspringLaw>& prefix, int j, double u) {
  for (int k = j - 1; k >= 0; --k) u = pgf_complement(prefix[static_cast<std::size_t>(k)], u);
  return u;
}

// next[j] = first k > j with x[k] > level among k = 2..n, 0 if none.
void first_exceedances(const Eigen::VectorXd& x, int n, double level, Eigen::VectorXi& next) {
  next[n] = 0;
  for (int j = n - 1; j >= 0; --j) next[j] = (j + 1 >= 2 && x[j + 1] > level) ? j + 1 : next[j + 1];
}

int bucket_of(int u, int j_max) { return u >= 1 && u <= j_max ? u : 0; }

}  // namespace

BigJumpEstimate estimate_survival_bigjump(const EnvironmentModel& model, int n,
                                          std::int64_t samples, const BigJumpConfig& cfg,
                                          const RunSettings& run) {
  if (n < 1) throw ConfigError("big-jump estimator needs n >= 1");
  const JumpWeights jw(model, n, cfg, cfg.split_level);
  const int jm = jw.positions;
  BigJumpShard init{{}, {}, {}, Eigen::VectorXd::Zero(jm + 1), Eigen::VectorXd::Zero(jm + 1)};
  const BigJumpShard sums = run_merged(
      samples, kBigJumpShard, run, init,
      [&](std::int64_t shard, std::int64_t count, BigJumpShard& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::SurvivalBigJump, static_cast<std::uint64_t>(shard));
        std::vector<OffspringLaw> prefix(static_cast<std::size_t>(jm));
        std::vector<OffspringLaw> free_laws(static_cast<std::size_t>(n) + 1);
        Eigen::VectorXd v(n + 1);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n + 1);
        Eigen::VectorXi next(n + 1);
        Eigen::VectorXd contrib(jm + 1);
        for (std::int64_t i = 0; i < count; ++i) {
          bool lf = true;
          if (jw.prefix_possible) {
            for (int k = 0; k < jm; ++k) {
              prefix[static_cast<std::size_t>(k)] = model.sample_law_at_most(jw.threshold, rng);
              lf = lf && prefix[static_cast<std::size_t>(k)].linear_fractional();
            }
          }
          for (int k = 2; k <= n; ++k) {
            free_laws[static_cast<std::size_t>(k)] = model.sample_law(rng);
            x[k] = free_laws[static_cast<std::size_t>(k)].log_mean;
          }
          first_exceedances(x, n, jw.jump_level, next);
          // v[j] = 1 - f_{j,n}(0) over the free laws pi_j..pi_{n-1}.
          v[n] = 1.0;
          for (int j = n; j >= 2; --j) v[j - 1] = pgf_complement(free_laws[static_cast<std::size_t>(j)], v[j]);
          contrib.setZero();
          MobiusMap<double> pre;
          for (int j = 1; j <= jm; ++j) {
            const OffspringLaw jump = model.sample_law_above(jw.threshold, rng);
            const double after = pgf_complement(jump, v[j]);
            const double surv = lf ? pre(after) : apply_prefix(prefix, j - 1, after);
            const int u = jump.log_mean > jw.jump_level ? j : next[j];
            contrib[bucket_of(u, jm)] += jw.w[j - 1] * surv;
            if (lf && jw.prefix_possible)
              pre = pre.then_inner(MobiusMap<double>::from_law(prefix[static_cast<std::size_t>(j - 1)]));
          }
          double rem = 0.0;
          double bound = 0.0;
          if (jw.prefix_possible) {
            rem = jw.remainder * (lf ? pre(v[jm]) : apply_prefix(prefix, jm, v[jm]));
            contrib[bucket_of(next[jm], jm)] += rem;
            double s = 0.0, low = 0.0;
            for (int k = 0; k < jm; ++k) low = std::min(low, s += prefix[static_cast<std::size_t>(k)].log_mean);
            for (int k = jm + 1; k <= n; ++k) low = std::min(low, s += x[k]);
            bound = jw.remainder * std::exp(low);
          }
          part.per_j += contrib;
          part.per_j_sq += contrib.cwiseProduct(contrib);
          part.total.add(contrib.sum());
          part.remainder.add(rem);
          part.bound.add(bound);
        }
      });
  BigJumpEstimate out;
  out.total = Estimate::from(sums.total, Method::BigJumpIS);
  out.remainder = Estimate::from(sums.remainder, Method::BigJumpIS);
  out.remainder_bound = sums.bound.mean();
  const double count = static_cast<double>(samples);
  const Eigen::VectorXd mean = sums.per_j / count;
  const Eigen::VectorXd var =
      ((sums.per_j_sq / count - mean.cwiseProduct(mean)) * (count / std::max(count - 1.0, 1.0)))
          .cwiseMax(0.0);
  out.per_j = mean.tail(jm);
  out.per_j_stderr = (var / count).cwiseSqrt().tail(jm);
  out.jump_prob = jw.jump_prob;
  out.j_max = jm;
  return out;
}

namespace {

struct WalkShard {
  Accumulator tau;
  Accumulator neg;
  Eigen::VectorXd a_sum, a_sq, ab;
  double b_sum = 0.0, b_sq = 0.0;
  std::int64_t hits = 0;

  void merge(const WalkShard& o) {
    tau.merge(o.tau);
    neg.merge(o.neg);
    a_sum += o.a_sum;
    a_sq += o.a_sq;
    ab += o.ab;
    b_sum += o.b_sum;
    b_sq += o.b_sq;
    hits += o.hits;
  }
};

}  // namespace

WalkBigJumpEstimate estimate_walk_bigjump(const EnvironmentModel& model, int n,
                                          std::int64_t samples, const BigJumpConfig& cfg,
                                          const RunSettings& run) {
  if (n < 1) throw ConfigError("big-jump estimator needs n >= 1");
  const JumpWeights jw(model, n, cfg, cfg.split_level);
  const int jm = jw.positions;
  WalkShard init;
  init.a_sum = init.a_sq = init.ab = Eigen::VectorXd::Zero(jm + 1);
  const WalkShard sums = run_merged(
      samples, kBigJumpShard, run, init,
      [&](std::int64_t shard, std::int64_t count, WalkShard& part) {
        RandomStream rng = make_stream(run.seed, StreamDomain::WalkBigJump, static_cast<std::uint64_t>(shard));
        Eigen::VectorXd sy(jm + 1);       // prefix walk
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n + 1);
        Eigen::VectorXd p(n + 1);         // free partial sums, p[1] = 0
        Eigen::VectorXd suffix_min(n + 2);
        Eigen::VectorXi next(n + 1);
        Eigen::VectorXd a(jm + 1);
        for (std::int64_t i = 0; i < count; ++i) {
          sy[0] = 0.0;
          int alive_until = 0;  // S_1..S_k >= 0 for k <= alive_until
          bool alive = true;
          for (int k = 1; k <= jm; ++k) {
            sy[k] = sy[k - 1] + (jw.prefix_possible ? model.sample_increment_at_most(jw.threshold, rng) : 0.0);
            if (alive && sy[k] >= 0.0) alive_until = k; else alive = false;
          }
          p[0] = 0.0;
          p[1] = 0.0;
          for (int k = 2; k <= n; ++k) {
            x[k] = model.sample_increment(rng);
            p[k] = p[k - 1] + x[k];
          }
          first_exceedances(x, n, jw.jump_level, next);
          suffix_min[n + 1] = INFINITY;
          for (int k = n; k >= 1; --k) suffix_min[k] = std::min(p[k], suffix_min[k + 1]);
          a.setZero();
          double neg = 0.0;
          for (int j = 1; j <= jm; ++j) {
            const double jump = model.sample_increment_above(jw.threshold, rng);
            const double s_j = sy[j - 1] + jump;
            const double s_n = s_j + p[n] - p[j];
            if (s_n < 0.0) neg += jw.w[j - 1] * std::exp(s_n);
            const bool prefix_ok = alive_until >= j - 1;
            if (prefix_ok && s_j >= 0.0 && (j == n || s_j - p[j] + suffix_min[j + 1] >= 0.0))
              a[bucket_of(jump > jw.jump_level ? j : next[j], jm)] += jw.w[j - 1];
          }
          if (jw.prefix_possible) {
            const double s_n = sy[jm] + p[n] - p[jm];
            if (s_n < 0.0) neg += jw.remainder * std::exp(s_n);
            if (alive_until >= jm && (jm == n || sy[jm] - p[jm] + suffix_min[jm + 1] >= 0.0))
              a[bucket_of(next[jm], jm)] += jw.remainder;
          }
          const double b = a.sum();
          part.tau.add(b);
          part.neg.add(neg);
          if (b > 0.0) {
            ++part.hits;
            part.a_sum += a;
            part.a_sq += a.cwiseProduct(a);
            part.ab += b * a;
            part.b_sum += b;
            part.b_sq += b * b;
          }
        }
      });
  WalkBigJumpEstimate out;
  out.tau_tail = Estimate::from(sums.tau, Method::BigJumpIS);
  out.negative_part = Estimate::from(sums.neg, Method::BigJumpIS);
  const double count = static_cast<double>(samples);
  out.tau_per_j = sums.a_sum.tail(jm) / count;
  out.hits = sums.hits;
  out.jump_prob = jw.jump_prob;
  out.j_max = jm;
  if (sums.b_sum > 0.0) {
    const Eigen::VectorXd pj = sums.a_sum / sums.b_sum;
    const double b_mean = sums.b_sum / count;
    const Eigen::VectorXd resid =
        (sums.a_sq - 2.0 * pj.cwiseProduct(sums.ab) + pj.cwiseProduct(pj) * sums.b_sq).cwiseMax(0.0);
    out.conditional = pj.tail(jm);
    out.conditional_stderr = (resid / (count * count * b_mean * b_mean)).cwiseSqrt().tail(jm);
  } else {
    out.conditional = out.conditional_stderr = Eigen::VectorXd::Zero(jm);
  }
  return out;
}

namespace {

struct HarvestShard {
  std::vector<SurvivorRecord> records;
  Accumulator mass;
  std::int64_t survivors = 0;

  void merge(HarvestShard&& o) {
    records.insert(records.end(), std::make_move_iterator(o.records.begin()),
                   std::make_move_iterator(o.records.end()));
    mass.merge(o.mass);
    survivors += o.survivors;
  }
};

struct HarvestContext {
  const EnvironmentModel& model;
  int n;
  HarvestMode mode;
  bool keep_paths;
  JumpWeights jw;
  double h;
  double log_family_threshold;
};

// Runs the path from generation `from` (population z, walk s) to n under free
// laws; fills the record's path tail when kept.
void run_free_tail(const HarvestContext& ctx, int from, double z, double s, bool& capped,
                   RandomStream& rng, SurvivorRecord& rec, bool track_jump) {
  for (int k = from + 1; k <= ctx.n; ++k) {
    const OffspringLaw law = ctx.model.sample_law(rng);
    s += law.log_mean;
    if (track_jump && rec.U == 0 && law.log_mean > ctx.jw.jump_level) {
      rec.U = k;
      rec.z_before = z;
      if (z > 0.0 && !capped) {
        const DetailedGeneration gen = next_generation_detailed(law, z, rng);
        rec.N_Un = gen.max_individual;
        z = gen.total;
        if (!(z <= kPopulationCap)) {
          z = kPopulationCap;
          capped = true;
        }
      } else {
        z = advance(law, z, rng, capped);
      }
    } else {
      z = advance(law, z, rng, capped);
    }
    if (ctx.keep_paths) {
      rec.z[k] = z;
      rec.s[k] = s;
    }
    if (z <= 0.0) break;
  }
  rec.survived = z > 0.0;
  rec.capped = capped;
}

bool is_exploded(const HarvestContext& ctx, const SurvivorRecord& rec) {
  return rec.U >= 1 && rec.U < ctx.h && rec.N_Un > 0.0 &&
         std::log(rec.N_Un) >= ctx.log_family_threshold;
}

void harvest_sample(const HarvestContext& ctx, std::int64_t sample, RandomStream& rng,
                    HarvestShard& part) {
  const int n = ctx.n;
  double value = 0.0;
  auto fresh = [&] {
    SurvivorRecord rec;
    rec.sample = sample;
    if (ctx.keep_paths) {
      rec.z = Eigen::VectorXd::Zero(n + 1);
      rec.s = Eigen::VectorXd::Zero(n + 1);
    }
    return rec;
  };
  auto keep = [&](SurvivorRecord&& rec) {
    rec.exploded = is_exploded(ctx, rec);
    if (rec.survived) {
      value += rec.weight;
      ++part.survivors;
    }
    if (rec.survived || rec.exploded) part.records.push_back(std::move(rec));
  };

  if (ctx.mode == HarvestMode::Naive) {
    SurvivorRecord rec = fresh();
    rec.weight = 1.0;
    bool capped = false;
    if (ctx.keep_paths) rec.z[0] = 1.0;
    run_free_tail(ctx, 0, 1.0, 0.0, capped, rng, rec, true);
    keep(std::move(rec));
    part.mass.add(value);
    return;
  }

  const JumpWeights& jw = ctx.jw;
  int branches = jw.positions;
  if (ctx.mode == HarvestMode::Explosion)
    branches = std::min(branches, static_cast<int>(std::ceil(ctx.h)) - 1);
  const int prefix_len = ctx.mode == HarvestMode::BigJump ? jw.positions : std::max(branches - 1, 0);
  std::vector<double> zp(static_cast<std::size_t>(prefix_len) + 1, 0.0);
  std::vector<double> sp(static_cast<std::size_t>(prefix_len) + 1, 0.0);
  zp[0] = 1.0;
  bool prefix_capped = false;
  for (int j = 1; j <= branches; ++j) {
    const double z_prev = zp[static_cast<std::size_t>(j - 1)];
    if (z_prev <= 0.0) break;
    const OffspringLaw jump = ctx.model.sample_law_above(jw.threshold, rng);
    const DetailedGeneration gen = next_generation_detailed(jump, z_prev, rng);
    const bool filtered = ctx.mode == HarvestMode::Explosion &&
                          !(gen.max_individual > 0.0 &&
                            std::log(gen.max_individual) >= ctx.log_family_threshold);
    if (!filtered) {
      SurvivorRecord rec = fresh();
      rec.weight = jw.w[j - 1];
      const bool is_jump = jump.log_mean > jw.jump_level;
      if (is_jump) {
        rec.U = j;
        rec.N_Un = gen.max_individual;
        rec.z_before = z_prev;
      }
      bool capped = prefix_capped;
      double z = gen.total;
      if (!(z <= kPopulationCap)) {
        z = kPopulationCap;
        capped = true;
      }
      const double s = sp[static_cast<std::size_t>(j - 1)] + jump.log_mean;
      if (ctx.keep_paths) {
        for (int k = 0; k < j; ++k) {
          rec.z[k] = zp[static_cast<std::size_t>(k)];
          rec.s[k] = sp[static_cast<std::size_t>(k)];
        }
        rec.z[j] = z;
        rec.s[j] = s;
      }
      run_free_tail(ctx, j, z, s, capped, rng, rec, !is_jump);
      keep(std::move(rec));
    }
    if (j <= prefix_len && jw.prefix_possible) {
      const OffspringLaw law = ctx.model.sample_law_at_most(jw.threshold, rng);
      zp[static_cast<std::size_t>(j)] = advance(law, z_prev, rng, prefix_capped);
      sp[static_cast<std::size_t>(j)] = sp[static_cast<std::size_t>(j - 1)] + law.log_mean;
    }
  }
  if (ctx.mode == HarvestMode::BigJump && jw.prefix_possible &&
      zp[static_cast<std::size_t>(prefix_len)] > 0.0) {
    SurvivorRecord rec = fresh();
    rec.weight = jw.remainder;
    if (ctx.keep_paths) {
      for (int k = 0; k <= prefix_len; ++k) {
        rec.z[k] = zp[static_cast<std::size_t>(k)];
        rec.s[k] = sp[static_cast<std::size_t>(k)];
      }
    }
    bool capped = prefix_capped;
    run_free_tail(ctx, prefix_len, zp[static_cast<std::size_t>(prefix_len)],
                  sp[static_cast<std::size_t>(prefix_len)], capped, rng, rec, true);
    keep(std::move(rec));
  }
  part.mass.add(value);
}

}  // namespace

Harvest harvest_survivors(const EnvironmentModel& model, int n, std::int64_t target_survivors,
                          const BigJumpConfig& cfg, const RunSettings& run, HarvestMode mode,
                          bool keep_paths, std::int64_t max_samples) {
  if (n < 1) throw ConfigError("harvest needs n >= 1");
  const HarvestContext ctx{model,
                           n,
                           mode,
                           keep_paths,
                           JumpWeights(model, n, cfg, mode == HarvestMode::BigJump ? cfg.split_level : 1.0),
                           cfg.h_n(n),
                           n * (model.drift() + cfg.delta_n(n))};
  Harvest out;
  out.jump_prob = ctx.jw.jump_prob;
  HarvestShard total;
  std::int64_t next_shard = 0;
  while (total.survivors < target_survivors && next_shard * kHarvestShard < max_samples) {
    const std::int64_t first = next_shard;
    const std::int64_t batch =
        std::min(kHarvestBatch, shard_count(max_samples - first * kHarvestShard, kHarvestShard));
    std::vector<HarvestShard> parts =
        run_shards<HarvestShard>(batch, run.workers, [&](std::int64_t b) {
          const std::int64_t shard = first + b;
          const std::int64_t count = shard_length(shard, max_samples, kHarvestShard);
          RandomStream rng = make_stream(run.seed, StreamDomain::PopulationBigJump,
                                         (static_cast<std::uint64_t>(mode) << 32) | static_cast<std::uint64_t>(shard));
          HarvestShard part;
          for (std::int64_t i = 0; i < count; ++i)
            harvest_sample(ctx, shard * kHarvestShard + i, rng, part);
          return part;
        });
    for (HarvestShard& part : parts) total.merge(std::move(part));
    next_shard += batch;
  }
  out.records = std::move(total.records);
  out.survivors = total.survivors;
  out.samples = total.mass.count();
  out.mass = Estimate::from(total.mass, mode == HarvestMode::Naive ? Method::Naive : Method::BigJumpIS);
  out.insufficient = out.survivors < target_survivors;
  return out;
}

ConditionalLaw conditional_un_distribution(const EnvironmentModel& model, int n,
                                           std::int64_t min_survivors, const BigJumpConfig& cfg,
                                           const RunSettings& run, HarvestMode mode) {
  const Harvest h = harvest_survivors(model, n, min_survivors, cfg, run, mode, false);
  ConditionalLaw law =
      record_law(h, cfg.jump_positions(n), [](const SurvivorRecord& r) { return r.survived; });
  law.insufficient = law.insufficient || h.insufficient;
  return law;
}

ConditionalLaw conditional_un_distribution_tau(const EnvironmentModel& model, int n,
                                               std::int64_t samples, const BigJumpConfig& cfg,
                                               const RunSettings& run) {
  const WalkBigJumpEstimate w = estimate_walk_bigjump(model, n, samples, cfg, run);
  ConditionalLaw law;
  law.mass = w.conditional;
  law.std_error = w.conditional_stderr;
  law.beyond = std::max(0.0, 1.0 - w.conditional.sum());
  law.survivors = w.hits;
  law.effective_survivors = static_cast<double>(w.hits);
  law.insufficient = w.hits == 0;
  return law;
}

double tv_distance(const Eigen::VectorXd& p, double p_beyond, const Eigen::VectorXd& q,
                   double q_beyond) {
  const Eigen::Index common = std::min(p.size(), q.size());
  double total = std::abs(p_beyond - q_beyond);
  total += (p.head(common) - q.head(common)).cwiseAbs().sum();
  total += p.tail(p.size() - common).cwiseAbs().sum() + q.tail(q.size() - common).cwiseAbs().sum();
  return 0.5 * total;
}

namespace {

// Weighted ratio sum_i a_i / sum_i b_i over base samples with its
// delta-method standard error.
template <class Num, class Den>
std::pair<double, double> record_ratio(const Harvest& h, Num&& num, Den&& den) {
  std::map<std::int64_t, std::pair<double, double>> per_sample;
  for (const SurvivorRecord& r : h.records) {
    if (!den(r)) continue;
    auto& ab = per_sample[r.sample];
    ab.second += r.weight;
    if (num(r)) ab.first += r.weight;
  }
  double a_sum = 0.0, b_sum = 0.0, a_sq = 0.0, b_sq = 0.0, ab_sum = 0.0;
  for (const auto& [sample, ab] : per_sample) {
    a_sum += ab.first;
    b_sum += ab.second;
    a_sq += ab.first * ab.first;
    b_sq += ab.second * ab.second;
    ab_sum += ab.first * ab.second;
  }
  if (b_sum <= 0.0) return {0.0, 0.0};
  const double ratio = a_sum / b_sum;
  const double n = static_cast<double>(h.samples);
  const double b_mean = b_sum / n;
  const double resid = std::max(0.0, a_sq - 2.0 * ratio * ab_sum + ratio * ratio * b_sq);
  return {ratio, std::sqrt(resid) / (n * b_mean)};
}

}  // namespace

ExplosionStats explosion_statistics(const Harvest& harvest, const EnvironmentModel& model,
                                    int n, const BigJumpConfig& cfg) {
  ExplosionStats st;
  st.h = cfg.h_n(n);
  st.log_family_threshold = n * (model.drift() + cfg.delta_n(n));
  auto survived = [](const SurvivorRecord& r) { return r.survived; };
  const double h = st.h;
  const double thr = st.log_family_threshold;
  auto early = [h](const SurvivorRecord& r) { return r.U >= 1 && r.U < h; };
  auto big = [thr](const SurvivorRecord& r) { return r.N_Un > 0.0 && std::log(r.N_Un) >= thr; };
  st.freq_early_jump = record_ratio(harvest, early, survived).first;
  st.freq_big_family = record_ratio(harvest, big, survived).first;
  const auto both = record_ratio(harvest, [&](const SurvivorRecord& r) { return early(r) && big(r); },
                                 survived);
  st.freq_both = both.first;
  st.freq_both_stderr = both.second;
  for (const SurvivorRecord& r : harvest.records) st.survivors += r.survived ? 1 : 0;

  // Joint law of (min(U, 11) with 0 for none, survival) under both conditionings.
  Eigen::VectorXd given_survival = Eigen::VectorXd::Zero(24);
  Eigen::VectorXd given_event = Eigen::VectorXd::Zero(24);
  for (const SurvivorRecord& r : harvest.records) {
    const int bucket = std::min(r.U, 11) * 2 + (r.survived ? 1 : 0);
    if (r.survived) given_survival[bucket] += r.weight;
    if (r.exploded) given_event[bucket] += r.weight;
  }
  if (given_survival.sum() > 0.0 && given_event.sum() > 0.0) {
    given_survival /= given_survival.sum();
    given_event /= given_event.sum();
    st.tv_diagnostic = tv_distance(given_survival, 0.0, given_event, 0.0);
  } else {
    st.tv_diagnostic = 1.0;
  }
  return st;
}

ExplosionStats explosion_statistics(const EnvironmentModel& model, int n,
                                    std::int64_t survivors, const BigJumpConfig& cfg,
                                    const RunSettings& run) {
  const Harvest h = harvest_survivors(model, n, survivors, cfg, run, HarvestMode::BigJump, false);
  return explosion_statistics(h, model, n, cfg);
}

Eigen::VectorXd default_flt_grid() { return Eigen::VectorXd::LinSpaced(21, 0.0, 1.0); }

FltReport flt_statistics(const Harvest& harvest, const EnvironmentModel& model, int n,
                         const Eigen::VectorXd& grid, double epsilon) {
  FltReport rep;
  rep.grid = grid;
  rep.epsilon = epsilon;
  const double a = model.drift();
  const double scale = std::sqrt(model.variance() * n);
  const Eigen::Index g = grid.size();
  std::vector<const SurvivorRecord*> used;
  for (const SurvivorRecord& r : harvest.records) {
    if (!r.survived || r.U < 1 || r.z.size() != n + 1) continue;
    if (r.capped) {
      ++rep.excluded_capped;
      continue;
    }
    used.push_back(&r);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(used.size());
  rep.survivors = m;
  rep.R.resize(m, g);
  rep.W.resize(m, g);
  rep.weights.resize(m);
  rep.U.resize(m);
  rep.N_Un.resize(m);
  auto index_of = [n](double t) {
    return static_cast<int>(std::floor(n * t + 1e-9));
  };
  std::vector<std::pair<double, double>> increments;
  for (Eigen::Index i = 0; i < m; ++i) {
    const SurvivorRecord& r = *used[static_cast<std::size_t>(i)];
    rep.weights[i] = r.weight;
    rep.U[i] = r.U;
    rep.N_Un[i] = r.N_Un;
    const double zu = r.z[r.U];
    const double su = r.s[r.U];
    for (Eigen::Index c = 0; c < g; ++c) {
      const int k = std::max(index_of(grid[c]), r.U);
      rep.R(i, c) = r.z[k] / (zu * std::exp(r.s[k] - su));
      rep.W(i, c) = (std::log(r.z[k] / zu) + n * grid[c] * a) / scale;
    }
    const int k1 = n;
    const int ke = index_of(epsilon);
    increments.push_back(
        {(std::log(r.z[k1] / r.z[ke]) + n * (1.0 - epsilon) * a) / scale, r.weight});
  }
  if (m == 0) return rep;
  const double wsum = rep.weights.sum();
  const Eigen::VectorXd wn = rep.weights / wsum;
  rep.mean_R = rep.R.transpose() * wn;
  rep.max_mean_R_dev = g > 0 ? (rep.mean_R.array() - 1.0).abs().maxCoeff() : 0.0;
  const Eigen::RowVectorXd mean_W = wn.transpose() * rep.W;
  const Eigen::MatrixXd centred = rep.W.rowwise() - mean_W;
  rep.cov_W = centred.transpose() * wn.asDiagonal() * centred;
  rep.ks_W = Eigen::VectorXd::Zero(g);
  rep.ks_W_p = Eigen::VectorXd::Ones(g);
  for (Eigen::Index c = 0; c < g; ++c) {
    const double t = grid[c];
    if (t <= 0.0) continue;
    std::vector<std::pair<double, double>> col;
    col.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) col.push_back({rep.W(i, c), rep.weights[i]});
    const double sd = std::sqrt(t);
    const KsResult ks = ks_test_weighted(std::move(col), [sd](double x) { return normal_cdf(x / sd); });
    rep.ks_W[c] = ks.stat;
    rep.ks_W_p[c] = ks.p_value;
  }
  const double sd_inc = std::sqrt(1.0 - epsilon);
  const KsResult inc =
      ks_test_weighted(std::move(increments), [sd_inc](double x) { return normal_cdf(x / sd_inc); });
  rep.ks_increment = inc.stat;
  rep.ks_increment_p = inc.p_value;
  if (g == 0) return rep;
  // Columns nearest t = 0.5 and t = 1.
  Eigen::Index half = 0, one = 0;
  (grid.array() - 0.5).abs().minCoeff(&half);
  (grid.array() - 1.0).abs().minCoeff(&one);
  rep.corr_half_one = rep.cov_W(half, one) / std::sqrt(rep.cov_W(half, half) * rep.cov_W(one, one));
  return rep;
}

FltReport flt_suite(const EnvironmentModel& model, int n, std::int64_t survivors,
                    const Eigen::VectorXd& grid, const BigJumpConfig& cfg, const RunSettings& run,
                    HarvestMode mode, double epsilon) {
  const Harvest h = harvest_survivors(model, n, survivors, cfg, run, mode, true);
  return flt_statistics(h, model, n, grid, epsilon);
}

}  // namespace bpre
