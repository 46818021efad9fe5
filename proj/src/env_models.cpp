#include "bpre/env_models.hpp"

#include <algorithm>
#include <cmath>

#include "bpre/quadrature.hpp"

namespace bpre {

namespace {

// log p for p = 1 / (1 + exp(-r)).
double log_logistic(double r) {
  return r >= 0.0 ? -std::log1p(std::exp(-r)) : r - std::log1p(std::exp(r));
}

double logistic(double r) { return 1.0 / (1.0 + std::exp(-r)); }

// Antiderivatives for moments of log(u), u = 1 - gamma uniform.
double log_moment1(double u) { return u * std::log(u) - u; }
double log_moment2(double u) {
  const double l = std::log(u);
  return u * (l * l - 2.0 * l + 2.0);
}

}  // namespace

OffspringLaw OffspringLaw::geometric(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("geometric law needs p in (0, 1)");
  OffspringLaw law;
  law.kind = LawKind::Geometric;
  law.p = p;
  law.q = 1.0 - p;
  law.log_p = std::log(p);
  law.log_mean = std::log(p) - std::log1p(-p);
  return law;
}

OffspringLaw OffspringLaw::geometric_from_log_mean(double log_mean) {
  OffspringLaw law;
  law.kind = LawKind::Geometric;
  law.p = logistic(log_mean);
  law.q = logistic(-log_mean);
  law.log_p = log_logistic(log_mean);
  law.log_mean = log_mean;
  return law;
}

OffspringLaw OffspringLaw::poisson(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("Poisson law needs lambda > 0");
  OffspringLaw law;
  law.kind = LawKind::Poisson;
  law.lambda = lambda;
  law.log_mean = std::log(lambda);
  return law;
}

OffspringLaw OffspringLaw::poisson_from_log_mean(double log_mean) {
  OffspringLaw law;
  law.kind = LawKind::Poisson;
  law.lambda = std::exp(log_mean);
  law.log_mean = log_mean;
  return law;
}

OffspringLaw OffspringLaw::fractional_atom(double gamma, double log_ratio) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConfigError("fractional atom needs gamma in [0, 1)");
  OffspringLaw law;
  law.kind = LawKind::FractionalAtom;
  law.gamma = gamma;
  law.p = logistic(log_ratio);
  law.q = logistic(-log_ratio);
  law.log_p = log_logistic(log_ratio);
  law.log_mean = std::log1p(-gamma) + log_ratio;
  return law;
}

OffspringLaw OffspringLaw::single_offspring() { return OffspringLaw{}; }

double OffspringLaw::mean() const noexcept {
  switch (kind) {
    case LawKind::Geometric: return p / q;
    case LawKind::Poisson: return lambda;
    case LawKind::FractionalAtom: return (1.0 - gamma) * p / q;
    case LawKind::SingleOffspring: break;
  }
  return 1.0;
}

double OffspringLaw::second_factorial_moment() const noexcept {
  const double ratio = p / q;
  switch (kind) {
    case LawKind::Geometric: return 2.0 * ratio * ratio;
    case LawKind::Poisson: return lambda * lambda;
    case LawKind::FractionalAtom: return 2.0 * (1.0 - gamma) * ratio * ratio;
    case LawKind::SingleOffspring: break;
  }
  return 0.0;
}

double OffspringLaw::cdf(double m) const noexcept {
  if (m < 0.0) return 0.0;
  const double k = std::floor(m);
  switch (kind) {
    case LawKind::Geometric:
      return -std::expm1((k + 1.0) * log_p);
    case LawKind::FractionalAtom:
      return 1.0 - (1.0 - gamma) * std::exp((k + 1.0) * log_p);
    case LawKind::Poisson: {
      if (lambda > 1e4) {
        return 0.5 * std::erfc(-(k + 0.5 - lambda) / std::sqrt(2.0 * lambda));
      }
      double term = std::exp(-lambda);
      double total = term;
      for (double i = 1.0; i <= k; i += 1.0) {
        term *= lambda / i;
        total += term;
        if (term < 1e-18 * total && i > lambda) break;
      }
      return std::min(total, 1.0);
    }
    case LawKind::SingleOffspring:
      break;
  }
  return k >= 1.0 ? 1.0 : 0.0;
}

double eta(const OffspringLaw& law) {
  switch (law.kind) {
    case LawKind::Geometric: return 1.0;
    case LawKind::Poisson: return 0.5;
    case LawKind::FractionalAtom: return 1.0 / (1.0 - law.gamma);
    case LawKind::SingleOffspring: break;
  }
  return 0.0;
}

std::string to_string(Family family) {
  switch (family) {
    case Family::ParetoGeometric: return "pareto_geometric";
    case Family::ParetoPoisson: return "pareto_poisson";
    case Family::ParetoFractionalAtom: return "pareto_fractional_atom";
    case Family::Fixed: return "fixed";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "pareto_geometric") return Family::ParetoGeometric;
  if (name == "pareto_poisson") return Family::ParetoPoisson;
  if (name == "pareto_fractional_atom") return Family::ParetoFractionalAtom;
  throw ConfigError("unknown model family '" + name + "'");
}

double GammaLaw::sample(RandomStream& rng) const {
  return degenerate() ? lo : lo + (hi - lo) * uniform_open(rng);
}

EnvironmentModel EnvironmentModel::pareto_geometric(double beta, double x_m,
                                                    double shift_c) {
  EnvironmentModel model;
  model.family_ = Family::ParetoGeometric;
  model.beta_ = beta;
  model.x_m_ = x_m;
  model.shift_c_ = shift_c;
  model.finalize();
  return model;
}

EnvironmentModel EnvironmentModel::pareto_poisson(double beta, double x_m,
                                                  double shift_c) {
  EnvironmentModel model = pareto_geometric(beta, x_m, shift_c);
  model.family_ = Family::ParetoPoisson;
  return model;
}

EnvironmentModel EnvironmentModel::pareto_fractional_atom(double beta, double x_m,
                                                          double shift_c,
                                                          GammaLaw gamma_law) {
  EnvironmentModel model;
  model.family_ = Family::ParetoFractionalAtom;
  model.beta_ = beta;
  model.x_m_ = x_m;
  model.shift_c_ = shift_c;
  model.gamma_law_ = gamma_law;
  model.finalize();
  return model;
}

EnvironmentModel EnvironmentModel::fixed(const OffspringLaw& law) {
  EnvironmentModel model;
  model.family_ = Family::Fixed;
  model.fixed_law_ = law;
  model.gamma_law_ = GammaLaw{law.gamma, law.gamma};
  model.finalize();
  return model;
}

EnvironmentModel EnvironmentModel::defaults(Family family) {
  switch (family) {
    case Family::ParetoPoisson: return pareto_poisson(3.0, 1.0, 2.0);
    case Family::ParetoFractionalAtom:
      return pareto_fractional_atom(3.0, 1.0, 2.0, GammaLaw{0.0, 0.5});
    case Family::ParetoGeometric:
    case Family::Fixed: break;
  }
  return pareto_geometric(3.0, 1.0, 2.0);
}

void EnvironmentModel::finalize() {
  if (family_ == Family::Fixed) {
    drift_ = -fixed_law_.log_mean;
    variance_ = 0.0;
    if (!(drift_ > 0.0)) throw ConfigError("fixed law must be subcritical (mean < 1)");
    return;
  }
  if (!(beta_ > 2.0)) throw ConfigError("beta must exceed 2 (finite variance)");
  if (!(x_m_ > 0.0)) throw ConfigError("x_m must be positive");
  if (!std::isfinite(shift_c_)) throw ConfigError("shift_c must be finite");

  double log_atom_mean = 0.0;
  double log_atom_var = 0.0;
  if (family_ == Family::ParetoFractionalAtom) {
    const GammaLaw& g = gamma_law_;
    if (!(g.lo >= 0.0 && g.lo <= g.hi && g.hi < 1.0))
      throw ConfigError("gamma support must satisfy 0 <= gamma_min <= gamma_max < 1");
    if (g.degenerate()) {
      log_atom_mean = std::log1p(-g.lo);
    } else {
      const double width = g.hi - g.lo;
      const double u_hi = 1.0 - g.lo;
      const double u_lo = 1.0 - g.hi;
      log_atom_mean = (log_moment1(u_hi) - log_moment1(u_lo)) / width;
      const double second = (log_moment2(u_hi) - log_moment2(u_lo)) / width;
      log_atom_var = std::max(0.0, second - log_atom_mean * log_atom_mean);
    }
  } else {
    gamma_law_ = GammaLaw{};
  }
  const double pareto_mean = beta_ * x_m_ / (beta_ - 1.0);
  const double pareto_var =
      x_m_ * x_m_ * beta_ / ((beta_ - 1.0) * (beta_ - 1.0) * (beta_ - 2.0));
  drift_ = -(pareto_mean - shift_c_ + log_atom_mean);
  variance_ = pareto_var + log_atom_var;
  if (!(drift_ > 0.0))
    throw ConfigError("model is not subcritical: E[X] = " + std::to_string(-drift_));
}

double EnvironmentModel::essential_infimum() const noexcept {
  switch (family_) {
    case Family::Fixed: return fixed_law_.log_mean;
    case Family::ParetoFractionalAtom: return std::log1p(-gamma_law_.hi) + x_m_ - shift_c_;
    default: break;
  }
  return x_m_ - shift_c_;
}

double EnvironmentModel::tail_majorant(double x) const noexcept {
  if (family_ == Family::Fixed) return x < fixed_law_.log_mean ? 1.0 : 0.0;
  const double t = x + shift_c_;
  return t <= x_m_ ? 1.0 : std::pow(x_m_ / t, beta_);
}

double EnvironmentModel::tail_majorant_integral(double k) const noexcept {
  if (family_ == Family::Fixed) return 0.0;
  const double a = drift_;
  // Below t0 the majorant is 1.
  const double t0 = (x_m_ - shift_c_) / a;
  double flat = 0.0;
  double start = k;
  if (k < t0) {
    flat = t0 - k;
    start = t0;
  }
  const double base = a * start + shift_c_;
  return flat + std::pow(x_m_, beta_) * std::pow(base, 1.0 - beta_) / (a * (beta_ - 1.0));
}

double EnvironmentModel::tail(double x) const {
  if (family_ != Family::ParetoFractionalAtom) return tail_majorant(x);
  const GammaLaw& g = gamma_law_;
  auto pareto_tail = [&](double t) { return t <= x_m_ ? 1.0 : std::pow(x_m_ / t, beta_); };
  if (g.degenerate()) return pareto_tail(x + shift_c_ - std::log1p(-g.lo));
  auto integrand = [&](double gamma) {
    return pareto_tail(x + shift_c_ - std::log1p(-gamma));
  };
  // The integrand has a kink where the threshold crosses x_m.
  const double kink = 1.0 - std::exp(x + shift_c_ - x_m_);
  double total = 0.0;
  if (kink > g.lo && kink < g.hi) {
    total = integrate(integrand, g.lo, kink) + integrate(integrand, kink, g.hi);
  } else {
    total = integrate(integrand, g.lo, g.hi);
  }
  return std::clamp(total / (g.hi - g.lo), 0.0, 1.0);
}

OffspringLaw EnvironmentModel::law_from(const Draw& d) const {
  const double r = d.t - shift_c_;
  switch (family_) {
    case Family::ParetoPoisson: return OffspringLaw::poisson_from_log_mean(r);
    case Family::ParetoFractionalAtom: return OffspringLaw::fractional_atom(d.gamma, r);
    case Family::Fixed: return fixed_law_;
    case Family::ParetoGeometric: break;
  }
  return OffspringLaw::geometric_from_log_mean(r);
}

double EnvironmentModel::increment_of(const Draw& d) const noexcept {
  if (family_ == Family::Fixed) return fixed_law_.log_mean;
  const double x = d.t - shift_c_;
  return family_ == Family::ParetoFractionalAtom ? std::log1p(-d.gamma) + x : x;
}

EnvironmentModel::Draw EnvironmentModel::draw(RandomStream& rng) const {
  Draw d;
  if (family_ == Family::Fixed) return d;
  if (family_ == Family::ParetoFractionalAtom) d.gamma = gamma_law_.sample(rng);
  d.t = pareto(rng, beta_, x_m_);
  return d;
}

EnvironmentModel::Draw EnvironmentModel::draw_above(double x, RandomStream& rng) const {
  if (family_ == Family::Fixed) {
    if (fixed_law_.log_mean > x) return Draw{};
    throw ConfigError("conditioning on X > x has probability zero");
  }
  if (family_ != Family::ParetoFractionalAtom) {
    return Draw{0.0, pareto(rng, beta_, std::max(x + shift_c_, x_m_))};
  }
  // gamma is reweighted by P(T > t(gamma)); the largest weight sits at
  // gamma_min, so accept with the ratio to it, then draw T from its tail.
  const double t_ref = std::max(x + shift_c_ - std::log1p(-gamma_law_.lo), x_m_);
  for (;;) {
    const double gamma = gamma_law_.sample(rng);
    const double t = std::max(x + shift_c_ - std::log1p(-gamma), x_m_);
    if (uniform_open(rng) <= std::pow(t_ref / t, beta_)) {
      return Draw{gamma, pareto(rng, beta_, t)};
    }
  }
}

EnvironmentModel::Draw EnvironmentModel::draw_at_most(double x, RandomStream& rng) const {
  if (family_ == Family::Fixed) {
    if (fixed_law_.log_mean <= x) return Draw{};
    throw ConfigError("conditioning on X <= x has probability zero");
  }
  if (x < essential_infimum())
    throw ConfigError("conditioning on X <= x has probability zero");
  auto truncated = [&](double t_max) {
    const double mass = -std::expm1(beta_ * std::log(x_m_ / t_max));
    return x_m_ * std::exp(-std::log1p(-uniform_open(rng) * mass) / beta_);
  };
  if (family_ != Family::ParetoFractionalAtom) return Draw{0.0, truncated(x + shift_c_)};
  for (;;) {
    const double gamma = gamma_law_.sample(rng);
    const double t = x + shift_c_ - std::log1p(-gamma);
    if (t <= x_m_) continue;
    if (uniform_open(rng) <= -std::expm1(beta_ * std::log(x_m_ / t))) {
      return Draw{gamma, truncated(t)};
    }
  }
}

OffspringLaw EnvironmentModel::sample_law(RandomStream& rng) const {
  return law_from(draw(rng));
}

OffspringLaw EnvironmentModel::sample_law_above(double x, RandomStream& rng) const {
  return law_from(draw_above(x, rng));
}

OffspringLaw EnvironmentModel::sample_law_at_most(double x, RandomStream& rng) const {
  return law_from(draw_at_most(x, rng));
}

double EnvironmentModel::sample_increment(RandomStream& rng) const {
  return increment_of(draw(rng));
}

double EnvironmentModel::sample_increment_above(double x, RandomStream& rng) const {
  return increment_of(draw_above(x, rng));
}

double EnvironmentModel::sample_increment_at_most(double x, RandomStream& rng) const {
  return increment_of(draw_at_most(x, rng));
}


GammaLaw EnvironmentModel::gamma_limit_law() const noexcept {
  if (family_ == Family::ParetoFractionalAtom || family_ == Family::Fixed) return gamma_law_;
  return GammaLaw{};
}

}  // namespace bpre
