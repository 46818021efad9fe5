#include "bpre/commands.hpp"

#include <sstream>

#include "bpre/parallel.hpp"
#include "bpre/process.hpp"
#include "bpre/report.hpp"

namespace bpre {

namespace {

constexpr std::int64_t kPathShard = 256;
constexpr int kLawTableSize = 10;

bool csv_out(const ExperimentConfig& cfg) { return cfg.output.format == "csv"; }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string fmt(double x) { return format_double(x); }

HarvestMode harvest_or(const ExperimentConfig& cfg, HarvestMode fallback) {
  return cfg.run.harvest.empty() ? fallback : harvest_mode_from_string(cfg.run.harvest);
}

// Rows of one n, simulated in fixed shards with one stream per path.
struct SimulatedRows {
  std::vector<std::vector<std::string>> summary;
  CsvWriter paths = path_csv();
  std::int64_t survivors = 0;
};

SimulatedRows simulate_rows(const EnvironmentModel& model, int n, const ExperimentConfig& cfg) {
  const std::int64_t samples = cfg.run.samples;
  PathOptions opts;
  opts.jump_threshold = n * model.drift();
  opts.stop_at_extinction = false;
  struct Shard {
    std::vector<std::vector<std::string>> summary;
    std::vector<PathRecord> paths;
  };
  const std::vector<Shard> parts = run_shards<Shard>(
      shard_count(samples, kPathShard), cfg.run.workers, [&](std::int64_t shard) {
        Shard part;
        const std::int64_t count = shard_length(shard, samples, kPathShard);
        for (std::int64_t i = 0; i < count; ++i) {
          const std::int64_t id = shard * kPathShard + i;
          RandomStream rng = make_stream(cfg.run.seed, StreamDomain::Simulate,
                                         (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint64_t>(id));
          PathRecord path = simulate_path(model, n, rng, opts);
          part.summary.push_back(path_summary_row(path, model.drift()));
          if (cfg.run.full_paths) part.paths.push_back(std::move(path));
        }
        return part;
      });
  SimulatedRows out;
  std::int64_t id = 0;
  for (const Shard& part : parts) {
    for (const auto& row : part.summary) {
      out.survivors += row[1] == "1" ? 1 : 0;
      out.summary.push_back(row);
    }
    for (const PathRecord& path : part.paths) append_path_rows(out.paths, id++, path);
  }
  return out;
}

}  // namespace

CommandOutput cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvironmentModel model = cfg.model.build();
  CommandOutput out;
  Json report = report_header("simulate", cfg);
  report["results"] = Json::array();
  std::ostringstream summary;
  for (int n : cfg.run.n) {
    SimulatedRows rows = simulate_rows(model, n, cfg);
    Json entry{{"n", n}, {"samples", cfg.run.samples}, {"survivors", rows.survivors}};
    const std::string tag = "_n" + std::to_string(n);
    if (csv_out(cfg)) {
      CsvWriter csv = path_summary_csv();
      for (const auto& row : rows.summary) csv.row(row);
      out.files["summary" + tag + ".csv"] = csv.str();
      if (cfg.run.full_paths) out.files["paths" + tag + ".csv"] = rows.paths.str();
    } else {
      Json table = Json::array();
      const char* names[] = {"n", "survived", "U_n", "tau_n", "L_n", "M_n", "N_Un", "capped"};
      for (const auto& row : rows.summary) {
        Json r = Json::object();
        for (std::size_t c = 0; c < row.size(); ++c) r[names[c]] = row[c];
        table.push_back(r);
      }
      entry["summary"] = table;
      if (cfg.run.full_paths) entry["paths_csv"] = rows.paths.str();
    }
    report["results"].push_back(entry);
    summary << "n=" << n << ": " << rows.survivors << " of " << cfg.run.samples << " paths survived\n";
  }
  out.files["simulate.json"] = dump(report);
  out.summary = summary.str();
  return out;
}

CommandOutput cmd_constants(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvironmentModel model = cfg.model.build();
  const RunSettings run = cfg.run.settings();
  const ConstantReport D = const_D(model, cfg.run.k_max, cfg.run.walk_samples, run);
  const ConstantReport K1 = const_K1(model, cfg.run.k_max, cfg.run.walk_samples, run);
  const SurvivalSeries K = const_K(model, cfg.run.series_j_max, cfg.run.env_samples, run);
  const LadderSeries ladder = ladder_series(model, 1, cfg.run.walk_samples, run);
  const GammaMeanReport gamma = empirical_gamma_mean(model, cfg.run.gamma_x, cfg.run.samples, run);
  ConstantReport E_gamma;
  E_gamma.name = "E_gamma";
  E_gamma.value = gamma.indicator.point;
  E_gamma.mc_stderr = gamma.indicator.std_error;
  E_gamma.seed = cfg.run.seed;
  const std::vector<ConstantReport> reports{D, K.K, K1, ladder.E_tau, E_gamma};

  CommandOutput out;
  Json report = report_header("constants", cfg);
  report["constants"] = Json::array();
  for (const ConstantReport& r : reports) report["constants"].push_back(to_json(r));
  report["K_terms"] = to_json(K.term);
  report["E_gamma_pgf"] = to_json(gamma.pgf);
  report["E_gamma_limit"] = model.gamma_limit_law().mean();
  out.files["constants.json"] = dump(report);
  if (csv_out(cfg)) {
    CsvWriter csv({"name", "value", "truncation_index", "truncation_bound", "mc_stderr", "seed"});
    for (const ConstantReport& r : reports)
      csv.row({r.name, fmt(r.value), std::to_string(r.truncation_index), fmt(r.truncation_bound),
               fmt(r.mc_stderr), std::to_string(r.seed)});
    out.files["constants.csv"] = csv.str();
  }
  std::ostringstream summary;
  for (const ConstantReport& r : reports)
    summary << r.name << " = " << fmt(r.value) << " (mc stderr " << fmt(r.mc_stderr) << ", truncation bound "
            << fmt(r.truncation_bound) << ")\n";
  out.summary = summary.str();
  return out;
}

CommandOutput cmd_survival(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvironmentModel model = cfg.model.build();
  const RunSettings run = cfg.run.settings();
  const BigJumpConfig bj = cfg.run.big_jump();
  const SurvivalSeries K = const_K(model, cfg.run.series_j_max, cfg.run.env_samples, run);

  CommandOutput out;
  Json report = report_header("survival", cfg);
  report["K"] = to_json(K.K);
  report["results"] = Json::array();
  CsvWriter csv({"n", "naive", "naive_se", "bigjump", "bigjump_se", "theory", "ratio_naive",
                 "ratio_bigjump", "remainder", "remainder_bound"});
  std::ostringstream summary;
  double prev_gap = INFINITY;
  bool monotone = true;
  for (int n : cfg.run.n) {
    const Estimate naive = estimate_survival_naive(model, n, cfg.run.samples, run);
    const BigJumpEstimate is = estimate_survival_bigjump(model, n, cfg.run.samples, bj, run);
    const double theory = theoretical_survival(model, K.K, n);
    const double r_naive = naive.point / theory;
    const double r_is = is.total.point / theory;
    const double gap = std::abs(r_is - 1.0);
    monotone = monotone && gap <= prev_gap;
    prev_gap = gap;
    report["results"].push_back(Json{{"n", n},
                                     {"naive", to_json(naive)},
                                     {"bigjump", to_json(is)},
                                     {"theory", theory},
                                     {"ratio_naive", r_naive},
                                     {"ratio_bigjump", r_is}});
    csv.row({std::to_string(n), fmt(naive.point), fmt(naive.std_error), fmt(is.total.point),
             fmt(is.total.std_error), fmt(theory), fmt(r_naive), fmt(r_is), fmt(is.remainder.point),
             fmt(is.remainder_bound)});
    summary << "n=" << n << ": naive " << fmt(naive.point) << ", big-jump " << fmt(is.total.point)
            << " +- " << fmt(is.total.std_error) << ", K A(na) " << fmt(theory) << ", ratio "
            << fmt(r_is) << "\n";
  }
  report["ratio_gap_nonincreasing"] = monotone;
  out.files["survival.json"] = dump(report);
  if (csv_out(cfg)) out.files["survival.csv"] = csv.str();
  out.summary = summary.str();
  return out;
}

CommandOutput cmd_unlaw(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvironmentModel model = cfg.model.build();
  const RunSettings run = cfg.run.settings();
  const BigJumpConfig bj = cfg.run.big_jump();
  const HarvestMode mode = harvest_or(cfg, HarvestMode::BigJump);
  const SurvivalSeries K = const_K(model, cfg.run.series_j_max, cfg.run.env_samples, run);
  const LadderSeries ladder = ladder_series(model, kLawTableSize, cfg.run.walk_samples, run);
  Eigen::VectorXd yaglom(kLawTableSize), durrett(kLawTableSize);
  for (int j = 1; j <= kLawTableSize; ++j) {
    yaglom[j - 1] = un_yaglom_law(K, j);
    durrett[j - 1] = durrett_law(ladder, j);
  }

  CommandOutput out;
  Json report = report_header("unlaw", cfg);
  report["harvest"] = to_string(mode);
  report["yaglom_limit"] = to_json(yaglom);
  report["yaglom_tail_bound"] = un_yaglom_tail_bound(K);
  report["durrett_limit"] = to_json(durrett);
  report["results"] = Json::array();
  CsvWriter csv({"n", "j", "p_survival", "se_survival", "yaglom_limit", "p_tau", "se_tau", "durrett_limit"});
  std::ostringstream summary;
  for (int n : cfg.run.n) {
    const ConditionalLaw surv = conditional_un_distribution(model, n, cfg.run.min_survivors, bj, run, mode);
    const ConditionalLaw tau = conditional_un_distribution_tau(model, n, cfg.run.samples, bj, run);
    const int top = std::min<int>(kLawTableSize, static_cast<int>(surv.mass.size()));
    const Eigen::VectorXd ps = surv.mass.head(top), pt = tau.mass.head(top);
    const double tv_surv = tv_distance(ps, 1.0 - ps.sum(), yaglom.head(top), 1.0 - yaglom.head(top).sum());
    const double tv_tau = tv_distance(pt, 1.0 - pt.sum(), durrett.head(top), 1.0 - durrett.head(top).sum());
    report["results"].push_back(Json{{"n", n},
                                     {"given_survival", to_json(surv)},
                                     {"given_tau", to_json(tau)},
                                     {"tv_yaglom", tv_surv},
                                     {"tv_durrett", tv_tau}});
    for (int j = 1; j <= top; ++j)
      csv.row({std::to_string(n), std::to_string(j), fmt(surv.mass[j - 1]), fmt(surv.std_error[j - 1]),
               fmt(yaglom[j - 1]), fmt(tau.mass[j - 1]), fmt(tau.std_error[j - 1]), fmt(durrett[j - 1])});
    summary << "n=" << n << ": TV to the survival limit law " << fmt(tv_surv) << " (" << surv.survivors
            << " survivors" << (surv.insufficient ? ", insufficient" : "") << "), TV to the ladder law "
            << fmt(tv_tau) << "\n";
  }
  out.files["unlaw.json"] = dump(report);
  if (csv_out(cfg)) out.files["unlaw.csv"] = csv.str();
  out.summary = summary.str();
  return out;
}

CommandOutput cmd_flt(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvironmentModel model = cfg.model.build();
  const RunSettings run = cfg.run.settings();
  const BigJumpConfig bj = cfg.run.big_jump();
  const HarvestMode mode = harvest_or(cfg, HarvestMode::Explosion);

  CommandOutput out;
  Json report = report_header("flt", cfg);
  report["harvest"] = to_string(mode);
  report["results"] = Json::array();
  std::ostringstream summary;
  for (int n : cfg.run.n) {
    const FltReport flt = flt_suite(model, n, cfg.run.min_survivors, cfg.run.grid, bj, run, mode, cfg.run.epsilon);
    const ExplosionStats ex = explosion_statistics(model, n, cfg.run.min_survivors, bj, run);
    report["results"].push_back(Json{{"n", n}, {"flt", to_json(flt)}, {"explosion", to_json(ex)}});
    if (csv_out(cfg)) out.files["flt_n" + std::to_string(n) + ".csv"] = flt_csv(flt).str();
    const Eigen::Index last = flt.ks_W.size() - 1;
    summary << "n=" << n << ": " << flt.survivors << " survivors";
    if (last >= 0) summary << ", KS W(" << fmt(cfg.run.grid[last]) << ") " << fmt(flt.ks_W[last]);
    summary << ", increment KS " << fmt(flt.ks_increment)
            << ", max |mean R - 1| " << fmt(flt.max_mean_R_dev) << ", corr " << fmt(flt.corr_half_one)
            << ", explosion frequency " << fmt(ex.freq_both) << "\n";
  }
  out.files["flt.json"] = dump(report);
  out.summary = summary.str();
  return out;
}

CommandOutput run_command(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "simulate") return cmd_simulate(cfg);
  if (name == "constants") return cmd_constants(cfg);
  if (name == "survival") return cmd_survival(cfg);
  if (name == "unlaw") return cmd_unlaw(cfg);
  if (name == "flt") return cmd_flt(cfg);
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace bpre
