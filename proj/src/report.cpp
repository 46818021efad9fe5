#include "bpre/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace bpre {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json to_json(const Estimate& e) {
  return Json{{"point", e.point},
              {"std_error", e.std_error},
              {"n_samples", e.n_samples},
              {"ci95", {e.ci_lo, e.ci_hi}},
              {"method", to_string(e.method)},
              {"flagged", e.flagged}};
}

Json to_json(const ConstantReport& r) {
  return Json{{"name", r.name},
              {"value", r.value},
              {"truncation_index", r.truncation_index},
              {"truncation_bound", r.truncation_bound},
              {"mc_stderr", r.mc_stderr},
              {"seed", r.seed}};
}

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return out;
}

Json to_json(const BigJumpEstimate& e) {
  return Json{{"total", to_json(e.total)},
              {"per_j", to_json(e.per_j)},
              {"per_j_stderr", to_json(e.per_j_stderr)},
              {"remainder", to_json(e.remainder)},
              {"remainder_bound", e.remainder_bound},
              {"jump_prob", e.jump_prob},
              {"j_max", e.j_max}};
}

Json to_json(const WalkBigJumpEstimate& e) {
  return Json{{"tau_tail", to_json(e.tau_tail)},
              {"negative_part", to_json(e.negative_part)},
              {"conditional", to_json(e.conditional)},
              {"conditional_stderr", to_json(e.conditional_stderr)},
              {"hits", e.hits},
              {"jump_prob", e.jump_prob},
              {"j_max", e.j_max}};
}

Json to_json(const ConditionalLaw& law) {
  return Json{{"mass", to_json(law.mass)},
              {"std_error", to_json(law.std_error)},
              {"beyond", law.beyond},
              {"survivors", law.survivors},
              {"effective_survivors", law.effective_survivors},
              {"insufficient", law.insufficient}};
}

Json to_json(const ExplosionStats& s) {
  return Json{{"freq_early_jump", s.freq_early_jump},
              {"freq_big_family", s.freq_big_family},
              {"freq_both", s.freq_both},
              {"freq_both_stderr", s.freq_both_stderr},
              {"tv_diagnostic", s.tv_diagnostic},
              {"survivors", s.survivors},
              {"h_n", s.h},
              {"log_family_threshold", s.log_family_threshold}};
}

Json to_json(const FltReport& r) {
  return Json{{"grid", to_json(r.grid)},
              {"mean_R", to_json(r.mean_R)},
              {"max_mean_R_dev", r.max_mean_R_dev},
              {"ks_W", to_json(r.ks_W)},
              {"ks_W_p", to_json(r.ks_W_p)},
              {"cov_W", to_json(r.cov_W)},
              {"epsilon", r.epsilon},
              {"ks_increment", r.ks_increment},
              {"ks_increment_p", r.ks_increment_p},
              {"corr_half_one", r.corr_half_one},
              {"survivors", r.survivors},
              {"excluded_capped", r.excluded_capped}};
}

Json report_header(const std::string& command, const ExperimentConfig& cfg) {
  Json config = Json::object();
  for (const auto& [key, value] : cfg.echo()) config[key] = value;
  return Json{{"tool", "bpre"},
              {"version", kVersion},
              {"command", command},
              {"seed", cfg.run.seed},
              {"workers", cfg.run.workers},
              {"config", config}};
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw std::logic_error("csv: wrong number of fields");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_ += ',';
    text_ += fields[i];
  }
  text_ += '\n';
}

CsvWriter path_csv() { return CsvWriter({"run_id", "k", "Z_k", "S_k"}); }

CsvWriter path_summary_csv() {
  return CsvWriter({"n", "survived", "U_n", "tau_n", "L_n", "M_n", "N_Un", "capped"});
}

void append_path_rows(CsvWriter& csv, std::int64_t run_id, const PathRecord& path) {
  for (int k = 0; k <= path.length(); ++k)
    csv.row({std::to_string(run_id), std::to_string(k), format_double(path.z[k]), format_double(path.s[k])});
}

std::vector<std::string> path_summary_row(const PathRecord& path, double a) {
  const WalkFunctionals w = walk_functionals(path, a);
  return {std::to_string(path.length()),
          path.survived() ? "1" : "0",
          w.U_n ? std::to_string(*w.U_n) : "",
          std::to_string(w.tau_n),
          format_double(w.L_n),
          format_double(w.M_n),
          path.n_big_jump_offspring ? format_double(*path.n_big_jump_offspring) : "",
          path.capped ? "1" : "0"};
}

CsvWriter flt_csv(const FltReport& r) {
  CsvWriter csv({"survivor", "weight", "U_n", "N_Un", "t", "R", "W"});
  for (Eigen::Index i = 0; i < r.R.rows(); ++i)
    for (Eigen::Index c = 0; c < r.grid.size(); ++c)
      csv.row({std::to_string(i), format_double(r.weights[i]), std::to_string(r.U[i]),
               format_double(r.N_Un[i]), format_double(r.grid[c]), format_double(r.R(i, c)),
               format_double(r.W(i, c))});
  return csv;
}

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace bpre
