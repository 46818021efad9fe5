#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "bpre/asymptotics.hpp"
#include "bpre/config.hpp"
#include "bpre/montecarlo.hpp"
#include "bpre/process.hpp"
#include "bpre/stats.hpp"

namespace bpre {

using Json = nlohmann::ordered_json;

Json to_json(const Estimate& e);
Json to_json(const ConstantReport& r);
Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Json to_json(const BigJumpEstimate& e);
Json to_json(const WalkBigJumpEstimate& e);
Json to_json(const ConditionalLaw& law);
Json to_json(const ExplosionStats& s);
/// Summary statistics only; the per-survivor arrays go to CSV.
Json to_json(const FltReport& r);

/// Header block every report starts with: tool, version, seed, workers and
/// the config echo.
Json report_header(const std::string& command, const ExperimentConfig& cfg);

/// %.17g, or "nan" / "inf" / "-inf".
std::string format_double(double x);

/// Minimal CSV writer; fields are written as given, doubles with %.17g.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  const std::string& str() const noexcept { return text_; }

 private:
  std::size_t columns_;
  std::string text_;
};

/// run_id, k, Z_k, S_k.
void append_path_rows(CsvWriter& csv, std::int64_t run_id, const PathRecord& path);
/// n, survived, U_n, tau_n, L_n, M_n, N_Un, capped.
std::vector<std::string> path_summary_row(const PathRecord& path, double a);
CsvWriter path_summary_csv();
CsvWriter path_csv();

/// One row per (survivor, grid time): survivor, weight, U_n, N_Un, t, R, W.
CsvWriter flt_csv(const FltReport& r);

/// Writes text to dir/name, creating dir; throws std::runtime_error.
void write_file(const std::string& dir, const std::string& name, const std::string& text);

}  // namespace bpre
