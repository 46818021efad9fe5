#include "bpre/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace bpre {

namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("invalid value for '" + key + "': '" + raw + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + raw + "'");
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"model", {"family", "beta", "x_m", "shift_c", "gamma_min", "gamma_max"}},
      {"run",
       {"n", "samples", "min_survivors", "j_max", "grid", "seed", "workers", "h_n", "delta_n",
        "split_level", "k_max", "series_j_max", "walk_samples", "env_samples", "gamma_x",
        "epsilon", "full_paths", "harvest"}},
      {"output", {"directory", "format"}},
  };
  return keys;
}

}  // namespace

EnvironmentModel ModelSection::build() const {
  switch (family_from_string(family)) {
    case Family::ParetoGeometric: return EnvironmentModel::pareto_geometric(beta, x_m, shift_c);
    case Family::ParetoPoisson: return EnvironmentModel::pareto_poisson(beta, x_m, shift_c);
    case Family::ParetoFractionalAtom:
      return EnvironmentModel::pareto_fractional_atom(beta, x_m, shift_c, {gamma_min, gamma_max});
    case Family::Fixed: break;
  }
  throw ConfigError("family '" + family + "' cannot be configured");
}

BigJumpConfig RunSection::big_jump() const {
  BigJumpConfig cfg;
  cfg.j_max = j_max;
  cfg.h_n = SequenceSpec::parse(h_n);
  cfg.delta_n = SequenceSpec::parse(delta_n);
  cfg.split_level = split_level;
  return cfg;
}

HarvestMode harvest_mode_from_string(const std::string& name) {
  if (name == "naive") return HarvestMode::Naive;
  if (name == "bigjump") return HarvestMode::BigJump;
  if (name == "explosion") return HarvestMode::Explosion;
  throw ConfigError("unknown harvest mode '" + name + "'");
}

std::string to_string(HarvestMode mode) {
  switch (mode) {
    case HarvestMode::Naive: return "naive";
    case HarvestMode::BigJump: return "bigjump";
    case HarvestMode::Explosion: break;
  }
  return "explosion";
}

void ExperimentConfig::validate() const {
  model.build();
  if (run.n.empty()) throw ConfigError("run.n must list at least one value");
  for (int n : run.n)
    if (n < 1) throw ConfigError("run.n values must be >= 1");
  if (run.samples < 0) throw ConfigError("run.samples must be >= 0");
  if (run.min_survivors < 0) throw ConfigError("run.min_survivors must be >= 0");
  if (run.j_max < 0) throw ConfigError("run.j_max must be >= 0");
  if (run.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (!(run.split_level > 0.0 && run.split_level <= 1.0))
    throw ConfigError("run.split_level must lie in (0, 1]");
  if (run.k_max < 1) throw ConfigError("run.k_max must be >= 1");
  if (run.series_j_max < 0) throw ConfigError("run.series_j_max must be >= 0");
  if (run.walk_samples < 1 || run.env_samples < 1)
    throw ConfigError("run.walk_samples and run.env_samples must be >= 1");
  if (!(run.gamma_x > 0.0)) throw ConfigError("run.gamma_x must be positive");
  if (!(run.epsilon > 0.0 && run.epsilon < 1.0)) throw ConfigError("run.epsilon must lie in (0, 1)");
  for (Eigen::Index i = 0; i < run.grid.size(); ++i) {
    if (!(run.grid[i] >= 0.0 && run.grid[i] <= 1.0)) throw ConfigError("run.grid values must lie in [0, 1]");
    if (i > 0 && !(run.grid[i] > run.grid[i - 1])) throw ConfigError("run.grid must be increasing");
  }
  if (!run.harvest.empty()) harvest_mode_from_string(run.harvest);
  // The growth conditions on h_n and delta_n only make sense from n = 3 on.
  std::vector<int> grid_n;
  for (int n : run.n)
    if (n >= 3) grid_n.push_back(n);
  run.big_jump().validate(grid_n);
  if (output.format != "csv" && output.format != "json")
    throw ConfigError("output.format must be csv or json");
  if (output.directory.empty()) throw ConfigError("output.directory must not be empty");
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::map<std::string, std::string> out;
  out["model.family"] = model.family;
  out["model.beta"] = format_number(model.beta);
  out["model.x_m"] = format_number(model.x_m);
  out["model.shift_c"] = format_number(model.shift_c);
  out["model.gamma_min"] = format_number(model.gamma_min);
  out["model.gamma_max"] = format_number(model.gamma_max);
  std::string ns;
  for (int n : run.n) ns += (ns.empty() ? "" : ",") + std::to_string(n);
  out["run.n"] = ns;
  out["run.samples"] = std::to_string(run.samples);
  out["run.min_survivors"] = std::to_string(run.min_survivors);
  out["run.j_max"] = std::to_string(run.j_max);
  std::string grid;
  for (Eigen::Index i = 0; i < run.grid.size(); ++i)
    grid += (i ? "," : "") + format_number(run.grid[i]);
  out["run.grid"] = grid;
  out["run.seed"] = std::to_string(run.seed);
  out["run.workers"] = std::to_string(run.workers);
  out["run.h_n"] = run.h_n;
  out["run.delta_n"] = run.delta_n;
  out["run.split_level"] = format_number(run.split_level);
  out["run.k_max"] = std::to_string(run.k_max);
  out["run.series_j_max"] = std::to_string(run.series_j_max);
  out["run.walk_samples"] = std::to_string(run.walk_samples);
  out["run.env_samples"] = std::to_string(run.env_samples);
  out["run.gamma_x"] = format_number(run.gamma_x);
  out["run.epsilon"] = format_number(run.epsilon);
  out["run.full_paths"] = run.full_paths ? "true" : "false";
  out["run.harvest"] = run.harvest;
  out["output.format"] = output.format;
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& allowed = allowed_keys();
  for (const auto& [section, body] : tree) {
    const auto it = allowed.find(section);
    if (it == allowed.end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
  }

  ExperimentConfig cfg;
  auto get = [&](const char* path, auto&& apply) {
    if (const auto v = tree.get_optional<std::string>(path)) apply(*v);
  };
  get("model.family", [&](const std::string& v) { cfg.model.family = trim(v); });
  get("model.beta", [&](const std::string& v) { cfg.model.beta = parse_value<double>("beta", v); });
  get("model.x_m", [&](const std::string& v) { cfg.model.x_m = parse_value<double>("x_m", v); });
  get("model.shift_c", [&](const std::string& v) { cfg.model.shift_c = parse_value<double>("shift_c", v); });
  get("model.gamma_min", [&](const std::string& v) { cfg.model.gamma_min = parse_value<double>("gamma_min", v); });
  get("model.gamma_max", [&](const std::string& v) { cfg.model.gamma_max = parse_value<double>("gamma_max", v); });

  get("run.n", [&](const std::string& v) {
    cfg.run.n.clear();
    for (const std::string& item : split(v, ',')) cfg.run.n.push_back(parse_value<int>("n", item));
  });
  get("run.samples", [&](const std::string& v) { cfg.run.samples = parse_value<std::int64_t>("samples", v); });
  get("run.min_survivors", [&](const std::string& v) {
    cfg.run.min_survivors = parse_value<std::int64_t>("min_survivors", v);
  });
  get("run.j_max", [&](const std::string& v) { cfg.run.j_max = parse_value<int>("j_max", v); });
  get("run.grid", [&](const std::string& v) {
    const std::vector<std::string> items = split(v, ',');
    cfg.run.grid.resize(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i)
      cfg.run.grid[static_cast<Eigen::Index>(i)] = parse_value<double>("grid", items[i]);
  });
  get("run.seed", [&](const std::string& v) { cfg.run.seed = parse_value<std::uint64_t>("seed", v); });
  get("run.workers", [&](const std::string& v) { cfg.run.workers = parse_value<int>("workers", v); });
  get("run.h_n", [&](const std::string& v) { cfg.run.h_n = trim(v); });
  get("run.delta_n", [&](const std::string& v) { cfg.run.delta_n = trim(v); });
  get("run.split_level", [&](const std::string& v) { cfg.run.split_level = parse_value<double>("split_level", v); });
  get("run.k_max", [&](const std::string& v) { cfg.run.k_max = parse_value<int>("k_max", v); });
  get("run.series_j_max", [&](const std::string& v) { cfg.run.series_j_max = parse_value<int>("series_j_max", v); });
  get("run.walk_samples", [&](const std::string& v) {
    cfg.run.walk_samples = parse_value<std::int64_t>("walk_samples", v);
  });
  get("run.env_samples", [&](const std::string& v) {
    cfg.run.env_samples = parse_value<std::int64_t>("env_samples", v);
  });
  get("run.gamma_x", [&](const std::string& v) { cfg.run.gamma_x = parse_value<double>("gamma_x", v); });
  get("run.epsilon", [&](const std::string& v) { cfg.run.epsilon = parse_value<double>("epsilon", v); });
  get("run.full_paths", [&](const std::string& v) { cfg.run.full_paths = parse_bool("full_paths", v); });
  get("run.harvest", [&](const std::string& v) { cfg.run.harvest = trim(v); });

  get("output.directory", [&](const std::string& v) { cfg.output.directory = trim(v); });
  get("output.format", [&](const std::string& v) { cfg.output.format = trim(v); });
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace bpre
