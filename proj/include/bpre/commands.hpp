#pragma once

#include <map>
#include <string>

#include "bpre/config.hpp"

namespace bpre {

/// Files a command produces, by name, and a short human-readable summary.
/// Contents depend only on the config (seed and workers included).
struct CommandOutput {
  std::map<std::string, std::string> files;
  std::string summary;
};

CommandOutput cmd_simulate(const ExperimentConfig& cfg);
CommandOutput cmd_constants(const ExperimentConfig& cfg);
CommandOutput cmd_survival(const ExperimentConfig& cfg);
CommandOutput cmd_unlaw(const ExperimentConfig& cfg);
CommandOutput cmd_flt(const ExperimentConfig& cfg);

/// Dispatch by name: simulate | constants | survival | unlaw | flt.
CommandOutput run_command(const std::string& name, const ExperimentConfig& cfg);

}  // namespace bpre
