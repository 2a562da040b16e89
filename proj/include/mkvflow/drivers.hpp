#pragma once

#include <filesystem>
#include <string>

#include "mkvflow/config.hpp"

namespace mkv {

// Experiment drivers behind the CLI subcommands. Each writes its report
// files under out_dir and returns 0 when every assertion in its suite holds
// (the CLI exit-code contract doubles as the acceptance harness).
struct DriverResult {
  int exit_code = 0;
  std::string summary;
};

DriverResult run_reproduce_figures(const RunConfig& cfg, const std::filesystem::path& out_dir);
DriverResult run_dissipation(const RunConfig& cfg, const std::filesystem::path& out_dir);
DriverResult run_gradient_flow(const RunConfig& cfg, const std::filesystem::path& out_dir);
DriverResult run_hwbi(const RunConfig& cfg, const std::filesystem::path& out_dir);
DriverResult run_oracle(const RunConfig& cfg, const std::filesystem::path& out_dir);
DriverResult run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace mkv
