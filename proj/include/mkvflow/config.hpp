#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mkvflow/potentials.hpp"

namespace mkv {

// Flat key/value configuration with sections [potentials], [simulation],
// [pde], [diagnostics], [output]. Every field has a default; unknown keys
// are rejected; parse -> dump -> parse is lossless.
struct RunConfig {
  // [potentials]  (token grammar, e.g. "quadratic 1.0",
  //  "quadratic_bump 1.0 0.5 0.0 0.7071", "polynomial_bump a c w : c0 c1 ...",
  //  "zero"; beta: "none" or "bump amp center width")
  std::string potential_v = "quadratic 1.0";
  std::string potential_w = "zero";
  std::string potential_beta = "none";

  // [simulation]
  Eigen::Index n_particles = 100000;
  double horizon = 1.0;
  double dt = 1e-3;
  std::optional<std::uint64_t> seed;  // mandatory for simulation commands
  std::string scheme = "euler_maruyama";
  Eigen::Index record_stride = 10;
  double t0 = 0.0;  // perturbation activation time
  int threads = 1;
  double init_mean = 0.0;
  double init_variance = 0.1;

  // [pde]
  Eigen::Index grid_cells = 2048;
  double domain_lo = -9.0;
  double domain_hi = 9.0;
  double pde_dt = 0.0;  // 0: half the initial stability bound
  double pde_horizon = 1.0;
  Eigen::Index snapshot_stride = 0;  // 0: spacing ~1e-3

  // [diagnostics]
  std::vector<double> probes = {0.25, 0.5, 1.0};
  int bins = 10;
  int profile_points = 33;
  int suite_cases = 100;
  std::uint64_t suite_seed = 2718281828;
  bool kde_scores = false;  // experimental particle-only score estimation

  // [output]
  bool svg = false;

  std::string dump() const;         // canonical text form
  std::string config_hash() const;  // FNV-1a of the canonical dump, hex

  std::uint64_t require_seed() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Instantiate the potential catalog from the config grammar.
PotentialSpec<1> make_confinement(const RunConfig& cfg);
InteractionSpec<1> make_interaction(const RunConfig& cfg);
PerturbationSpec<1> make_perturbation(const RunConfig& cfg);

}  // namespace mkv
