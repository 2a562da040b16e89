#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mkv {

// CSV with a fixed contract: '.' decimal separator, %.17g round-trip
// formatting, one comment line carrying the producing command and the config
// hash, then a mandatory header row. Identical inputs produce byte-identical
// files.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& command,
            const std::string& config_hash, const std::vector<std::string>& columns);

  void row(const std::vector<double>& values);
  void raw_row(const std::string& line);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

std::string format_double(double v);

template <int Dim>
struct ParticleEnsemble;
struct GridDensity;
struct PdeState;

// One row per particle (index, position).
void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble<1>& e,
                        const std::string& command, const std::string& config_hash);

// One row per cell (midpoint, density).
void write_grid_csv(const std::filesystem::path& path, const GridDensity& g,
                    const std::string& command, const std::string& config_hash);

// One row per cell (midpoint, density, score).
void write_snapshot_csv(const std::filesystem::path& path, const PdeState& state,
                        const std::string& command, const std::string& config_hash);

// Minimal SVG polyline plot; presentational only, the CSV is the contract.
void write_svg_lines(const std::filesystem::path& path, const Eigen::ArrayXd& x,
                     const std::vector<Eigen::ArrayXd>& series,
                     const std::vector<std::string>& colors, const std::string& title);

}  // namespace mkv
