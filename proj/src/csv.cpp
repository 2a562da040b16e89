#include "mkvflow/csv.hpp"

#include <cstdio>

#include "mkvflow/common.hpp"
#include "mkvflow/measures.hpp"
#include "mkvflow/pde.hpp"

namespace mkv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& command,
                     const std::string& config_hash, const std::vector<std::string>& columns)
    : out_(path), columns_(columns.size()) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_ << "# mkvflow " << command << " config_hash=" << config_hash << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
  }
  out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw Error("csv row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    out_ << format_double(values[i]) << (i + 1 < values.size() ? "," : "");
  }
  out_ << "\n";
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n"; }

void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble<1>& e,
                        const std::string& command, const std::string& config_hash) {
  CsvWriter csv(path, command, config_hash, {"particle", "position"});
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    csv.row({static_cast<double>(i), e.positions(i, 0)});
  }
}

void write_grid_csv(const std::filesystem::path& path, const GridDensity& g,
                    const std::string& command, const std::string& config_hash) {
  CsvWriter csv(path, command, config_hash, {"x_midpoint", "density"});
  for (Eigen::Index i = 0; i < g.cells(); ++i) {
    csv.row({g.midpoint(i), g.cell(i)});
  }
}

void write_snapshot_csv(const std::filesystem::path& path, const PdeState& state,
                        const std::string& command, const std::string& config_hash) {
  CsvWriter csv(path, command, config_hash, {"x_midpoint", "density", "score"});
  for (Eigen::Index i = 0; i < state.grid.cells(); ++i) {
    const double x = state.grid.midpoint(i);
    csv.row({x, state.grid.cell(i), score(state.grid, x)});
  }
}

void write_svg_lines(const std::filesystem::path& path, const Eigen::ArrayXd& x,
                     const std::vector<Eigen::ArrayXd>& series,
                     const std::vector<std::string>& colors, const std::string& title) {
  const int width = 720, height = 480, pad = 50;
  double ymin = 0.0, ymax = 0.0;
  for (const auto& s : series) {
    ymin = std::min(ymin, s.minCoeff());
    ymax = std::max(ymax, s.maxCoeff());
  }
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double xmin = x.minCoeff(), xmax = x.maxCoeff();
  const auto px = [&](double v) {
    return pad + (v - xmin) / (xmax - xmin) * (width - 2 * pad);
  };
  const auto py = [&](double v) {
    return height - pad - (v - ymin) / (ymax - ymin) * (height - 2 * pad);
  };
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  out << "<line x1='" << px(xmin) << "' y1='" << py(0.0) << "' x2='" << px(xmax) << "' y2='"
      << py(0.0) << "' stroke='#999' stroke-width='1'/>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << "<polyline fill='none' stroke='" << colors[k % colors.size()]
        << "' stroke-width='" << (k + 1 == series.size() ? 2.5 : 1.0) << "' points='";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      out << px(x(i)) << "," << py(series[k](i)) << " ";
    }
    out << "'/>\n";
  }
  out << "</svg>\n";
}

}  // namespace mkv
