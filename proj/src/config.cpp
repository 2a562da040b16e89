#include "mkvflow/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mkvflow/csv.hpp"

namespace mkv {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number '" + s + "' for key " + key);
  }
}

long long to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer '" + s + "' for key " + key);
  }
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad unsigned integer '" + s + "' for key " + key);
  }
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config: bad boolean '" + s + "' for key " + key);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: malformed section header: " + raw);
      section = line.substr(1, line.size() - 2);
      if (section != "potentials" && section != "simulation" && section != "pde" &&
          section != "diagnostics" && section != "output") {
        throw ConfigError("config: unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key = value: " + raw);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = section + "." + key;

    if (section == "potentials") {
      if (key == "V") cfg.potential_v = value;
      else if (key == "W") cfg.potential_w = value;
      else if (key == "beta") cfg.potential_beta = value;
      else throw ConfigError("config: unknown key " + where);
    } else if (section == "simulation") {
      if (key == "n") cfg.n_particles = to_int(value, where);
      else if (key == "T") cfg.horizon = to_double(value, where);
      else if (key == "dt") cfg.dt = to_double(value, where);
      else if (key == "seed") cfg.seed = to_u64(value, where);
      else if (key == "scheme") cfg.scheme = value;
      else if (key == "record_stride") cfg.record_stride = to_int(value, where);
      else if (key == "t0") cfg.t0 = to_double(value, where);
      else if (key == "threads") cfg.threads = static_cast<int>(to_int(value, where));
      else if (key == "init_mean") cfg.init_mean = to_double(value, where);
      else if (key == "init_variance") cfg.init_variance = to_double(value, where);
      else throw ConfigError("config: unknown key " + where);
    } else if (section == "pde") {
      if (key == "cells") cfg.grid_cells = to_int(value, where);
      else if (key == "domain_lo") cfg.domain_lo = to_double(value, where);
      else if (key == "domain_hi") cfg.domain_hi = to_double(value, where);
      else if (key == "dt") cfg.pde_dt = to_double(value, where);
      else if (key == "T") cfg.pde_horizon = to_double(value, where);
      else if (key == "snapshot_stride") cfg.snapshot_stride = to_int(value, where);
      else throw ConfigError("config: unknown key " + where);
    } else if (section == "diagnostics") {
      if (key == "probes") {
        cfg.probes.clear();
        for (const auto& t : tokens(value)) cfg.probes.push_back(to_double(t, where));
        if (cfg.probes.empty()) throw ConfigError("config: probes must not be empty");
      } else if (key == "bins") cfg.bins = static_cast<int>(to_int(value, where));
      else if (key == "profile_points") cfg.profile_points = static_cast<int>(to_int(value, where));
      else if (key == "suite_cases") cfg.suite_cases = static_cast<int>(to_int(value, where));
      else if (key == "suite_seed") cfg.suite_seed = to_u64(value, where);
      else if (key == "kde_scores") cfg.kde_scores = to_bool(value, where);
      else throw ConfigError("config: unknown key " + where);
    } else if (section == "output") {
      if (key == "svg") cfg.svg = to_bool(value, where);
      else throw ConfigError("config: unknown key " + where);
    } else {
      throw ConfigError("config: key outside any section: " + raw);
    }
  }
  if (cfg.grid_cells < 8) throw ConfigError("config: pde.cells must be >= 8");
  if (!(cfg.domain_hi > cfg.domain_lo)) throw ConfigError("config: empty pde domain");
  if (cfg.scheme != "euler_maruyama" && cfg.scheme != "exact_ou" && cfg.scheme != "exact_nl") {
    throw ConfigError("config: unknown scheme '" + cfg.scheme + "'");
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  out << "[potentials]\n";
  out << "V = " << potential_v << "\n";
  out << "W = " << potential_w << "\n";
  out << "beta = " << potential_beta << "\n";
  out << "[simulation]\n";
  out << "n = " << n_particles << "\n";
  out << "T = " << format_double(horizon) << "\n";
  out << "dt = " << format_double(dt) << "\n";
  if (seed) out << "seed = " << *seed << "\n";
  out << "scheme = " << scheme << "\n";
  out << "record_stride = " << record_stride << "\n";
  out << "t0 = " << format_double(t0) << "\n";
  out << "threads = " << threads << "\n";
  out << "init_mean = " << format_double(init_mean) << "\n";
  out << "init_variance = " << format_double(init_variance) << "\n";
  out << "[pde]\n";
  out << "cells = " << grid_cells << "\n";
  out << "domain_lo = " << format_double(domain_lo) << "\n";
  out << "domain_hi = " << format_double(domain_hi) << "\n";
  out << "dt = " << format_double(pde_dt) << "\n";
  out << "T = " << format_double(pde_horizon) << "\n";
  out << "snapshot_stride = " << snapshot_stride << "\n";
  out << "[diagnostics]\n";
  out << "probes =";
  for (double p : probes) out << " " << format_double(p);
  out << "\n";
  out << "bins = " << bins << "\n";
  out << "profile_points = " << profile_points << "\n";
  out << "suite_cases = " << suite_cases << "\n";
  out << "suite_seed = " << suite_seed << "\n";
  out << "kde_scores = " << (kde_scores ? "true" : "false") << "\n";
  out << "[output]\n";
  out << "svg = " << (svg ? "true" : "false") << "\n";
  return out.str();
}

std::string RunConfig::config_hash() const {
  // The worker count does not influence any output value, so it is excluded:
  // the same config at any thread count must produce byte-identical files.
  std::istringstream lines(dump());
  std::string line, text;
  while (std::getline(lines, line)) {
    if (line.rfind("threads =", 0) == 0) continue;
    text += line;
    text += '\n';
  }
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("config: simulation.seed is mandatory for this command");
  return *seed;
}

namespace {

PotentialSpec<1> parse_potential(const std::string& text, const std::string& which) {
  const auto t = tokens(text);
  if (t.empty()) throw ConfigError("config: empty potential spec for " + which);
  if (t[0] == "zero") return zero_potential<1>();
  if (t[0] == "quadratic") {
    if (t.size() != 2) throw ConfigError("config: quadratic needs one coefficient (" + which + ")");
    return quadratic_potential<1>(to_double(t[1], which));
  }
  if (t[0] == "quadratic_bump") {
    if (t.size() != 5) {
      throw ConfigError("config: quadratic_bump needs a amp center width (" + which + ")");
    }
    return quadratic_bump_potential<1>(to_double(t[1], which), to_double(t[2], which),
                                       to_double(t[3], which), to_double(t[4], which));
  }
  if (t[0] == "polynomial_bump") {
    // polynomial_bump amp center width : c0 c1 ...
    auto colon = std::find(t.begin(), t.end(), ":");
    if (colon == t.end() || std::distance(t.begin(), colon) != 4) {
      throw ConfigError("config: polynomial_bump amp center width : c0 c1 ... (" + which + ")");
    }
    std::vector<double> coeffs;
    for (auto it = colon + 1; it != t.end(); ++it) coeffs.push_back(to_double(*it, which));
    if (coeffs.empty()) throw ConfigError("config: polynomial_bump needs coefficients");
    return polynomial_bump_potential(coeffs, to_double(t[1], which), to_double(t[2], which),
                                     to_double(t[3], which));
  }
  throw ConfigError("config: unknown potential '" + t[0] + "' for " + which);
}

}  // namespace

PotentialSpec<1> make_confinement(const RunConfig& cfg) {
  return parse_potential(cfg.potential_v, "potentials.V");
}

InteractionSpec<1> make_interaction(const RunConfig& cfg) {
  const auto t = tokens(cfg.potential_w);
  if (t.empty()) throw ConfigError("config: empty potentials.W");
  if (t[0] == "zero") return zero_interaction<1>();
  if (t[0] == "quadratic") {
    if (t.size() != 2) throw ConfigError("config: quadratic W needs one coefficient");
    return quadratic_interaction<1>(to_double(t[1], "potentials.W"));
  }
  if (t[0] == "quadratic_bump") {
    if (t.size() != 4) throw ConfigError("config: quadratic_bump W needs a amp width");
    return quadratic_bump_interaction<1>(to_double(t[1], "potentials.W"),
                                         to_double(t[2], "potentials.W"),
                                         to_double(t[3], "potentials.W"));
  }
  throw ConfigError("config: unknown interaction '" + t[0] + "'");
}

PerturbationSpec<1> make_perturbation(const RunConfig& cfg) {
  const auto t = tokens(cfg.potential_beta);
  if (t.empty() || t[0] == "none") return zero_perturbation();
  if (t[0] == "bump") {
    if (t.size() != 4) throw ConfigError("config: beta bump needs amp center width");
    return bump_perturbation(to_double(t[1], "potentials.beta"), to_double(t[2], "potentials.beta"),
                             to_double(t[3], "potentials.beta"));
  }
  throw ConfigError("config: unknown perturbation '" + t[0] + "'");
}

}  // namespace mkv
