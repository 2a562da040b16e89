#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "mkvflow/drivers.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool svg = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (flat key/value sections)");
  cmd->add_option("--out", args.out_dir, "output directory for report files");
  cmd->add_option("--seed", args.seed, "override simulation.seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_flag("--svg", args.svg, "also emit SVG plots");
}

mkv::RunConfig load(const CommonArgs& args) {
  mkv::RunConfig cfg =
      args.config_path.empty() ? mkv::RunConfig{} : mkv::load_config_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.svg) cfg.svg = true;
  std::filesystem::create_directories(args.out_dir);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"McKean-Vlasov diffusions: entropy dissipation, gradient flows and HWBI"};
  app.require_subcommand(1);

  CommonArgs args;
  using Runner = mkv::DriverResult (*)(const mkv::RunConfig&, const std::filesystem::path&);
  const std::vector<std::pair<std::string, Runner>> commands = {
      {"reproduce-figures", &mkv::run_reproduce_figures},
      {"dissipation", &mkv::run_dissipation},
      {"gradient-flow", &mkv::run_gradient_flow},
      {"hwbi", &mkv::run_hwbi},
      {"oracle", &mkv::run_oracle},
      {"simulate", &mkv::run_simulate},
  };

  Runner selected = nullptr;
  for (const auto& [name, fn] : commands) {
    auto* cmd = app.add_subcommand(name);
    add_common(cmd, args);
    cmd->callback([&selected, fn = fn]() { selected = fn; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const mkv::RunConfig cfg = load(args);
    const auto result = selected(cfg, args.out_dir);
    std::cout << result.summary;
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
