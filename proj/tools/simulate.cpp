// molbat simulate <config> [--out DIR] [--format csv|json] [--threads N] [--verify]
//
// Exit codes: 0 all records ok, 1 some record failed numerically or in
// verification, 2 configuration or output-directory error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "molbat/config.hpp"
#include "molbat/records.hpp"
#include "molbat/scenarios.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;

// Fails early so a long run never ends with nowhere to write.
bool output_dir_writable(const std::string& dir, std::string& why) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    why = ec.message();
    return false;
  }
  const fs::path probe = fs::path(dir) / ".simulate-probe";
  {
    std::ofstream f(probe);
    if (!f) {
      why = "not writable";
      return false;
    }
  }
  fs::remove(probe, ec);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Molecular battery simulations"};
  app.require_subcommand(1);
  auto* sim = app.add_subcommand("simulate", "Run a scenario configuration");
  std::string config_path, out_dir, format;
  int threads = 1;
  bool verify = false;
  sim->add_option("config", config_path, "Scenario configuration (JSON)")->required();
  sim->add_option("--out", out_dir, "Output directory (default: output.dir of the config)");
  sim->add_option("--format", format, "csv or json (default: output.format of the config)")
      ->check(CLI::IsMember({"csv", "json"}));
  sim->add_option("--threads", threads, "Worker threads, 0 = hardware concurrency")->check(CLI::NonNegativeNumber);
  sim->add_flag("--verify", verify, "Run the invariant checks of the scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  molbat::ScenarioConfig cfg;
  try {
    cfg = molbat::load_config(config_path);
  } catch (const molbat::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (out_dir.empty()) out_dir = cfg.out_dir;
  if (format.empty()) format = cfg.format;
  if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  std::string why;
  if (!output_dir_writable(out_dir, why)) {
    std::cerr << "output error: " << out_dir << ": " << why << "\n";
    return kExitConfig;
  }

  molbat::RunOptions opt;
  opt.verify = verify;
  opt.threads = threads;
  const std::vector<molbat::ResultRecord> records = molbat::run_scenario(cfg, opt);

  molbat::EmittedFiles files;
  try {
    files = molbat::emit(records, out_dir, cfg.name,
                         format == "json" ? molbat::OutputFormat::Json : molbat::OutputFormat::Csv);
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::size_t failed = 0;
  for (const auto& r : records) {
    if (r.ok()) continue;
    ++failed;
    std::cerr << r.id << ": " << r.status << "\n";
  }
  std::cout << records.size() << " record(s), " << failed << " failed -> " << files.data << "\n";
  return failed ? kExitNumerical : kExitOk;
}
