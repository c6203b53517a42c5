// Command line driver for the experiment runner.
//
// Exit codes: 0 success, 1 configuration problem (bad command line, malformed
// config file, unknown key, out-of-range value), 2 numeric failure during a
// run (whatever was written stays on disk and the run record carries
// status=failed).

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ncham/errors.hpp"
#include "ncham/experiments.hpp"
#include "ncham/version.hpp"

namespace {

int run_command(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir) {
  try {
    ncham::ExperimentConfig cfg = ncham::parse_config_file(config_path);
    for (const std::string& kv : overrides) ncham::apply_override(cfg, kv);
    if (!out_dir.empty()) cfg.entries["output_dir"] = ncham::ConfigValue{out_dir, "--out"};
    const auto dir = ncham::run_experiment(cfg);
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
  } catch (const ncham::ConfigError& e) {
    std::fprintf(stderr, "ncham: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ncham: run failed: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncham: reproducible correspondence experiments"};
  app.set_version_flag("--version", std::string(ncham::kVersion));
  app.require_subcommand(1);

  CLI::App* list = app.add_subcommand("list", "print the available experiment ids");
  CLI::App* run = app.add_subcommand("run", "run one experiment from a key=value config file");
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  run->add_option("config", config_path, "key=value config file")->required();
  run->add_option("--set", overrides, "override one key=value pair (repeatable)");
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // command line problems count as config errors
  }

  if (list->parsed()) {
    for (const auto& info : ncham::experiment_table())
      std::printf("%-28s %s\n", info.id, info.summary);
    return 0;
  }
  return run_command(config_path, overrides, out_dir);
}
