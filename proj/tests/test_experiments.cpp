#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ncham/experiments.hpp"
#include "support.hpp"

using namespace ncham;
namespace fs = std::filesystem;

namespace {

// Every case works inside its own scratch directory so reruns and parallel
// ctest invocations cannot see each other's files.
fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ncham_experiments_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ostringstream out;
  out << std::ifstream(p).rdbuf();
  return out.str();
}

std::map<std::string, std::string> read_record(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

double value(const std::map<std::string, std::string>& kv, const std::string& key) {
  REQUIRE(kv.count(key) == 1);
  return std::strtod(kv.at(key).c_str(), nullptr);
}

ExperimentConfig make_config(std::initializer_list<std::pair<std::string, std::string>> kv) {
  ExperimentConfig cfg;
  int line = 0;
  for (const auto& [k, v] : kv) cfg.entries[k] = ConfigValue{v, "test:" + std::to_string(++line)};
  return cfg;
}

std::string config_error_message(const ExperimentConfig& cfg) {
  try {
    run_experiment(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  FAIL("expected ConfigError");
  return {};
}

}  // namespace

TEST_CASE("config files parse with comments, trimming, and origins") {
  const fs::path dir = fresh_dir("parse");
  const fs::path path = write_file(dir, "run.cfg",
                                   "# header comment\n"
                                   "\n"
                                   "  experiment = free_packet  # trailing note\n"
                                   "steps=12\n");
  const ExperimentConfig cfg = parse_config_file(path.string());
  REQUIRE(cfg.entries.size() == 2);
  REQUIRE(cfg.entries.at("experiment").text == "free_packet");
  REQUIRE(cfg.entries.at("experiment").origin == path.string() + ":3");
  REQUIRE(cfg.entries.at("steps").text == "12");
  REQUIRE(cfg.entries.at("steps").origin == path.string() + ":4");

  SECTION("duplicate keys point back to the first definition") {
    const fs::path dup = write_file(dir, "dup.cfg", "a=1\na=2\n");
    try {
      parse_config_file(dup.string());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      REQUIRE(msg.find(":2: duplicate key 'a'") != std::string::npos);
      REQUIRE(msg.find(":1") != std::string::npos);
    }
  }
  SECTION("malformed lines and keys are rejected") {
    REQUIRE_THROWS_AS(parse_config_file(write_file(dir, "a.cfg", "novalue\n").string()),
                      ConfigError);
    REQUIRE_THROWS_AS(parse_config_file(write_file(dir, "b.cfg", "Bad-Key=1\n").string()),
                      ConfigError);
    REQUIRE_THROWS_AS(parse_config_file((dir / "missing.cfg").string()), ConfigError);
  }
}

TEST_CASE("overrides replace file values and append new keys") {
  const fs::path dir = fresh_dir("override");
  const fs::path path = write_file(dir, "run.cfg", "experiment=hbar_sweep\ngrid_points=32\n");
  ExperimentConfig cfg = parse_config_file(path.string());
  apply_override(cfg, "grid_points=48");
  apply_override(cfg, " extent = 4 ");
  REQUIRE(cfg.entries.at("grid_points").text == "48");
  REQUIRE(cfg.entries.at("grid_points").origin == "--set grid_points=48");
  REQUIRE(cfg.entries.at("extent").text == "4");
  REQUIRE_THROWS_AS(apply_override(cfg, "noequals"), ConfigError);
}

TEST_CASE("unknown keys and bad values are config errors with an origin") {
  REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"bogus", "1"}}))
              .find("unknown key 'bogus'") != std::string::npos);
  REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"bogus", "1"}}))
              .find("test:2") != std::string::npos);
  REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"sigma", "abc"}}))
              .find("not a finite number") != std::string::npos);
  REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"sigma", "-0.5"}}))
              .find("outside") != std::string::npos);
  REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"steps", "1e3"}}))
              .find("not an integer") != std::string::npos);
  REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"seed", "-5"}}))
              .find("not an unsigned integer") != std::string::npos);
  REQUIRE(config_error_message(make_config({})).find("missing required key 'experiment'") !=
          std::string::npos);
  REQUIRE(config_error_message(make_config({{"experiment", "nope"}}))
              .find("unknown experiment 'nope'") != std::string::npos);

  SECTION("list keys validate shape and ordering") {
    REQUIRE(config_error_message(
                make_config({{"experiment", "hbar_sweep"}, {"hbars", "1e-1,,1e-3"}}))
                .find("nonempty comma-separated") != std::string::npos);
    REQUIRE(config_error_message(
                make_config({{"experiment", "hbar_sweep"}, {"hbars", "1e-3,1e-2,1e-1"}}))
                .find("strictly decrease") != std::string::npos);
    REQUIRE(config_error_message(
                make_config({{"experiment", "hbar_sweep"}, {"hbars", "1e-1,1e-2"}}))
                .find("at least 3") != std::string::npos);
    REQUIRE(config_error_message(
                make_config({{"experiment", "galilean_audit"}, {"sizes", "128,64"}}))
                .find("strictly increase") != std::string::npos);
  }
  SECTION("physics guards reject runs the solver cannot certify") {
    REQUIRE(config_error_message(make_config({{"experiment", "free_packet"},
                                              {"s0_curvature", "-1"},
                                              {"t_final", "2"}}))
                .find("focal time") != std::string::npos);
    REQUIRE(config_error_message(
                make_config({{"experiment", "free_packet"}, {"steps", "1"}}))
                .find("advective stability bound") != std::string::npos);
    REQUIRE(config_error_message(make_config({{"experiment", "free_packet"}, {"x0", "11"}}))
                .find("does not fit the box") != std::string::npos);
    REQUIRE(config_error_message(make_config({{"experiment", "oscillator_correspondence"},
                                              {"x0", "10"},
                                              {"p0", "10"},
                                              {"levels", "8"}}))
                .find("raise levels") != std::string::npos);
  }
}

TEST_CASE("free packet reproduces the dilation closed form") {
  const fs::path out = fresh_dir("free_packet");

  SECTION("linear action transports at machine-level action error") {
    const fs::path dir = run_experiment(
        make_config({{"experiment", "free_packet"}, {"output_dir", out.string()}}));
    REQUIRE(dir == out / "free_packet");
    const auto rec = read_record(dir / "manifest.txt");
    REQUIRE(rec.at("status") == "ok");
    REQUIRE(rec.at("version") == std::string(kVersion));
    REQUIRE(value(rec, "result.max_rho_err") < 1e-5);
    REQUIRE(value(rec, "result.max_S_err") < 1e-12);
    REQUIRE(value(rec, "result.max_mass_drift") < 1e-12);
    const auto transport = csv_lines(dir / "transport.csv");
    REQUIRE(transport.size() == 258);  // header + 257 snapshots
    REQUIRE(transport[0] == "t,sup_rho_err,sup_S_err,mass_drift");
    REQUIRE(transport[1] == "0,0,0,0");  // t = 0 compares a field to itself
    REQUIRE(csv_lines(dir / "fields.csv").size() == 513);
  }
  SECTION("focusing curvature follows the contracting dilation") {
    const fs::path dir = run_experiment(make_config({{"experiment", "free_packet"},
                                                     {"output_dir", out.string()},
                                                     {"grid_points", "1024"},
                                                     {"extent", "6"},
                                                     {"x0", "0.5"},
                                                     {"p0", "0.2"},
                                                     {"s0_curvature", "-1"},
                                                     {"t_final", "0.6"},
                                                     {"steps", "1024"}}));
    const auto rec = read_record(dir / "manifest.txt");
    REQUIRE(rec.at("status") == "ok");
    REQUIRE(value(rec, "result.max_rho_err") < 1e-5);   // measured 2.5e-6
    REQUIRE(value(rec, "result.max_S_err") < 2e-5);     // measured 3.0e-6
    REQUIRE(value(rec, "result.max_mass_drift") < 1e-4);
  }
  SECTION("expanding curvature follows the widening dilation") {
    const fs::path dir = run_experiment(make_config({{"experiment", "free_packet"},
                                                     {"output_dir", out.string()},
                                                     {"x0", "-1"},
                                                     {"s0_curvature", "0.5"},
                                                     {"t_final", "1"},
                                                     {"steps", "160"}}));
    const auto rec = read_record(dir / "manifest.txt");
    REQUIRE(value(rec, "result.max_rho_err") < 1e-5);      // measured 2.1e-7
    REQUIRE(value(rec, "result.max_S_err") < 1e-9);        // measured 8.3e-12
    REQUIRE(value(rec, "result.max_mass_drift") < 1e-6);   // measured 7.7e-9
  }
}

TEST_CASE("experiment outputs are byte-identical across reruns") {
  const fs::path out = fresh_dir("determinism");

  SECTION("seeded randomized audit") {
    const ExperimentConfig cfg = make_config({{"experiment", "gass_property_audit"},
                                              {"output_dir", out.string()},
                                              {"seed", "7"},
                                              {"trials", "10"}});
    const fs::path dir = run_experiment(cfg);
    const std::string csv_first = slurp(dir / "properties.csv");
    const std::string record_first = slurp(dir / "manifest.txt");
    run_experiment(cfg);
    REQUIRE(slurp(dir / "properties.csv") == csv_first);
    REQUIRE(slurp(dir / "manifest.txt") == record_first);
    REQUIRE(csv_first.find("nan") == std::string::npos);
  }
  SECTION("deterministic matrix evolution") {
    const ExperimentConfig cfg = make_config(
        {{"experiment", "oscillator_correspondence"}, {"output_dir", out.string()}});
    const fs::path dir = run_experiment(cfg);
    const std::string csv_first = slurp(dir / "ehrenfest.csv");
    run_experiment(cfg);
    REQUIRE(slurp(dir / "ehrenfest.csv") == csv_first);
  }
}

TEST_CASE("oscillator correspondence tracks the classical flow") {
  const fs::path out = fresh_dir("oscillator");
  const fs::path dir = run_experiment(
      make_config({{"experiment", "oscillator_correspondence"}, {"output_dir", out.string()}}));
  const auto rec = read_record(dir / "manifest.txt");
  REQUIRE(rec.at("status") == "ok");
  REQUIRE(value(rec, "result.max_gap") < 1e-9);  // measured 4.6e-12
  REQUIRE(value(rec, "result.max_x_gap") <= value(rec, "result.max_gap"));
  const auto lines = csv_lines(dir / "ehrenfest.csv");
  REQUIRE(lines.size() == 34);
  REQUIRE(lines[0] == "t,x_quantum,p_quantum,x_classical,p_classical,x_gap,p_gap");
  const double t_last = std::strtod(lines.back().c_str(), nullptr);
  REQUIRE(std::abs(t_last - 2.0 * std::numbers::pi) < 1e-12);

  SECTION("frequency and mass rescale without losing the match") {
    const fs::path d2 = run_experiment(make_config({{"experiment", "oscillator_correspondence"},
                                                    {"output_dir", out.string()},
                                                    {"omega", "2"},
                                                    {"mass", "2"},
                                                    {"x0", "0.5"},
                                                    {"p0", "-0.3"}}));
    // the rescaled state breathes across more ladder rungs, so truncation
    // costs more than in the matched-frequency run; measured 5.3e-7
    REQUIRE(value(read_record(d2 / "manifest.txt"), "result.max_gap") < 1e-5);
  }
}

TEST_CASE("hbar sweep fits the quadratic contraction slope") {
  const fs::path out = fresh_dir("sweep");
  const fs::path dir = run_experiment(
      make_config({{"experiment", "hbar_sweep"}, {"output_dir", out.string()}}));
  const auto rec = read_record(dir / "manifest.txt");
  const double slope = value(rec, "result.slope");
  REQUIRE(slope > 1.9);
  REQUIRE(slope < 2.1);
  REQUIRE(value(rec, "result.residual_at_min_hbar") < 1e-6);
  const auto lines = csv_lines(dir / "sweep.csv");
  REQUIRE(lines.size() == 6);
  REQUIRE(lines[0] == "hbar,residual,slope_fit");
  double prev = 1e300;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto last_comma = lines[i].rfind(',');
    // the fitted slope is repeated verbatim on every row
    REQUIRE(lines[i].substr(last_comma + 1) == rec.at("result.slope"));
    const auto first_comma = lines[i].find(',');
    const double res = std::strtod(lines[i].c_str() + first_comma + 1, nullptr);
    REQUIRE(res < prev);
    prev = res;
  }
}

TEST_CASE("galilean audit shrinks with size and keeps the obstruction trace at zero") {
  const fs::path out = fresh_dir("galilean");
  const fs::path dir = run_experiment(
      make_config({{"experiment", "galilean_audit"}, {"output_dir", out.string()}}));
  const auto rec = read_record(dir / "manifest.txt");
  REQUIRE(value(rec, "result.max_residual_n64") < 1e-7);
  REQUIRE(value(rec, "result.max_residual_n128") < value(rec, "result.max_residual_n64"));
  REQUIRE(value(rec, "result.shrink_factor") > 4.0);  // measured 397
  REQUIRE(rec.at("result.trace_commutator_max") == "0");
  const auto lines = csv_lines(dir / "residuals.csv");
  REQUIRE(lines.size() == 25);  // header + 2 sizes x 2 states x 6 relations
  REQUIRE(lines[0] == "size,relation_id,state_id,residual");
  REQUIRE(lines[1].rfind("64,ccr,0,", 0) == 0);
}

TEST_CASE("gass audit covers every property at every dim and trial") {
  const fs::path out = fresh_dir("gass");
  const fs::path dir = run_experiment(make_config({{"experiment", "gass_property_audit"},
                                                   {"output_dir", out.string()},
                                                   {"dims", "2,3"},
                                                   {"trials", "5"},
                                                   {"seed", "3"}}));
  const auto rec = read_record(dir / "manifest.txt");
  REQUIRE(rec.at("status") == "ok");
  REQUIRE(value(rec, "result.max_residual") < 1e-11);
  for (const char* prop : {"two_form_closedness", "poisson_jacobi", "derivation_homomorphism",
                           "leibnitz_rule", "derivation_solve_agreement"})
    REQUIRE(rec.count("result.max_" + std::string(prop)) == 1);
  const auto lines = csv_lines(dir / "properties.csv");
  REQUIRE(lines.size() == 1 + 2 * (1 + 5 * 4));
  REQUIRE(lines[1].rfind("two_form_closedness,2,-1,", 0) == 0);
}

TEST_CASE("run records flag failures and echo the resolved configuration") {
  const fs::path out = fresh_dir("records");

  SECTION("failure status carries a single-line error") {
    write_run_record(out, "free_packet", {{"sigma", "1"}}, {{"partial", "yes"}}, "failed",
                     "boom\nsecond line");
    const auto rec = read_record(out / "manifest.txt");
    REQUIRE(rec.at("status") == "failed");
    REQUIRE(rec.at("error") == "boom second line");
    REQUIRE(rec.at("config.sigma") == "1");
    REQUIRE(rec.at("result.partial") == "yes");
    REQUIRE(rec.at("identities").find("hj_transport_closed_form") != std::string::npos);
  }
  SECTION("an unwritable output target is not a config error") {
    write_file(out, "blocker", "");
    const ExperimentConfig cfg = make_config(
        {{"experiment", "free_packet"}, {"output_dir", (out / "blocker" / "sub").string()}});
    try {
      run_experiment(cfg);
      FAIL("expected a failure");
    } catch (const ConfigError&) {
      FAIL("output problems must not map to config errors");
    } catch (const std::exception&) {
      SUCCEED();
    }
  }
  SECTION("defaults and overrides are echoed verbatim") {
    const fs::path dir = run_experiment(make_config({{"experiment", "free_packet"},
                                                     {"output_dir", out.string()},
                                                     {"sigma", "1.50"},
                                                     {"steps", "300"}}));
    const auto rec = read_record(dir / "manifest.txt");
    REQUIRE(rec.at("config.sigma") == "1.50");  // raw text, not reformatted
    REQUIRE(rec.at("config.steps") == "300");
    REQUIRE(rec.at("config.grid_points") == "512");  // default
    REQUIRE(rec.at("config.seed") == "1");
    REQUIRE(rec.at("experiment") == "free_packet");
  }
}
