#pragma once

// Experiment driver. A flat key=value config selects one of the bundled
// correspondence studies; a run writes its CSV tables plus a flat key=value
// run record under <output_dir>/<experiment_id>/. Identical config and seed
// reproduce every output byte: randomness enters only through the SplitMix64
// counter generator, all floats are printed with fmt17, and runs are
// single-threaded so writes never interleave.

#include <cctype>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ncham/algebra.hpp"
#include "ncham/dynamics.hpp"
#include "ncham/errors.hpp"
#include "ncham/galilean.hpp"
#include "ncham/hj_fluid.hpp"
#include "ncham/io.hpp"
#include "ncham/rng.hpp"
#include "ncham/symplectic.hpp"
#include "ncham/version.hpp"
#include "ncham/weyl_wigner.hpp"

namespace ncham {

/// One config entry plus where it came from ("file.cfg:12", "--set k=v",
/// "--out"), kept verbatim for error messages and the run record.
struct ConfigValue {
  std::string text;
  std::string origin;
};

struct ExperimentConfig {
  std::map<std::string, ConfigValue> entries;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool valid_config_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    const auto u = static_cast<unsigned char>(c);
    if (!(std::islower(u) || std::isdigit(u) || c == '_')) return false;
  }
  return true;
}

inline std::pair<std::string, std::string> split_assignment(const std::string& line,
                                                            const std::string& origin) {
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError(origin + ": expected key=value, got '" + line + "'");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  if (!valid_config_key(key))
    throw ConfigError(origin + ": invalid key '" + key +
                      "' (lowercase letters, digits, underscores)");
  return {key, value};
}

/// Compact %g formatting for range bounds in error messages.
inline std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string origin = path + ":" + std::to_string(lineno);
    auto [key, value] = detail::split_assignment(line, origin);
    if (auto it = cfg.entries.find(key); it != cfg.entries.end())
      throw ConfigError(origin + ": duplicate key '" + key + "' (first set at " +
                        it->second.origin + ")");
    cfg.entries[key] = ConfigValue{value, origin};
  }
  return cfg;
}

/// `--set key=value` wins over the file and over earlier overrides.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const std::string origin = "--set " + detail::trim(assignment);
  auto [key, value] = detail::split_assignment(detail::trim(assignment), origin);
  cfg.entries[key] = ConfigValue{value, origin};
}

/// Typed view over a config. Getters validate ranges, record the consumed
/// text for the run-record echo, and finish() rejects leftover keys so a
/// typo never falls back to a default silently.
class ConfigReader {
 public:
  explicit ConfigReader(const ExperimentConfig& cfg) : cfg_(cfg) {}

  std::string text(const std::string& key, const std::string& fallback) {
    std::string v = fallback;
    if (auto it = cfg_.entries.find(key); it != cfg_.entries.end()) v = it->second.text;
    note(key, v);
    return v;
  }

  double number(const std::string& key, double fallback, double lo, double hi) {
    double v = fallback;
    std::string shown = fmt17(fallback);
    if (auto it = cfg_.entries.find(key); it != cfg_.entries.end()) {
      v = to_double(it->second, key);
      check_range(it->second, key, v, lo, hi);
      shown = it->second.text;
    }
    note(key, shown);
    return v;
  }

  int integer(const std::string& key, int fallback, int lo, int hi) {
    int v = fallback;
    std::string shown = std::to_string(fallback);
    if (auto it = cfg_.entries.find(key); it != cfg_.entries.end()) {
      const long long raw = to_int(it->second, key);
      if (raw < lo || raw > hi)
        throw ConfigError(it->second.origin + ": " + key + " = " + it->second.text +
                          " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      v = static_cast<int>(raw);
      shown = it->second.text;
    }
    note(key, shown);
    return v;
  }

  std::uint64_t counter(const std::string& key, std::uint64_t fallback) {
    std::uint64_t v = fallback;
    std::string shown = std::to_string(fallback);
    if (auto it = cfg_.entries.find(key); it != cfg_.entries.end()) {
      const std::string& t = it->second.text;
      if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(it->second.origin + ": " + key + " = '" + t +
                          "' is not an unsigned integer");
      errno = 0;
      v = std::strtoull(t.c_str(), nullptr, 10);
      if (errno == ERANGE)
        throw ConfigError(it->second.origin + ": " + key + " = " + t + " overflows 64 bits");
      shown = t;
    }
    note(key, shown);
    return v;
  }

  std::vector<double> number_list(const std::string& key, const std::string& fallback,
                                  double lo, double hi) {
    ConfigValue cv{fallback, "default"};
    if (auto it = cfg_.entries.find(key); it != cfg_.entries.end()) cv = it->second;
    std::vector<double> out;
    for (const std::string& piece : split_list(cv, key)) {
      const ConfigValue elem{piece, cv.origin};
      const double v = to_double(elem, key);
      check_range(elem, key, v, lo, hi);
      out.push_back(v);
    }
    note(key, cv.text);
    return out;
  }

  std::vector<int> integer_list(const std::string& key, const std::string& fallback, int lo,
                                int hi) {
    ConfigValue cv{fallback, "default"};
    if (auto it = cfg_.entries.find(key); it != cfg_.entries.end()) cv = it->second;
    std::vector<int> out;
    for (const std::string& piece : split_list(cv, key)) {
      const long long v = to_int(ConfigValue{piece, cv.origin}, key);
      if (v < lo || v > hi)
        throw ConfigError(cv.origin + ": " + key + " entry " + piece + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
      out.push_back(static_cast<int>(v));
    }
    note(key, cv.text);
    return out;
  }

  /// Rejects any key the experiment never asked for.
  void finish() const {
    for (const auto& [key, cv] : cfg_.entries) {
      if (consumed_.count(key)) continue;
      std::string id = "?";
      if (auto it = echo_.find("experiment"); it != echo_.end()) id = it->second;
      throw ConfigError(cv.origin + ": unknown key '" + key + "' for experiment '" + id + "'");
    }
  }

  const std::map<std::string, std::string>& echo() const { return echo_; }

 private:
  void note(const std::string& key, const std::string& shown) {
    consumed_.insert(key);
    echo_[key] = shown;
  }

  static double to_double(const ConfigValue& cv, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(cv.text.c_str(), &end);
    if (cv.text.empty() || end != cv.text.c_str() + cv.text.size() || !std::isfinite(v))
      throw ConfigError(cv.origin + ": " + key + " = '" + cv.text +
                        "' is not a finite number");
    return v;
  }

  static long long to_int(const ConfigValue& cv, const std::string& key) {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(cv.text.c_str(), &end, 10);
    if (cv.text.empty() || end != cv.text.c_str() + cv.text.size() || errno == ERANGE)
      throw ConfigError(cv.origin + ": " + key + " = '" + cv.text + "' is not an integer");
    return v;
  }

  static void check_range(const ConfigValue& cv, const std::string& key, double v, double lo,
                          double hi) {
    if (!(v >= lo && v <= hi))
      throw ConfigError(cv.origin + ": " + key + " = " + cv.text + " outside [" +
                        detail::brief(lo) + ", " + detail::brief(hi) + "]");
  }

  static std::vector<std::string> split_list(const ConfigValue& cv, const std::string& key) {
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (true) {
      const auto comma = cv.text.find(',', start);
      const std::string piece =
          detail::trim(cv.text.substr(start, comma == std::string::npos ? comma : comma - start));
      if (piece.empty())
        throw ConfigError(cv.origin + ": " + key + " must be a nonempty comma-separated list");
      pieces.push_back(piece);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return pieces;
  }

  const ExperimentConfig& cfg_;
  std::set<std::string> consumed_;
  std::map<std::string, std::string> echo_;
};

using RunResults = std::vector<std::pair<std::string, std::string>>;

namespace detail {

/// The structural identities a run exercises, recorded in the run record so
/// downstream tooling can tell which checks a table certifies.
inline const char* experiment_identities(const std::string& id) {
  if (id == "oscillator_correspondence")
    return "ehrenfest_quadratic_match,heisenberg_flow_vs_classical_flow";
  if (id == "free_packet") return "hj_transport_closed_form,continuity_mass_conservation";
  if (id == "hbar_sweep")
    return "star_product_second_order_contraction,moyal_to_poisson_limit";
  if (id == "galilean_audit")
    return "ccr,boost_position,momentum_boost,hamiltonian_boost,hamiltonian_position,"
           "hamiltonian_momentum,trace_commutator_obstruction";
  return "two_form_closedness,poisson_jacobi,derivation_homomorphism,leibnitz_rule,"
         "derivation_solve_agreement";
}

inline std::string single_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace detail

inline void write_run_record(const std::filesystem::path& dir, const std::string& id,
                             const std::map<std::string, std::string>& echo,
                             const RunResults& results, const std::string& status,
                             const std::string& error) {
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw NumericsError("run record: cannot write " + (dir / "manifest.txt").string());
  m << "experiment=" << id << '\n';
  m << "version=" << kVersion << '\n';
  m << "status=" << status << '\n';
  m << "identities=" << detail::experiment_identities(id) << '\n';
  if (!error.empty()) m << "error=" << detail::single_line(error) << '\n';
  for (const auto& [k, v] : echo) m << "config." << k << '=' << v << '\n';
  for (const auto& [k, v] : results) m << "result." << k << '=' << v << '\n';
}

namespace detail {

/// Coherent-state expectation of X and P against the leapfrog-free classical
/// flow, sampled on a shared time ladder. Quadratic Hamiltonians make the
/// two columns agree to truncation error.
inline void run_oscillator_correspondence(ConfigReader& r, const std::filesystem::path& dir,
                                          RunResults& out, std::uint64_t) {
  const double hbar = r.number("hbar", 1.0, 1e-6, 1e3);
  const double mass = r.number("mass", 1.0, 1e-6, 1e3);
  const double omega = r.number("omega", 1.0, 1e-3, 1e3);
  const int levels = r.integer("levels", 48, 8, 512);
  const double x0 = r.number("x0", 1.0, -10.0, 10.0);
  const double p0 = r.number("p0", 0.5, -10.0, 10.0);
  const double periods = r.number("periods", 1.0, 1e-3, 100.0);
  const int samples = r.integer("samples", 33, 2, 100001);
  const int substeps = r.integer("substeps", 64, 1, 4096);
  const Complex alpha(x0 * std::sqrt(mass / (2.0 * hbar)), p0 / std::sqrt(2.0 * mass * hbar));
  // Truncation headroom: the coherent tail must die out well below the top
  // ladder rung, with margin for the frequency mismatch against the rep.
  const double occupancy = std::norm(alpha) * std::max(omega, 1.0 / omega);
  if (occupancy > levels / 8.0)
    throw ConfigError("config: displacement too large for the truncation (needs levels >= " +
                      brief(8.0 * occupancy) + "); raise levels or shrink x0/p0");
  r.finish();
  std::filesystem::create_directories(dir);

  const TruncatedRep rep = build_rep(RepMode::kOscillator, levels, 0.0, hbar, mass);
  const GAHS sys = standard_quantum_gahs(
      (rep.P * rep.P / (2.0 * mass) + 0.5 * mass * omega * omega * rep.X * rep.X).eval(), hbar);
  const StateVector psi = coherent_state(rep, alpha);
  const auto times = uniform_times(0.0, periods * 2.0 * std::numbers::pi / omega, samples);
  const Trajectory xt = heisenberg_evolve(sys, rep.X, times);
  const Trajectory pt = heisenberg_evolve(sys, rep.P, times);

  ClassicalHamiltonianSystem osc{
      1,
      [mass, omega](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        return p.squaredNorm() / (2.0 * mass) + 0.5 * mass * omega * omega * q.squaredNorm();
      },
      [mass, omega](const Eigen::VectorXd& q, const Eigen::VectorXd&) -> Eigen::VectorXd {
        return mass * omega * omega * q;
      },
      [mass](const Eigen::VectorXd&, const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return p / mass;
      },
      false};
  const PhasePoint z0{Eigen::VectorXd::Constant(1, x0), Eigen::VectorXd::Constant(1, p0)};
  const PhaseTrajectory cl = classical_evolve(osc, z0, times, substeps);

  const auto expect = [&psi](const AlgebraElement& a) {
    return ((psi.adjoint() * (a * psi))(0, 0)).real();
  };
  std::ofstream csv(dir / "ehrenfest.csv");
  csv << "t,x_quantum,p_quantum,x_classical,p_classical,x_gap,p_gap\n";
  double worst_x = 0.0, worst_p = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double xq = expect(xt.values[i]), pq = expect(pt.values[i]);
    const double xc = cl.values[i].q[0], pc = cl.values[i].p[0];
    const double gx = std::abs(xq - xc), gp = std::abs(pq - pc);
    worst_x = std::max(worst_x, gx);
    worst_p = std::max(worst_p, gp);
    csv << fmt17(times[i]) << ',' << fmt17(xq) << ',' << fmt17(pq) << ',' << fmt17(xc) << ','
        << fmt17(pc) << ',' << fmt17(gx) << ',' << fmt17(gp) << '\n';
  }
  out.emplace_back("max_x_gap", fmt17(worst_x));
  out.emplace_back("max_p_gap", fmt17(worst_p));
  out.emplace_back("max_gap", fmt17(std::max(worst_x, worst_p)));
}

/// Free-stream transport of a Gaussian density under the classical pair,
/// checked against the exact translation-dilation solution for initial
/// action p0 x + c x^2 / 2. A focusing curvature (c < 0) folds every
/// characteristic into the focal point at t = m/|c|; the run must stop
/// before that, since past the fold the single-valued solution no longer
/// exists and nothing is left to certify against.
inline void run_free_packet(ConfigReader& r, const std::filesystem::path& dir, RunResults& out,
                            std::uint64_t) {
  const int n = r.integer("grid_points", 512, 16, 4096);
  const double extent = r.number("extent", 12.0, 1.0, 1e3);
  const double sigma = r.number("sigma", 1.0, 0.05, 100.0);
  const double x0 = r.number("x0", -3.0, -50.0, 50.0);
  const double p0 = r.number("p0", 1.0, -100.0, 100.0);
  const double curvature = r.number("s0_curvature", 0.0, -5.0, 5.0);
  const double mass = r.number("mass", 1.0, 1e-6, 1e3);
  const double t_final = r.number("t_final", 2.0, 1e-6, 100.0);
  const int steps = r.integer("steps", 256, 1, 100000);

  const SpatialGrid grid = make_spatial_grid(n, extent);
  const double scale_end = 1.0 + curvature * t_final / mass;
  if (curvature < 0.0 && t_final > 0.9 * mass / -curvature)
    throw ConfigError("config: t_final crosses the focal time " +
                      detail::brief(mass / -curvature) +
                      " of the focusing action; shrink t_final or s0_curvature");
  const double dt = t_final / steps;
  // Worst-case advective speed over the run: the velocity field of the
  // dilation flow steepens by 1/scale as a focusing packet contracts.
  const double scale_min = std::min(1.0, scale_end);
  const double v_max = (std::abs(p0) + std::abs(curvature) * extent / scale_min) / mass;
  if (v_max * dt / grid.dx() > 1.25)
    throw ConfigError("config: time step violates the advective stability bound (max |v| dt/dx = " +
                      detail::brief(v_max * dt / grid.dx()) + " > 1.25); raise steps");
  if (sigma * scale_min < 3.0 * grid.dx())
    throw ConfigError("config: packet width " + detail::brief(sigma * scale_min) +
                      " is under-resolved (below 3 dx); raise grid_points");
  if (std::abs(x0) + 5.0 * sigma > extent)
    throw ConfigError("config: initial packet does not fit the box; enlarge extent");
  if (std::abs(x0 * scale_end + p0 * t_final / mass) + 5.0 * sigma * scale_end > extent)
    throw ConfigError("config: packet reaches the boundary before t_final; enlarge extent or "
                      "shrink t_final");
  r.finish();
  std::filesystem::create_directories(dir);

  const auto gauss = [&grid](double mu, double s) {
    Eigen::VectorXd g(grid.n);
    for (int j = 0; j < grid.n; ++j) {
      const double z = (grid.x(j) - mu) / s;
      g[j] = std::exp(-0.5 * z * z);
    }
    g /= g.sum() * grid.dx();
    return g;
  };
  Eigen::VectorXd S0(grid.n);
  for (int j = 0; j < grid.n; ++j)
    S0[j] = p0 * grid.x(j) + 0.5 * curvature * grid.x(j) * grid.x(j);
  const ClassicalHJState init =
      make_classical_state(grid, gauss(x0, sigma), S0, mass, [](double) { return 0.0; });
  const auto times = uniform_times(0.0, t_final, steps + 1);
  const auto seq = hj_evolve(init, times);

  const double mass0 = seq.front().rho.sum() * grid.dx();
  std::ofstream csv(dir / "transport.csv");
  csv << "t,sup_rho_err,sup_S_err,mass_drift\n";
  double worst_rho = 0.0, worst_s = 0.0, worst_mass = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double t = times[i];
    const double scale = 1.0 + curvature * t / mass;
    const double mu = x0 * scale + p0 * t / mass;
    const Eigen::VectorXd rho_ref = gauss(mu, sigma * scale);
    double er = 0.0, es = 0.0;
    for (int j = 0; j < grid.n; ++j) {
      const double u = grid.x(j) - p0 * t / mass;
      const double s_ref =
          p0 * (grid.x(j) - 0.5 * p0 * t / mass) + 0.5 * curvature * u * u / scale;
      er = std::max(er, std::abs(seq[i].rho[j] - rho_ref[j]));
      // The action is certified where the density lives; near the box edges
      // the one-sided stencils cannot track a steep quadratic tail and the
      // comparison would only measure that.
      if (std::abs(grid.x(j) - mu) <= 5.0 * sigma * scale)
        es = std::max(es, std::abs(seq[i].S[j] - s_ref));
    }
    const double em = std::abs(seq[i].rho.sum() * grid.dx() - mass0);
    worst_rho = std::max(worst_rho, er);
    worst_s = std::max(worst_s, es);
    worst_mass = std::max(worst_mass, em);
    csv << fmt17(t) << ',' << fmt17(er) << ',' << fmt17(es) << ',' << fmt17(em) << '\n';
  }
  std::ofstream fields(dir / "fields.csv");
  fields << "x,rho,S\n";
  for (int j = 0; j < grid.n; ++j)
    fields << fmt17(grid.x(j)) << ',' << fmt17(seq.back().rho[j]) << ','
           << fmt17(seq.back().S[j]) << '\n';
  out.emplace_back("max_rho_err", fmt17(worst_rho));
  out.emplace_back("max_S_err", fmt17(worst_s));
  out.emplace_back("max_mass_drift", fmt17(worst_mass));
}

/// Residual of the star product against the Poisson correction across a
/// decreasing hbar ladder on a fixed (non Fourier-dual) grid, with the
/// log-log slope of the fit reported; second-order contraction lands the
/// slope near 2.
inline void run_hbar_sweep(ConfigReader& r, const std::filesystem::path& dir, RunResults& out,
                           std::uint64_t) {
  const int n = r.integer("grid_points", 64, 16, 256);
  const double extent = r.number("extent", 6.0, 1.0, 100.0);
  const auto hbars = r.number_list("hbars", "1e-1,3e-2,1e-2,3e-3,1e-3", 1e-8, 10.0);
  if (hbars.size() < 3)
    throw ConfigError("config: hbars needs at least 3 entries for a slope fit");
  for (std::size_t i = 1; i < hbars.size(); ++i)
    if (!(hbars[i] < hbars[i - 1]))
      throw ConfigError("config: hbars must strictly decrease");
  r.finish();
  std::filesystem::create_directories(dir);

  std::vector<double> residuals;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const double hb : hbars) {
    const PhaseSpaceGrid g = make_grid(n, n, extent, extent, hb);
    const WignerField f = field_from_function(g, [](double x, double p) {
      return Complex(std::exp(-0.5 * ((x - 0.5) * (x - 0.5) + (p - 0.3) * (p - 0.3))));
    });
    const WignerField h = field_from_function(g, [](double x, double p) {
      return Complex(std::exp(-((x + 0.4) * (x + 0.4) + (p - 0.6) * (p - 0.6)) / 1.5));
    });
    const double res = semiclassical_expansion_residual(f, h);
    residuals.push_back(res);
    sx += std::log(hb);
    sy += std::log(res);
    sxx += std::log(hb) * std::log(hb);
    sxy += std::log(hb) * std::log(res);
  }
  const auto count = static_cast<double>(hbars.size());
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);

  std::ofstream csv(dir / "sweep.csv");
  csv << "hbar,residual,slope_fit\n";
  for (std::size_t i = 0; i < hbars.size(); ++i)
    csv << fmt17(hbars[i]) << ',' << fmt17(residuals[i]) << ',' << fmt17(slope) << '\n';
  out.emplace_back("slope", fmt17(slope));
  out.emplace_back("residual_at_min_hbar", fmt17(residuals.back()));
}

/// Kinematic relation residuals (canonical pair, boost, free flow) for the
/// truncated grid representation at a ladder of sizes, plus the finite-rank
/// obstruction trace and the shrink factor between consecutive sizes.
inline void run_galilean_audit(ConfigReader& r, const std::filesystem::path& dir,
                               RunResults& out, std::uint64_t) {
  const auto sizes = r.integer_list("sizes", "64,128", 16, 512);
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw ConfigError("config: sizes must strictly increase");
  const double extent = r.number("extent", 8.0, 2.0, 100.0);
  const double hbar = r.number("hbar", 1.0, 1e-3, 1e3);
  const double mass = r.number("mass", 1.0, 1e-3, 1e3);
  const double sigma = r.number("sigma", 0.45, 0.01, 10.0);
  const double boost_time = r.number("boost_time", 0.7, 0.0, 10.0);
  if (sigma > extent / 4.0)
    throw ConfigError("config: sigma too wide for the box; shrink sigma or enlarge extent");
  r.finish();
  std::filesystem::create_directories(dir);

  std::ofstream csv(dir / "residuals.csv");
  csv << "size,relation_id,state_id,residual\n";
  std::vector<double> worst;
  double trace_worst = 0.0;
  for (const int size : sizes) {
    const TruncatedRep rep = build_rep(RepMode::kGrid, size, extent, hbar, mass);
    const std::vector<StateVector> states = {grid_gaussian(rep, 0.3, 1.1, sigma),
                                             grid_gaussian(rep, -1.0, -0.4, sigma)};
    GalileanReport report = verify_ccr(rep, states);
    const GalileanGenerators gen = make_galilean_generators(rep);
    const GalileanReport boost = verify_boost_and_free_hamiltonian(gen, boost_time, states);
    report.rows.insert(report.rows.end(), boost.rows.begin(), boost.rows.end());
    for (const auto& row : report.rows)
      csv << size << ',' << row.relation << ',' << row.state << ',' << fmt17(row.residual)
          << '\n';
    worst.push_back(report.max_residual());
    trace_worst = std::max(trace_worst, std::abs((rep.X * rep.P - rep.P * rep.X).trace()));
    out.emplace_back("max_residual_n" + std::to_string(size), fmt17(worst.back()));
  }
  if (sizes.size() > 1) {
    double shrink = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < worst.size(); ++i)
      shrink = std::min(shrink, worst[i - 1] / worst[i]);
    out.emplace_back("shrink_factor", fmt17(shrink));
  }
  out.emplace_back("trace_commutator_max", fmt17(trace_worst));
}

/// Randomized structure checks for the quantum symplectic form: closedness
/// of the two-form, the Jacobi identity, the bracket-to-derivation
/// homomorphism, the Leibnitz rule, and agreement between the analytic and
/// linear-solve derivation routes.
inline void run_gass_property_audit(ConfigReader& r, const std::filesystem::path& dir,
                                    RunResults& out, std::uint64_t seed) {
  const auto dims = r.integer_list("dims", "3,4", 2, 8);
  for (std::size_t i = 1; i < dims.size(); ++i)
    if (dims[i] <= dims[i - 1]) throw ConfigError("config: dims must strictly increase");
  const int trials = r.integer("trials", 25, 1, 10000);
  const double hbar = r.number("hbar", 1.0, 1e-3, 1e3);
  r.finish();
  std::filesystem::create_directories(dir);

  SplitMix64 rng(seed);
  std::ofstream csv(dir / "properties.csv");
  csv << "property,dim,trial,residual\n";
  std::map<std::string, double> prop_worst;
  const auto note = [&csv, &prop_worst](const std::string& prop, int dim, int trial, double v) {
    csv << prop << ',' << dim << ',' << trial << ',' << fmt17(v) << '\n';
    prop_worst[prop] = std::max(prop_worst[prop], v);
  };
  for (const int dim : dims) {
    const QuantumSymplectic q = quantum_symplectic(standard_ads(dim), hbar);
    note("two_form_closedness", dim, -1, closedness_residual(q.gass));
    const auto pb = [&q](const AlgebraElement& u, const AlgebraElement& v) {
      return poisson_bracket(q.gass, u, v);
    };
    for (int trial = 0; trial < trials; ++trial) {
      const AlgebraElement a = random_traceless(rng, dim);
      const AlgebraElement b = random_traceless(rng, dim);
      const AlgebraElement c = random_matrix(rng, dim);
      const AlgebraElement probe = random_matrix(rng, dim);
      note("poisson_jacobi", dim, trial,
           (pb(a, pb(b, c)) + pb(b, pb(c, a)) + pb(c, pb(a, b))).cwiseAbs().maxCoeff());
      const Derivation ya = hamiltonian_derivation(q.gass, a);
      const Derivation yb = hamiltonian_derivation(q.gass, b);
      const Derivation yab = hamiltonian_derivation(q.gass, pb(a, b));
      note("derivation_homomorphism", dim, trial,
           (yab(probe) - (ya(yb(probe)) - yb(ya(probe)))).cwiseAbs().maxCoeff());
      note("leibnitz_rule", dim, trial,
           (pb(a, b * c) - (pb(a, b) * c + b * pb(a, c))).cwiseAbs().maxCoeff());
      const Derivation solved = hamiltonian_derivation_solve(q.gass, a);
      note("derivation_solve_agreement", dim, trial,
           (ya(probe) - solved(probe)).cwiseAbs().maxCoeff());
    }
  }
  double overall = 0.0;
  for (const auto& [prop, v] : prop_worst) {
    out.emplace_back("max_" + prop, fmt17(v));
    overall = std::max(overall, v);
  }
  out.emplace_back("max_residual", fmt17(overall));
}

}  // namespace detail

struct ExperimentInfo {
  const char* id;
  const char* summary;
  void (*run)(ConfigReader&, const std::filesystem::path&, RunResults&, std::uint64_t);
};

inline const std::vector<ExperimentInfo>& experiment_table() {
  static const std::vector<ExperimentInfo> table = {
      {"oscillator_correspondence",
       "coherent-state Ehrenfest match against the classical oscillator flow",
       detail::run_oscillator_correspondence},
      {"free_packet", "classical transport of a Gaussian packet against the exact solution",
       detail::run_free_packet},
      {"hbar_sweep", "star-product correction residuals and their log-log slope fit",
       detail::run_hbar_sweep},
      {"galilean_audit", "kinematic relation residuals for truncated grid representations",
       detail::run_galilean_audit},
      {"gass_property_audit", "randomized structure checks for the quantum symplectic form",
       detail::run_gass_property_audit},
  };
  return table;
}

/// Runs the experiment the config names. Config problems throw ConfigError
/// before anything is written; numeric failures mid-run keep whatever tables
/// already exist and flag the run record with status=failed before
/// rethrowing.
inline std::filesystem::path run_experiment(const ExperimentConfig& cfg) {
  ConfigReader r(cfg);
  const std::string id = r.text("experiment", "");
  if (id.empty())
    throw ConfigError(
        "config: missing required key 'experiment'; run `ncham list` for the available ids");
  const ExperimentInfo* info = nullptr;
  for (const auto& e : experiment_table())
    if (id == e.id) info = &e;
  if (!info)
    throw ConfigError(cfg.entries.at("experiment").origin + ": unknown experiment '" + id +
                      "'; run `ncham list` for the available ids");
  const std::uint64_t seed = r.counter("seed", 1);
  const std::filesystem::path dir = std::filesystem::path(r.text("output_dir", "runs")) / id;
  RunResults results;
  try {
    info->run(r, dir, results, seed);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_run_record(dir, id, r.echo(), results, "failed", e.what());
    throw;
  }
  write_run_record(dir, id, r.echo(), results, "ok", "");
  return dir;
}

}  // namespace ncham
