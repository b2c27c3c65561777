// cautious-opt: scenario-driven front end for set-valued regression, worst-case
// bounds, one-shot cautious minimization and online runs.

#include <CLI11.hpp>
#include <json.hpp>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cautious/cautious.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cautious;

namespace {

enum class Format { human, csv, json_lines };

struct SolverConfig {
  double solver_tol = tol::kSolver;
  int max_outer = 50;
  int max_inner = 50;
  int fw_max_iters = 500;
  double fw_gap_tol = tol::kFrankWolfe;
};

struct OracleConfig {
  std::string kind;
  Vector gamma_hat;
  NoiseMode mode = NoiseMode::uniform;
  std::optional<Vector> w_bar;
  fs::path path;
};

struct ScenarioConfig {
  fs::path source;
  int dimension = 0;
  std::vector<BasisPrimitive> basis;
  std::optional<double> ball_q;
  Matrix pi;
  std::vector<Vector> stencil;
  Vector z0;
  int iterations = 100;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  OracleConfig oracle;
  std::optional<fs::path> output_dir;
  std::optional<std::vector<Vector>> polytope;
  std::vector<Vector> initial_conditions;
  std::optional<std::size_t> max_members;
  SolverConfig solver;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  Format format = Format::human;
  int jobs = 1;
  bool force = false;
};

std::string num(double x) { return fmt::format("{:.17g}", x); }

std::string join(const Vector& v, const char* sep = ",") {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += num(v(i));
  }
  return out;
}

std::string tuple(const Vector& v) { return "(" + join(v, ", ") + ")"; }

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// ---- configuration --------------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end()) {
      throw ConfigError(where + ": unknown field '" + key + "'");
    }
  }
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

Vector as_vector(const json& j, const std::string& where, Eigen::Index size = -1) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], where + "[" + std::to_string(i) + "]");
  }
  if (size >= 0 && v.size() != size) {
    throw ConfigError(where + ": expected length " + std::to_string(size) + ", got " +
                      std::to_string(v.size()));
  }
  return v;
}

std::vector<Vector> as_points(const json& j, const std::string& where, Eigen::Index dim) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty list of points");
  std::vector<Vector> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_vector(j[i], where + "[" + std::to_string(i) + "]", dim));
  }
  return out;
}

BasisPrimitive parse_primitive(const json& j, int n, const std::string& where) {
  if (j.is_string()) return parse_primitive(json{{"kind", j}}, n, where);
  const std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "constant") {
    check_keys(j, {"kind"}, where);
    return basis::Constant{};
  }
  if (kind == "coordinate") {
    check_keys(j, {"kind", "index"}, where);
    return basis::Coordinate{as_int(require(j, "index", where), where + ".index")};
  }
  if (kind == "monomial") {
    check_keys(j, {"kind", "exponents"}, where);
    const json& e = require(j, "exponents", where);
    if (!e.is_array()) throw ConfigError(where + ".exponents: expected an array");
    std::vector<int> exps;
    for (const auto& x : e) exps.push_back(as_int(x, where + ".exponents"));
    return basis::Monomial{exps};
  }
  if (kind == "squared_norm") {
    check_keys(j, {"kind"}, where);
    return basis::SquaredNorm{};
  }
  if (kind == "gaussian") {
    check_keys(j, {"kind", "center", "width"}, where);
    return basis::Gaussian{as_vector(require(j, "center", where), where + ".center", n),
                           as_number(require(j, "width", where), where + ".width")};
  }
  throw ConfigError(where + ": unknown basis kind '" + kind + "'");
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  check_keys(j, {"dimension", "basis", "noise", "stencil", "z0", "iterations", "seed", "lambda",
                 "oracle", "output_dir", "polytope", "initial_conditions", "max_members", "solver"},
             "config");
  ScenarioConfig c;
  c.source = path;
  try {
    c.dimension = as_int(require(j, "dimension", "config"), "dimension");
    if (c.dimension < 1) throw ConfigError("dimension must be >= 1");
    const int n = c.dimension;

    const json& b = require(j, "basis", "config");
    if (b.is_string() && b.get<std::string>() == "quadratic") {
      c.basis = quadratic_basis(n).functions();
    } else if (b.is_array()) {
      for (std::size_t i = 0; i < b.size(); ++i) {
        c.basis.push_back(parse_primitive(b[i], n, "basis[" + std::to_string(i) + "]"));
      }
    } else {
      throw ConfigError("basis: expected a list of primitives or \"quadratic\"");
    }

    c.stencil = as_points(require(j, "stencil", "config"), "stencil", n);
    const auto t = static_cast<Eigen::Index>(c.stencil.size());

    const json& noise = require(j, "noise", "config");
    const std::string nk = require(noise, "kind", "noise").get<std::string>();
    if (nk == "ball") {
      check_keys(noise, {"kind", "q"}, "noise");
      c.ball_q = as_number(require(noise, "q", "noise"), "noise.q");
      if (!(*c.ball_q >= 0.0)) throw ConfigError("noise.q must be >= 0");
    } else if (nk == "matrix") {
      check_keys(noise, {"kind", "pi"}, "noise");
      const json& rows = require(noise, "pi", "noise");
      if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != t + 1) {
        throw ConfigError("noise.pi must have T+1 = " + std::to_string(t + 1) + " rows");
      }
      c.pi.resize(t + 1, t + 1);
      for (Eigen::Index r = 0; r <= t; ++r) {
        c.pi.row(r) = as_vector(rows[static_cast<std::size_t>(r)], "noise.pi", t + 1).transpose();
      }
    } else {
      throw ConfigError("noise.kind must be \"ball\" or \"matrix\"");
    }

    c.z0 = as_vector(require(j, "z0", "config"), "z0", n);
    if (j.contains("iterations")) {
      c.iterations = as_int(j["iterations"], "iterations");
      if (c.iterations < 0) throw ConfigError("iterations must be >= 0");
    }
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected an unsigned integer");
      c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("lambda")) {
      c.lambda = as_number(j["lambda"], "lambda");
      if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    }

    const json& o = require(j, "oracle", "config");
    c.oracle.kind = require(o, "kind", "oracle").get<std::string>();
    if (c.oracle.kind == "synthetic") {
      check_keys(o, {"kind", "gamma_hat", "noise_mode", "w_bar"}, "oracle");
      c.oracle.gamma_hat = as_vector(require(o, "gamma_hat", "oracle"), "oracle.gamma_hat",
                                     static_cast<Eigen::Index>(c.basis.size()));
      const std::string mode = o.value("noise_mode", std::string("uniform"));
      if (mode == "uniform") {
        c.oracle.mode = NoiseMode::uniform;
      } else if (mode == "constant") {
        c.oracle.mode = NoiseMode::constant;
      } else if (mode == "zero") {
        c.oracle.mode = NoiseMode::zero;
      } else {
        throw ConfigError("oracle.noise_mode must be uniform, constant or zero");
      }
      if (o.contains("w_bar")) c.oracle.w_bar = as_vector(o["w_bar"], "oracle.w_bar", t);
    } else if (c.oracle.kind == "replay") {
      check_keys(o, {"kind", "path"}, "oracle");
      fs::path p = require(o, "path", "oracle").get<std::string>();
      c.oracle.path = p.is_absolute() ? p : path.parent_path() / p;
    } else {
      throw ConfigError("oracle.kind must be \"synthetic\" or \"replay\"");
    }

    if (j.contains("output_dir")) c.output_dir = fs::path(j["output_dir"].get<std::string>());
    if (j.contains("polytope")) c.polytope = as_points(j["polytope"], "polytope", n);
    c.initial_conditions = j.contains("initial_conditions")
                               ? as_points(j["initial_conditions"], "initial_conditions", n)
                               : std::vector<Vector>{c.z0};
    if (j.contains("max_members")) {
      const int m = as_int(j["max_members"], "max_members");
      if (m < 1) throw ConfigError("max_members must be >= 1");
      c.max_members = static_cast<std::size_t>(m);
    }
    if (j.contains("solver")) {
      const json& s = j["solver"];
      check_keys(s, {"tolerance", "max_outer", "max_inner", "fw_max_iters", "fw_gap_tol"}, "solver");
      if (s.contains("tolerance")) c.solver.solver_tol = as_number(s["tolerance"], "solver.tolerance");
      if (s.contains("max_outer")) c.solver.max_outer = as_int(s["max_outer"], "solver.max_outer");
      if (s.contains("max_inner")) c.solver.max_inner = as_int(s["max_inner"], "solver.max_inner");
      if (s.contains("fw_max_iters")) c.solver.fw_max_iters = as_int(s["fw_max_iters"], "solver.fw_max_iters");
      if (s.contains("fw_gap_tol")) c.solver.fw_gap_tol = as_number(s["fw_gap_tol"], "solver.fw_gap_tol");
      if (!(c.solver.solver_tol > 0.0) || !(c.solver.fw_gap_tol > 0.0) || c.solver.max_outer < 1 ||
          c.solver.max_inner < 1 || c.solver.fw_max_iters < 0) {
        throw ConfigError("solver: tolerances must be positive and iteration limits valid");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

/// Objects built from a config that every command needs.
struct Scenario {
  BasisSet basis;
  SampleStencil stencil;
  SymQuadSet noise;
};

Scenario build_scenario(const ScenarioConfig& c) {
  std::optional<BasisSet> basis;
  try {
    basis.emplace(c.dimension, c.basis);
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("basis: ") + e.what());
  }
  SampleStencil stencil(c.stencil);
  const auto t = stencil.size();
  SymQuadSet noise;
  if (c.ball_q) {
    noise = ball_noise(*c.ball_q, t);
  } else {
    try {
      noise = SymQuadSet(c.pi);
    } catch (const ShapeError& e) {
      throw ConfigError(std::string("noise.pi: ") + e.what());
    }
  }
  check_noise_model(noise);
  return {std::move(*basis), std::move(stencil), std::move(noise)};
}

/// Per-trial RNG stream from (seed, trial) through std::seed_seq.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Rows of numbers from a CSV file; a non-numeric first line is a header.
std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    bool numeric = true;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      const std::string_view s =
          first == std::string::npos ? std::string_view{} : std::string_view(cell).substr(first, last - first + 1);
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        numeric = false;
        break;
      }
      row.push_back(x);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (row.size() != columns) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(columns) + " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::unique_ptr<MeasurementOracle> make_oracle(const ScenarioConfig& c, const Scenario& s,
                                               std::uint64_t stream) {
  if (c.oracle.kind == "synthetic") {
    return std::make_unique<SyntheticOracle>(c.oracle.gamma_hat, s.basis, s.noise, c.oracle.mode,
                                             stream, c.oracle.w_bar);
  }
  const auto n = static_cast<std::size_t>(c.dimension);
  std::vector<ReplayOracle::Row> rows;
  for (const auto& r : read_numeric_csv(c.oracle.path, n + 1)) {
    rows.push_back({Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(n)), r[n]});
  }
  return std::make_unique<ReplayOracle>(std::move(rows));
}

MinimizeOptions minimize_options(const ScenarioConfig& c) {
  MinimizeOptions m;
  m.fw.max_iters = c.solver.fw_max_iters;
  m.fw.gap_tol = c.solver.fw_gap_tol;
  m.support.solver_tol = c.solver.solver_tol;
  m.support.max_outer = c.solver.max_outer;
  m.support.max_inner = c.solver.max_inner;
  return m;
}

std::uint64_t effective_seed(const ScenarioConfig& c, const Globals& g) { return g.seed.value_or(c.seed); }

Measurement initial_measurement(const ScenarioConfig& c, const Scenario& s, const Globals& g) {
  auto oracle = make_oracle(c, s, stream_seed(effective_seed(c, g), 0));
  return measure_at(*oracle, s.basis, s.stencil, s.noise, c.z0);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// ---- regress --------------------------------------------------------------

int cmd_regress(const ScenarioConfig& c, const Globals& g) {
  const Scenario s = build_scenario(c);
  const Measurement m = initial_measurement(c, s, g);
  const ParameterSet& gamma = m.gamma;
  const ConvexityCertificate cert = certify_convexity(gamma, s.basis);
  std::vector<Interval> iv;
  for (Eigen::Index i = 0; i < gamma.dim(); ++i) {
    iv.push_back(support_interval(gamma, Vector::Unit(gamma.dim(), i)));
  }

  switch (g.format) {
    case Format::human:
      fmt::print("consistent parameter set from {} samples at z0 = {}\n", m.batch.samples(), tuple(c.z0));
      fmt::print("  level N|N22    {}\n", num(gamma.schur()));
      fmt::print("  sigma_min(Phi) {}\n", num(m.sigma_min));
      fmt::print("  convexity      {} ({})\n", to_string(cert.verdict), to_string(cert.method));
      fmt::print("  nonnegative    {}\n", nonneg_params_test(gamma) ? "yes" : "no");
      fmt::print("{:>4}  {:<14} {:>24} {:>24} {:>24}\n", "i", "function", "lse", "low", "high");
      for (Eigen::Index i = 0; i < gamma.dim(); ++i) {
        const auto& x = iv[static_cast<std::size_t>(i)];
        fmt::print("{:>4}  {:<14} {:>24} {:>24} {:>24}\n", i + 1, describe(s.basis[i]), num(gamma.lse()(i)),
                   num(x.low), num(x.high));
      }
      break;
    case Format::csv:
      fmt::print("index,function,lse,low,high\n");
      for (Eigen::Index i = 0; i < gamma.dim(); ++i) {
        const auto& x = iv[static_cast<std::size_t>(i)];
        fmt::print("{},{},{},{},{}\n", i + 1, describe(s.basis[i]), num(gamma.lse()(i)), num(x.low), num(x.high));
      }
      break;
    case Format::json_lines: {
      json out{{"lse", to_json(gamma.lse())},
               {"schur", gamma.schur()},
               {"sigma_min", m.sigma_min},
               {"convexity", to_string(cert.verdict)},
               {"method", to_string(cert.method)},
               {"nonnegative", nonneg_params_test(gamma)}};
      for (const auto& x : iv) out["intervals"].push_back({x.low, x.high});
      fmt::print("{}\n", out.dump());
      break;
    }
  }
  return 0;
}

// ---- bound ----------------------------------------------------------------

int cmd_bound(const ScenarioConfig& c, const Globals& g, const fs::path& points_file) {
  const Scenario s = build_scenario(c);
  const auto rows = read_numeric_csv(points_file, static_cast<std::size_t>(c.dimension));
  const Measurement m = initial_measurement(c, s, g);

  std::string header;
  for (int i = 1; i <= c.dimension; ++i) header += fmt::format("z_{},", i);
  header += "phi_minus,phi_lse,phi_plus,uncertainty";
  if (g.format != Format::json_lines) fmt::print("{}\n", header);
  for (const auto& r : rows) {
    const Vector z = Eigen::Map<const Vector>(r.data(), c.dimension);
    const Bounds b = phi_bounds(m.gamma, s.basis, z);
    const double lse = phi_lse(m.gamma, s.basis, z);
    const double u = uncertainty(m.gamma, s.basis, z);
    if (g.format == Format::json_lines) {
      fmt::print("{}\n", json{{"z", to_json(z)}, {"phi_minus", b.lower}, {"phi_lse", lse},
                              {"phi_plus", b.upper}, {"uncertainty", u}}
                             .dump());
    } else {
      fmt::print("{},{},{},{},{}\n", join(z), num(b.lower), num(lse), num(b.upper), num(u));
    }
  }
  return 0;
}

// ---- optimize -------------------------------------------------------------

int cmd_optimize(const ScenarioConfig& c, const Globals& g, std::optional<double> lambda_flag,
                 const std::optional<fs::path>& out_dir) {
  const Scenario s = build_scenario(c);
  const double lambda = lambda_flag.value_or(c.lambda);
  if (!(lambda >= 0.0)) throw ConfigError("--lambda must be >= 0");
  const Measurement m = initial_measurement(c, s, g);
  const ConvexityCertificate cert = certify_convexity(m.gamma, s.basis);
  if (cert.verdict == ConvexityVerdict::not_certified) {
    const std::string msg =
        "convexity of the bound is not certified for the measured parameter set; the minimizer "
        "may be a local one only (rerun with --force to accept)";
    if (!g.force) throw ConvexityError(msg);
    spdlog::warn("{}", msg);
  }
  const VertexList poly = c.polytope ? *c.polytope : s.stencil.polytope_at(c.z0);
  const Vector start = in_hull(poly, c.z0) ? c.z0 : poly.front();
  const MinimizeOptions mo = minimize_options(c);
  const MinimizeResult r = weighted_minimize(m.gamma, s.basis, poly, start, lambda, mo);
  GapOptions go;
  go.support = mo.support;
  const GapReport gap = optimality_gap(IntersectionSet(m.gamma), s.basis, poly, r.z, go);

  json summary{{"z_star", to_json(r.z)},
               {"objective", r.value},
               {"lambda", lambda},
               {"bound", gap.upper},
               {"fw_gap", r.fw_gap},
               {"fw_iterations", r.iterations},
               {"converged", r.converged},
               {"certified", r.certified},
               {"convexity", to_string(cert.verdict)},
               {"gap", {{"upper", gap.upper}, {"lower", gap.lower}, {"max_uncertainty", gap.max_uncertainty},
                        {"exact", gap.exact}, {"attained_at", to_json(gap.attained_at)}}}};
  switch (g.format) {
    case Format::human:
      fmt::print("z*            {}\n", tuple(r.z));
      fmt::print("objective     {}\n", num(r.value));
      fmt::print("upper bound   {}\n", num(gap.upper));
      fmt::print("gap bracket   [{}, {}]{}\n", num(gap.lower), num(gap.upper), gap.exact ? "" : " (grid estimate)");
      fmt::print("fw gap        {} after {} iterations\n", num(r.fw_gap), r.iterations);
      break;
    case Format::csv: {
      std::string header;
      for (int i = 1; i <= c.dimension; ++i) header += fmt::format("z_{},", i);
      fmt::print("{}objective,bound,gap_lower,gap_upper,max_uncertainty,fw_gap\n", header);
      fmt::print("{},{},{},{},{},{},{}\n", join(r.z), num(r.value), num(gap.upper), num(gap.lower),
                 num(gap.upper), num(gap.max_uncertainty), num(r.fw_gap));
      break;
    }
    case Format::json_lines:
      fmt::print("{}\n", summary.dump());
      break;
  }
  const std::optional<fs::path> dir = out_dir ? out_dir : c.output_dir;
  if (dir) write_text(*dir / "optimize.json", summary.dump(2) + "\n");

  if (!r.converged) {
    throw SolverError("Frank-Wolfe stopped with gap " + num(r.fw_gap) + " above tolerance " +
                      num(mo.fw.gap_tol));
  }
  if (!r.certified) throw SolverError("support solver did not certify the bound");
  return 0;
}

// ---- online ---------------------------------------------------------------

struct Trial {
  std::uint64_t seed = 0;
  std::size_t ic = 0;
  Vector z0;
};

struct TrialOutcome {
  OnlineResult result;
  double wall_time = 0.0;
  std::string csv_name;
  std::exception_ptr error;
};

std::string step_csv(const ScenarioConfig& c, const Scenario& s, const OnlineRunLog& log, bool synthetic) {
  std::string out = "k,";
  for (int i = 1; i <= c.dimension; ++i) out += fmt::format("z_{},", i);
  out += "bound,uncertainty,";
  if (synthetic) out += "phi_hat_at_zk,";
  for (Eigen::Index i = 1; i <= s.stencil.size(); ++i) out += fmt::format("y_{},", i);
  out += "sigma_min,fw_gap,solver_gap\n";
  for (const auto& st : log.steps) {
    out += fmt::format("{},{},{},{},", st.k, join(st.z), num(st.bound), num(st.uncertainty));
    if (synthetic) out += num(st.phi_hat.value_or(0.0)) + ",";
    out += join(st.y.transpose()) + ",";
    out += fmt::format("{},{},{}\n", num(st.sigma_min), num(st.fw_gap), num(st.solver_gap));
  }
  return out;
}

std::string interval_csv(const OnlineRunLog& log, Eigen::Index k) {
  std::string out = "k";
  for (Eigen::Index i = 1; i <= k; ++i) out += fmt::format(",low_{0},high_{0}", i);
  out += "\n";
  auto row = [&](int step, const std::vector<Interval>& iv) {
    out += std::to_string(step);
    for (const auto& x : iv) out += "," + num(x.low) + "," + num(x.high);
    out += "\n";
  };
  row(0, log.intervals0);
  for (const auto& st : log.steps) row(st.k, st.intervals);
  return out;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  auto parse = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      throw ConfigError("--seeds expects a..b with unsigned integers, got '" + text + "'");
    }
    return v;
  };
  if (dots == std::string::npos) {
    const auto v = parse(text);
    return {v, v};
  }
  const auto a = parse(std::string_view(text).substr(0, dots));
  const auto b = parse(std::string_view(text).substr(dots + 2));
  if (b < a) throw ConfigError("--seeds range is empty: " + text);
  return {a, b};
}

int cmd_online(const ScenarioConfig& c, const Globals& g, const std::optional<std::string>& seeds,
               const std::optional<fs::path>& out_dir, bool intervals) {
  const Scenario s = build_scenario(c);
  const fs::path dir = out_dir ? *out_dir : c.output_dir.value_or("cautious-out");
  const bool synthetic = c.oracle.kind == "synthetic";

  std::vector<Trial> trials;
  const auto [first, last] = seeds ? parse_seed_range(*seeds)
                                   : std::pair{effective_seed(c, g), effective_seed(c, g)};
  for (std::uint64_t seed = first;; ++seed) {
    for (std::size_t i = 0; i < c.initial_conditions.size(); ++i) {
      trials.push_back({seed, i, c.initial_conditions[i]});
    }
    if (seed == last) break;
  }

  OnlineOptions opts;
  opts.iterations = c.iterations;
  opts.force = g.force;
  opts.max_members = c.max_members;
  opts.minimize = minimize_options(c);
  opts.record_intervals = intervals;
  GapOptions go;
  go.support = opts.minimize.support;

  std::vector<TrialOutcome> outcomes(trials.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      const Trial& t = trials[i];
      TrialOutcome& out = outcomes[i];
      out.csv_name = fmt::format("seed{}_ic{}.csv", t.seed, t.ic);
      try {
        const auto start = std::chrono::steady_clock::now();
        auto oracle = make_oracle(c, s, stream_seed(t.seed, t.ic));
        out.result = run_online(*oracle, s.basis, s.stencil, s.noise, t.z0, opts, go);
        out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_text(dir / out.csv_name, step_csv(c, s, out.result.log, synthetic));
        if (intervals) {
          write_text(dir / fmt::format("seed{}_ic{}_intervals.csv", t.seed, t.ic),
                     interval_csv(out.result.log, s.basis.size()));
        }
        for (const auto& w : out.result.log.warnings) {
          spdlog::warn("seed {} ic {}: {}", t.seed, t.ic, w);
        }
        spdlog::info("seed {} ic {} done in {:.2f} s", t.seed, t.ic, out.wall_time);
      } catch (...) {
        out.error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(g.jobs, static_cast<int>(trials.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& o : outcomes) {
    if (o.error) std::rethrow_exception(o.error);
  }

  std::string agg = "seed,initial_condition,";
  for (int i = 1; i <= c.dimension; ++i) agg += fmt::format("z0_{},", i);
  for (int i = 1; i <= c.dimension; ++i) agg += fmt::format("final_z_{},", i);
  agg += "final_bound,final_uncertainty,gap_lower,gap_upper,max_uncertainty,monotone\n";
  json summary{{"config", fs::absolute(c.source).string()}, {"iterations", c.iterations}};
  std::size_t uncertified = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Trial& t = trials[i];
    const OnlineResult& r = outcomes[i].result;
    const Vector final_z = r.log.steps.empty() ? t.z0 : r.log.steps.back().z;
    const double final_bound = r.log.steps.empty() ? r.final_gap.upper : r.log.steps.back().bound;
    const double final_u = r.log.steps.empty() ? 0.0 : r.log.steps.back().uncertainty;
    for (const auto& st : r.log.steps) uncertified += st.certified ? 0 : 1;
    agg += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", t.seed, t.ic, join(t.z0), join(final_z), num(final_bound),
                       num(final_u), num(r.final_gap.lower), num(r.final_gap.upper),
                       num(r.final_gap.max_uncertainty), r.log.monotone ? 1 : 0);
    json run{{"seed", t.seed},
             {"initial_condition", t.ic},
             {"stream_seed", stream_seed(t.seed, t.ic)},
             {"z0", to_json(t.z0)},
             {"final_z", to_json(final_z)},
             {"final_bound", final_bound},
             {"final_uncertainty", final_u},
             {"gap", {{"upper", r.final_gap.upper}, {"lower", r.final_gap.lower},
                      {"max_uncertainty", r.final_gap.max_uncertainty}, {"exact", r.final_gap.exact}}},
             {"monotone", r.log.monotone},
             {"strictly_decreasing_when_moving", r.log.strictly_decreasing_when_moving},
             {"initial_convexity", to_string(r.log.initial_certificate.verdict)},
             {"warnings", r.log.warnings},
             {"wall_time_s", outcomes[i].wall_time},
             {"csv", outcomes[i].csv_name}};
    switch (g.format) {
      case Format::human:
        fmt::print("seed {} ic {}: z_K = {}  bound {}  gap [{}, {}]{}\n", t.seed, t.ic, tuple(final_z),
                   num(final_bound), num(r.final_gap.lower), num(r.final_gap.upper),
                   r.log.monotone ? "" : "  NOT MONOTONE");
        break;
      case Format::json_lines:
        fmt::print("{}\n", run.dump());
        break;
      case Format::csv:
        break;
    }
    summary["runs"].push_back(std::move(run));
  }
  write_text(dir / "aggregate.csv", agg);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  if (g.format == Format::csv) fmt::print("{}", agg);
  if (uncertified > 0) {
    throw SolverError(std::to_string(uncertified) + " step(s) reported bounds the support solver could not certify");
  }
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("cautious-opt");
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CAUTIOUS_OPT_LOG")) logger->set_level(spdlog::level::from_str(env));
  spdlog::set_default_logger(logger);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Cautious optimization of functions known only through noisy measurements"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::string seed_text;
  app.add_option("--config", g.config, "Scenario configuration (JSON)")->required();
  app.add_option("--seed", seed_text, "Override the configured seed");
  std::map<std::string, Format> formats{{"human", Format::human}, {"csv", Format::csv}, {"json-lines", Format::json_lines}};
  app.add_option("--format", g.format, "Output format")->transform(CLI::CheckedTransformer(formats, CLI::ignore_case))
      ->option_text("human|csv|json-lines");
  app.add_option("--jobs", g.jobs, "Parallel trials for multi-seed runs")->check(CLI::PositiveNumber);
  app.add_flag("--force", g.force, "Proceed when convexity cannot be certified");

  auto* regress = app.add_subcommand("regress", "Consistent parameter set from the batch at z0");
  auto* bound = app.add_subcommand("bound", "Worst-case bounds at the points of a CSV file");
  std::string points_file;
  bound->add_option("--points", points_file, "CSV with one point per row")->required();
  auto* optimize = app.add_subcommand("optimize", "Minimize the worst-case bound over a polytope");
  std::optional<double> lambda;
  optimize->add_option("--lambda", lambda, "Uncertainty weight");
  std::optional<std::string> opt_out;
  optimize->add_option("--output-dir", opt_out, "Directory for optimize.json");
  auto* online = app.add_subcommand("online", "Online measurement/optimization loop");
  std::optional<std::string> seeds;
  std::optional<std::string> out_dir;
  bool intervals = false;
  online->add_option("--seeds", seeds, "Inclusive seed range a..b");
  online->add_option("--output-dir", out_dir, "Directory for CSV and summary output");
  online->add_flag("--intervals", intervals, "Also write per-step parameter intervals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!seed_text.empty()) g.seed = parse_seed_range(seed_text).first;
    const ScenarioConfig c = load_config(g.config);
    if (*regress) return cmd_regress(c, g);
    if (*bound) return cmd_bound(c, g, points_file);
    if (*optimize) {
      return cmd_optimize(c, g, lambda, opt_out ? std::optional<fs::path>(*opt_out) : std::nullopt);
    }
    if (*online) {
      return cmd_online(c, g, seeds, out_dir ? std::optional<fs::path>(*out_dir) : std::nullopt, intervals);
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 2;
  } catch (const PreconditionError& e) {
    fmt::print(stderr, "precondition failed: {}\n", e.what());
    return 3;
  } catch (const SolverError& e) {
    fmt::print(stderr, "solver error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
