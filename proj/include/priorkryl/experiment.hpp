#pragma once

// Config-driven experiment runs: flat key = value configs, the deconvolution
// and tomography experiments, per-solver artifacts and the diagnose pass.
// Needs nlohmann/json (vendor/json.hpp).

#include "priorkryl/diagnostics.hpp"
#include "priorkryl/io.hpp"
#include "priorkryl/metrics.hpp"
#include "priorkryl/priors.hpp"
#include "priorkryl/problems.hpp"
#include "priorkryl/solvers.hpp"

#include <json.hpp>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace priorkryl::experiment {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum class ProblemKind { Deconv, Ct };
enum class SolverChoice { Cgls, Pcgls, Both };

/// Dense GSVD and C-orthogonality (full n x n SVD) are skipped above this n.
inline constexpr Index kMaxGsvdSize = 1000;

struct Config {
  ProblemKind problem = ProblemKind::Deconv;
  SolverChoice solver = SolverChoice::Both;
  double tau = 1.2;
  std::uint64_t seed = 1;
  int max_iter = 500;
  bool diagnostics = true;
  bool record_timings = false;
  std::string output_dir = "priorkryl_run";

  // shared grid size
  Index n = 150;

  // deconvolution
  Index m = 6;
  std::string preset = "beams";
  double kappa = 200.0;
  std::vector<double> t_points;
  double sigma = 5e-5;
  std::optional<double> alpha;  ///< empty: calibrated
  double beta = 1.0;
  double truth_center = 0.5;
  double truth_steepness = 15.0;

  // tomography
  Index n_theta = 10;
  Index n_s = 24;
  double lambda = 4.0;
  LaplacianScaling laplacian_scaling = LaplacianScaling::Standard;
  CtEntryScale ct_entry_scale = CtEntryScale::Paper;
  double noise_level = 0.01;
  std::string phantom_path;  ///< empty: synthetic phantom
  DynamicRange ssim_range = DynamicRange::MaxMinusMin;
};

// ---------------------------------------------------------------------------
// Config text

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw InputError("config: " + key + " = '" + v + "' is not a finite number");
  }
  return d;
}

inline double parse_positive(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (!(d > 0.0)) throw InputError("config: " + key + " must be positive, got " + v);
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v, long long lo) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw InputError("config: " + key + " = '" + v + "' is not an integer");
  }
  if (x < lo) {
    throw InputError("config: " + key + " must be >= " + std::to_string(lo) + ", got " + v);
  }
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw InputError("config: " + key + " must be true or false, got '" + v + "'");
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline const std::set<std::string>& common_keys() {
  static const std::set<std::string> k{"problem", "solver",      "tau",
                                       "seed",    "max_iter",    "diagnostics",
                                       "record_timings", "output_dir", "n"};
  return k;
}
inline const std::set<std::string>& deconv_keys() {
  static const std::set<std::string> k{"m",     "preset", "kappa",        "t_points",
                                       "sigma", "alpha",  "beta",         "truth_center",
                                       "truth_steepness"};
  return k;
}
inline const std::set<std::string>& ct_keys() {
  static const std::set<std::string> k{"n_theta",        "n_s",         "lambda",
                                       "laplacian_scaling", "ct_entry_scale", "noise_level",
                                       "phantom_path",   "ssim_range"};
  return k;
}

}  // namespace detail

inline const char* to_string(ProblemKind p) { return p == ProblemKind::Deconv ? "deconv" : "ct"; }

inline const char* to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Cgls: return "cgls";
    case SolverChoice::Pcgls: return "pcgls";
    case SolverChoice::Both: return "both";
  }
  return "?";
}

/// Parses `key = value` lines ('#' starts a comment). Unknown keys, keys of
/// the other problem and repeated keys are errors. `full` switches the
/// tomography defaults to the 160 / 20 / 60 geometry.
inline Config parse_config(const std::string& text, ProblemKind expected, bool full = false) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const bool known = detail::common_keys().count(key) || detail::deconv_keys().count(key) ||
                       detail::ct_keys().count(key);
    if (!known) {
      throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!kv.emplace(key, value).second) {
      throw InputError("config line " + std::to_string(lineno) + ": key '" + key +
                       "' given twice");
    }
  }

  Config c;
  c.problem = expected;
  if (auto it = kv.find("problem"); it != kv.end()) {
    if (it->second != to_string(expected)) {
      throw InputError("config: problem = " + it->second + " but the command runs " +
                       to_string(expected));
    }
  }
  const auto& foreign = expected == ProblemKind::Deconv ? detail::ct_keys() : detail::deconv_keys();
  for (const auto& [key, value] : kv) {
    if (foreign.count(key)) {
      throw InputError("config: key '" + key + "' does not apply to problem " +
                       to_string(expected));
    }
  }

  if (expected == ProblemKind::Ct) {
    c.n = full ? 160 : 64;
    c.n_theta = full ? 20 : 10;
    c.n_s = full ? 60 : 24;
    c.diagnostics = false;
  }

  auto get = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  if (auto v = get("solver")) {
    if (*v == "cgls") c.solver = SolverChoice::Cgls;
    else if (*v == "pcgls") c.solver = SolverChoice::Pcgls;
    else if (*v == "both") c.solver = SolverChoice::Both;
    else throw InputError("config: solver must be cgls, pcgls or both, got '" + *v + "'");
  }
  if (auto v = get("tau")) {
    c.tau = detail::parse_double("tau", *v);
    if (c.tau < 1.0) throw InputError("config: tau must be >= 1, got " + *v);
  }
  if (auto v = get("seed")) c.seed = static_cast<std::uint64_t>(detail::parse_int("seed", *v, 0));
  if (auto v = get("max_iter")) {
    const long long mi = detail::parse_int("max_iter", *v, 1);
    if (mi > std::numeric_limits<int>::max()) throw InputError("config: max_iter too large");
    c.max_iter = static_cast<int>(mi);
  }
  if (auto v = get("diagnostics")) c.diagnostics = detail::parse_bool("diagnostics", *v);
  if (auto v = get("record_timings")) c.record_timings = detail::parse_bool("record_timings", *v);
  if (auto v = get("output_dir")) {
    if (v->empty()) throw InputError("config: output_dir is empty");
    c.output_dir = *v;
  }
  if (auto v = get("n")) c.n = static_cast<Index>(detail::parse_int("n", *v, 1));

  if (expected == ProblemKind::Deconv) {
    if (auto v = get("m")) c.m = static_cast<Index>(detail::parse_int("m", *v, 1));
    if (auto v = get("preset")) {
      if (*v != "beams" && *v != "literal") {
        throw InputError("config: preset must be beams or literal, got '" + *v + "'");
      }
      c.preset = *v;
    }
    c.kappa = c.preset == "beams" ? 200.0 : 0.02;
    if (auto v = get("kappa")) c.kappa = detail::parse_positive("kappa", *v);
    if (auto v = get("sigma")) c.sigma = detail::parse_positive("sigma", *v);
    if (auto v = get("alpha")) {
      if (detail::lower(*v) != "auto") c.alpha = detail::parse_positive("alpha", *v);
    }
    if (auto v = get("beta")) c.beta = detail::parse_positive("beta", *v);
    if (auto v = get("truth_center")) c.truth_center = detail::parse_double("truth_center", *v);
    if (auto v = get("truth_steepness")) {
      c.truth_steepness = detail::parse_positive("truth_steepness", *v);
    }
    if (auto v = get("t_points")) {
      std::stringstream ss(*v);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        const double t = detail::parse_double("t_points", detail::trim(tok));
        if (t < 0.0 || t > 1.0) {
          throw InputError("config: t_points entry " + detail::trim(tok) + " outside [0,1]");
        }
        c.t_points.push_back(t);
      }
      if (static_cast<Index>(c.t_points.size()) != c.m) {
        throw InputError("config: t_points has " + std::to_string(c.t_points.size()) +
                         " entries but m = " + std::to_string(c.m));
      }
    } else {
      c.t_points = default_t_points(c.m);
    }
    if (c.m >= c.n) {
      throw InputError("config: need m < n, got m = " + std::to_string(c.m) +
                       ", n = " + std::to_string(c.n));
    }
    if (c.n < 3) throw InputError("config: n must be >= 3");
  } else {
    if (auto v = get("n_theta")) c.n_theta = static_cast<Index>(detail::parse_int("n_theta", *v, 1));
    if (auto v = get("n_s")) c.n_s = static_cast<Index>(detail::parse_int("n_s", *v, 2));
    if (auto v = get("lambda")) c.lambda = detail::parse_positive("lambda", *v);
    if (auto v = get("laplacian_scaling")) {
      if (*v == "standard") c.laplacian_scaling = LaplacianScaling::Standard;
      else if (*v == "paper") c.laplacian_scaling = LaplacianScaling::Paper;
      else throw InputError("config: laplacian_scaling must be standard or paper");
    }
    if (auto v = get("ct_entry_scale")) {
      if (*v == "paper") c.ct_entry_scale = CtEntryScale::Paper;
      else if (*v == "geometric") c.ct_entry_scale = CtEntryScale::Geometric;
      else throw InputError("config: ct_entry_scale must be paper or geometric");
    }
    if (auto v = get("noise_level")) {
      c.noise_level = detail::parse_double("noise_level", *v);
      if (c.noise_level < 0.0) throw InputError("config: noise_level must be >= 0");
    }
    if (auto v = get("phantom_path")) {
      c.phantom_path = v->empty() ? "" : fs::absolute(*v).lexically_normal().string();
    }
    if (auto v = get("ssim_range")) {
      if (*v == "max_minus_min") c.ssim_range = DynamicRange::MaxMinusMin;
      else if (*v == "ratio") c.ssim_range = DynamicRange::Ratio;
      else throw InputError("config: ssim_range must be max_minus_min or ratio");
    }
  }
  return c;
}

/// Every setting actually used, in a form parse_config reads back.
inline std::string resolved_config_text(const Config& c) {
  std::string s = "# resolved configuration\n";
  auto put = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  put("problem", to_string(c.problem));
  put("solver", to_string(c.solver));
  put("tau", io::fmt(c.tau));
  put("seed", std::to_string(c.seed));
  put("max_iter", std::to_string(c.max_iter));
  put("diagnostics", c.diagnostics ? "true" : "false");
  put("record_timings", c.record_timings ? "true" : "false");
  put("output_dir", c.output_dir);
  put("n", std::to_string(c.n));
  if (c.problem == ProblemKind::Deconv) {
    put("m", std::to_string(c.m));
    put("preset", c.preset);
    put("kappa", io::fmt(c.kappa));
    std::string t;
    for (std::size_t i = 0; i < c.t_points.size(); ++i) {
      t += (i ? "," : "") + io::fmt(c.t_points[i]);
    }
    put("t_points", t);
    put("sigma", io::fmt(c.sigma));
    put("alpha", c.alpha ? io::fmt(*c.alpha) : "auto");
    put("beta", io::fmt(c.beta));
    put("truth_center", io::fmt(c.truth_center));
    put("truth_steepness", io::fmt(c.truth_steepness));
  } else {
    put("n_theta", std::to_string(c.n_theta));
    put("n_s", std::to_string(c.n_s));
    put("lambda", io::fmt(c.lambda));
    put("laplacian_scaling",
        c.laplacian_scaling == LaplacianScaling::Standard ? "standard" : "paper");
    put("ct_entry_scale", c.ct_entry_scale == CtEntryScale::Paper ? "paper" : "geometric");
    put("noise_level", io::fmt(c.noise_level));
    put("phantom_path", c.phantom_path);
    put("ssim_range", c.ssim_range == DynamicRange::MaxMinusMin ? "max_minus_min" : "ratio");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Runs

/// Everything one solver run produced.
struct SolverRun {
  std::string name;  ///< "cgls" or "pcgls"
  SolveResult result;
  std::optional<DiagnosticsReport> diagnostics;
  std::optional<double> ssim_mean;
  std::optional<SsimResult> ssim;
  double relative_error = 0.0;
  double solve_seconds = 0.0;
  double diagnostics_seconds = 0.0;
  Json pgm_scaling;  ///< null unless images were written
};

struct RunOutcome {
  Config config;
  std::vector<SolverRun> runs;
  std::optional<GsvdChecks> gsvd;

  const SolverRun& run(const std::string& name) const {
    for (const auto& r : runs) {
      if (r.name == name) return r;
    }
    throw InputError("no " + name + " run in this outcome");
  }
};

inline Json report_json(const SolverRun& run, const Config& cfg) {
  const IterationTrace& tr = run.result.trace;
  Json j;
  j["stop_index"] = tr.iterations();
  j["stop_reason"] = to_string(tr.stop_reason);
  j["discrepancy_history"] = tr.discrepancy_norms;
  if (run.diagnostics) {
    const DiagnosticsReport& d = *run.diagnostics;
    j["nullspace_fractions"] = d.nullspace_fractions;
    j["ritz_history"] = d.ritz_history;
    Json proj = Json::array();
    for (Index i = 0; i < d.eigenvalues.size(); ++i) {
      proj.push_back({{"i", i}, {"lambda", d.eigenvalues[i]},
                      {"abs_projection", d.eigen_projections[i]}});
    }
    j["eigen_projections"] = proj;
    Json xi = Json::array();
    for (const auto& v : d.xi_history) xi.push_back(v ? Json(*v) : Json(nullptr));
    j["xi_history"] = xi;
    j["bound_margins"] = d.bound_margins;
  } else {
    j["nullspace_fractions"] = nullptr;
    j["ritz_history"] = nullptr;
    j["eigen_projections"] = nullptr;
    j["xi_history"] = nullptr;
    j["bound_margins"] = nullptr;
  }
  j["ssim_mean"] = run.ssim_mean ? Json(*run.ssim_mean) : Json(nullptr);
  if (run.diagnostics && run.diagnostics->orth_index) {
    j["orth_index"] = {{"min_cos", run.diagnostics->orth_index->min_cos},
                       {"max_cos", run.diagnostics->orth_index->max_cos}};
  } else {
    j["orth_index"] = nullptr;
  }
  if (cfg.record_timings) {
    j["timings"] = {{"solve_seconds", run.solve_seconds},
                    {"diagnostics_seconds", run.diagnostics_seconds}};
  } else {
    j["timings"] = nullptr;
  }
  j["pgm_scaling"] = run.pgm_scaling;
  return j;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string iterates_csv(const IterationTrace& tr) {
  io::Csv csv("iter,index,value");
  for (std::size_t k = 0; k < tr.iterates.size(); ++k) {
    const Vector& x = tr.iterates[k];
    for (Index i = 0; i < x.size(); ++i) csv.row(k, i, x[i]);
  }
  return csv.str();
}

inline std::string residuals_csv(const IterationTrace& tr) {
  io::Csv csv("iter,discrepancy,normal_residual,threshold");
  for (std::size_t k = 0; k < tr.discrepancy_norms.size(); ++k) {
    csv.row(k, tr.discrepancy_norms[k], tr.nres_norms[k], tr.threshold);
  }
  return csv.str();
}

inline std::string ritz_csv(const DiagnosticsReport& d) {
  io::Csv csv("iter,j,theta");
  for (std::size_t k = 0; k < d.ritz_history.size(); ++k) {
    for (std::size_t j = 0; j < d.ritz_history[k].size(); ++j) {
      csv.row(k, j, d.ritz_history[k][j]);
    }
  }
  return csv.str();
}

inline std::string nullspace_csv(const DiagnosticsReport& d) {
  io::Csv csv("iter,nu");
  for (std::size_t k = 0; k < d.nullspace_fractions.size(); ++k) {
    csv.row(k, d.nullspace_fractions[k]);
  }
  return csv.str();
}

inline std::string projections_csv(const DiagnosticsReport& d) {
  io::Csv csv("i,lambda,abs_projection");
  for (Index i = 0; i < d.eigenvalues.size(); ++i) {
    csv.row(i, d.eigenvalues[i], d.eigen_projections[i]);
  }
  return csv.str();
}

inline Json gsvd_json(const std::optional<GsvdChecks>& g, Index n) {
  Json j;
  if (!g) {
    j["skipped"] = "n = " + std::to_string(n) + " exceeds the dense GSVD limit " +
                   std::to_string(kMaxGsvdSize);
    return j;
  }
  j["recon_a"] = g->recon_a;
  j["recon_b"] = g->recon_b;
  j["sum_squares"] = g->sum_squares;
  j["null_residual"] = g->null_residual;
  j["diag_offmass"] = g->diag_offmass;
  j["c_cross"] = g->c_cross;
  j["diag_deviation"] = g->diag_deviation;
  j["ordered"] = g->ordered;
  return j;
}

/// Runs the selected solvers and, if requested, the trace diagnostics.
template <LinearOperator Op>
std::vector<SolverRun> solve_all(const Config& cfg, const ObservationModel<Op>& model,
                                 const GaussianPrior& prior, bool diagnostics) {
  SolveOptions opts;
  opts.tau = cfg.tau;
  opts.max_iter = cfg.max_iter;
  opts.record_basis = diagnostics;
  opts.record_iterates = true;

  std::optional<Matrix> a_dense;
  std::optional<NullspaceProjector> projector;
  if (diagnostics) {
    if (model.n() > kMaxDirectSize) {
      throw InputError("diagnostics: n = " + std::to_string(model.n()) +
                       " exceeds the dense limit " + std::to_string(kMaxDirectSize) +
                       "; set diagnostics = false");
    }
    a_dense = to_dense(model.op);
    projector = nullspace_projector(*a_dense);
  }

  std::vector<SolverRun> runs;
  const bool want_cgls = cfg.solver != SolverChoice::Pcgls;
  const bool want_pcgls = cfg.solver != SolverChoice::Cgls;
  if (want_cgls) {
    SolverRun r;
    r.name = "cgls";
    auto t0 = std::chrono::steady_clock::now();
    r.result = cgls_solve(model, opts);
    r.solve_seconds = seconds_since(t0);
    if (diagnostics) {
      t0 = std::chrono::steady_clock::now();
      const SpectralData spec = spectral_data(*a_dense);
      r.diagnostics = analyze_trace(r.result.trace, spec, &*projector);
      r.diagnostics_seconds = seconds_since(t0);
    }
    runs.push_back(std::move(r));
  }
  if (want_pcgls) {
    SolverRun r;
    r.name = "pcgls";
    auto t0 = std::chrono::steady_clock::now();
    r.result = pcgls_solve(model, prior, opts);
    r.solve_seconds = seconds_since(t0);
    if (diagnostics) {
      t0 = std::chrono::steady_clock::now();
      const SpectralData spec = spectral_data(priorconditioned_dense(*a_dense, prior));
      r.diagnostics = analyze_trace(r.result.trace, spec, &*projector);
      if (model.n() <= kMaxGsvdSize) {
        r.diagnostics->orth_index = c_orthogonality_angles(*a_dense, prior);
      }
      r.diagnostics_seconds = seconds_since(t0);
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

inline void write_solver_files(const fs::path& dir, const SolverRun& run, const Config& cfg) {
  io::write_text(dir / "iterates.csv", iterates_csv(run.result.trace));
  io::write_text(dir / "residuals.csv", residuals_csv(run.result.trace));
  if (run.diagnostics) {
    io::write_text(dir / "ritz.csv", ritz_csv(*run.diagnostics));
    io::write_text(dir / "nullspace.csv", nullspace_csv(*run.diagnostics));
    io::write_text(dir / "projections.csv", projections_csv(*run.diagnostics));
  }
  io::write_text(dir / "report.json", report_json(run, cfg).dump(2) + "\n");
}

struct DeconvSetup {
  DeconvProblem problem;
  std::optional<ObservationModel<DenseMatrix>> model;
  SecondOrderPrior1D prior;
};

inline DeconvSetup build_deconv(Config& cfg) {
  DeconvSetup s;
  auto [p, model] = build_deconv_problem(cfg.n, cfg.m, cfg.kappa, cfg.t_points,
                                         sigmoid_truth(cfg.n, cfg.truth_center,
                                                       cfg.truth_steepness),
                                         cfg.sigma, cfg.seed);
  s.problem = std::move(p);
  s.model.emplace(std::move(model));
  s.prior = build_second_order_prior(cfg.n, cfg.beta, cfg.alpha);
  cfg.alpha = s.prior.alpha;
  return s;
}

struct CtSetup {
  CtGeometry geom;
  Phantom phantom;
  SparseMatrix a;
  std::optional<ObservationModel<SparseMatrix>> model;
  WhittleMaternPrior prior;
  double sigma = 0.0;
};

inline CtSetup build_ct(const Config& cfg) {
  CtSetup s;
  if (cfg.phantom_path.empty()) {
    s.phantom = synthetic_phantom(cfg.n);
  } else {
    s.phantom = io::phantom_from_image(io::read_pgm(cfg.phantom_path));
    if (s.phantom.side != cfg.n) {
      throw InputError("phantom " + cfg.phantom_path + " is " + std::to_string(s.phantom.side) +
                       " pixels wide but n = " + std::to_string(cfg.n));
    }
  }
  s.geom = CtGeometry(cfg.n, cfg.n_theta, cfg.n_s);
  s.a = build_ct_matrix(s.geom, cfg.ct_entry_scale);
  const Vector clean = s.a.apply(s.phantom.pixels);
  s.sigma = cfg.noise_level * clean.cwiseAbs().maxCoeff();
  // zero noise: the smallest normal double makes the discrepancy threshold vanish
  const double model_sigma = s.sigma > 0.0 ? s.sigma : std::numeric_limits<double>::min();
  s.model.emplace(s.a, add_noise(clean, s.sigma, cfg.seed), model_sigma);
  s.prior = build_whittle_matern_prior(cfg.n, cfg.lambda, cfg.laplacian_scaling);
  return s;
}

}  // namespace detail

/// Deconvolution run. Writes files under `out` when it is non-empty.
inline RunOutcome run_deconv(Config cfg, const fs::path& out) {
  if (cfg.problem != ProblemKind::Deconv) throw InputError("run_deconv: config is not deconv");
  detail::DeconvSetup s = detail::build_deconv(cfg);
  RunOutcome o;
  o.runs = detail::solve_all(cfg, *s.model, s.prior.prior, cfg.diagnostics);
  for (auto& r : o.runs) r.relative_error = relative_error(r.result.solution, s.problem.truth);
  o.config = cfg;
  if (!out.empty()) {
    io::write_text(out / "resolved_config", resolved_config_text(cfg));
    io::Csv truth("index,s,value");
    for (Index k = 0; k < cfg.n; ++k) {
      truth.row(k, s.problem.s_points[static_cast<std::size_t>(k)], s.problem.truth[k]);
    }
    truth.save(out / "truth.csv");
    io::Csv data("index,t,clean,observed");
    for (Index l = 0; l < cfg.m; ++l) {
      data.row(l, s.problem.t_points[static_cast<std::size_t>(l)], s.problem.clean[l],
               s.model->b[l]);
    }
    data.save(out / "data.csv");
    for (const auto& r : o.runs) detail::write_solver_files(out / r.name, r, cfg);
  }
  return o;
}

/// Tomography run. Adds reconstruction, sinogram and SSIM images.
inline RunOutcome run_ct(Config cfg, const fs::path& out) {
  if (cfg.problem != ProblemKind::Ct) throw InputError("run_ct: config is not ct");
  detail::CtSetup s = detail::build_ct(cfg);
  RunOutcome o;
  o.runs = detail::solve_all(cfg, *s.model, s.prior.prior, cfg.diagnostics);
  o.config = cfg;

  const Matrix original = io::phantom_image(cfg.n, s.phantom.pixels);
  SsimParams sp;
  sp.range = cfg.ssim_range;
  for (auto& r : o.runs) {
    const Matrix recon = io::phantom_image(cfg.n, r.result.solution);
    r.ssim = ssim(original, recon, sp);
    r.ssim_mean = r.ssim->mean;
    if (s.phantom.pixels.norm() > 0.0) {
      r.relative_error = relative_error(r.result.solution, s.phantom.pixels);
    }
  }

  if (!out.empty()) {
    io::write_text(out / "resolved_config", resolved_config_text(cfg));
    const Matrix sino = sinogram_image(s.geom, s.model->b);
    io::write_text(out / "sinogram.csv", io::matrix_csv(sino));
    const io::PgmScaling sino_sc = io::write_pgm(out / "sinogram.pgm", sino);
    const io::PgmScaling ph_sc = io::write_pgm(out / "phantom.pgm", original);
    for (auto& r : o.runs) {
      const fs::path dir = out / r.name;
      const io::PgmScaling rec_sc =
          io::write_pgm(dir / "reconstruction.pgm", io::phantom_image(cfg.n, r.result.solution));
      const io::PgmScaling map_sc = io::write_pgm(dir / "ssim_map.pgm", r.ssim->map);
      io::write_text(dir / "ssim_map.csv", io::matrix_csv(r.ssim->map));
      auto sc = [](const io::PgmScaling& p) { return Json{{"min", p.min}, {"max", p.max}}; };
      r.pgm_scaling = {{"reconstruction", sc(rec_sc)},
                       {"ssim_map", sc(map_sc)},
                       {"sinogram", sc(sino_sc)},
                       {"phantom", sc(ph_sc)}};
      detail::write_solver_files(dir, r, cfg);
    }
  }
  return o;
}

inline ProblemKind problem_of(const std::string& config_text) {
  std::istringstream in(config_text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (detail::trim(line.substr(0, eq)) != "problem") continue;
    const std::string v = detail::trim(line.substr(eq + 1));
    if (v == "deconv") return ProblemKind::Deconv;
    if (v == "ct") return ProblemKind::Ct;
    throw InputError("config: unknown problem '" + v + "'");
  }
  throw InputError("config: no problem key");
}

/// Re-runs a stored run from its resolved_config with diagnostics on, checks
/// that every solver's residuals.csv matches, then writes ritz.csv,
/// nullspace.csv, projections.csv per solver and gsvd_checks.json.
inline RunOutcome diagnose(const fs::path& run_dir) {
  const fs::path cfg_path = run_dir / "resolved_config";
  if (!fs::exists(cfg_path)) {
    throw InputError("diagnose: " + cfg_path.string() + " not found");
  }
  const std::string text = io::read_text(cfg_path);
  Config cfg = parse_config(text, problem_of(text));
  cfg.diagnostics = true;

  RunOutcome o;
  std::optional<GsvdChecks> checks;
  if (cfg.problem == ProblemKind::Deconv) {
    detail::DeconvSetup s = detail::build_deconv(cfg);
    o.runs = detail::solve_all(cfg, *s.model, s.prior.prior, true);
    for (auto& r : o.runs) r.relative_error = relative_error(r.result.solution, s.problem.truth);
    if (cfg.n <= kMaxGsvdSize) {
      const Matrix a = s.model->op.to_dense();
      checks = gsvd_checks(a, s.prior.prior, gsvd(a, s.prior.prior));
    }
  } else {
    detail::CtSetup s = detail::build_ct(cfg);
    o.runs = detail::solve_all(cfg, *s.model, s.prior.prior, true);
    if (s.phantom.pixels.norm() > 0.0) {
      for (auto& r : o.runs) r.relative_error = relative_error(r.result.solution, s.phantom.pixels);
    }
    if (cfg.n * cfg.n <= kMaxGsvdSize) {
      const Matrix a = s.a.to_dense();
      checks = gsvd_checks(a, s.prior.prior, gsvd(a, s.prior.prior));
    }
  }
  o.config = cfg;
  o.gsvd = checks;

  for (const auto& r : o.runs) {
    const fs::path dir = run_dir / r.name;
    const fs::path res = dir / "residuals.csv";
    if (!fs::exists(res)) throw InputError("diagnose: " + res.string() + " not found");
    if (io::read_text(res) != detail::residuals_csv(r.result.trace)) {
      throw InputError("diagnose: " + res.string() + " does not match the re-run");
    }
    io::write_text(dir / "ritz.csv", detail::ritz_csv(*r.diagnostics));
    io::write_text(dir / "nullspace.csv", detail::nullspace_csv(*r.diagnostics));
    io::write_text(dir / "projections.csv", detail::projections_csv(*r.diagnostics));
  }
  const Index n = cfg.problem == ProblemKind::Deconv ? cfg.n : cfg.n * cfg.n;
  io::write_text(run_dir / "gsvd_checks.json", detail::gsvd_json(checks, n).dump(2) + "\n");
  return o;
}

}  // namespace priorkryl::experiment
