#include "rdyn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "rdyn/io.hpp"
#include "rdyn/log.hpp"

namespace rdyn::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr double kNormTolerance = 1e-9;
constexpr double kSumTolerance = 1e-8;

const char* equation_of(Engine e) {
  switch (e) {
    case Engine::exact:
      return "N-particle von Neumann equation i d(rho)/dt = [H1 + H2, rho] on the fixed-(d, N) "
             "Fock sector, spectral propagator; reduced states by the bosonic partial trace";
    case Engine::bbgky_check:
      return "BBGKY hierarchy i d(rho_M)/dt = [H1 + (1 - (N - M)) H2, rho_M] + (N - M) "
             "Tr_1[H2, rho_(M+1)], compared with central differences of the exact reduced states";
    case Engine::mean_field:
      return "nonlinear mean-field Schroedinger equation i d(phi)/dt = [H1 + (N - 1) C(phi)] phi "
             "with C_nm = sum_ij V_nj;im phi_i conj(phi_j)";
    case Engine::gpe:
      return "lattice Gross-Pitaevskii equation i d(phi_x)/dt = -J (phi_x+1 - 2 phi_x + phi_x-1) "
             "+ V_x phi_x + g (N - 1) |phi_x|^2 phi_x";
    case Engine::dissipative:
      return "second-order dissipative mean-field master equation in Lindblad form, "
             "d(rho)/dt = -i[V_I + (N - 1)(C_I + H_LS), rho] + (N - 1) sum gamma_ijkl "
             "(E_ij rho E_kl - 1/2 {E_kl E_ij, rho}), gamma and H_LS from the state-dependent "
             "autocorrelation tensor Gamma (interaction picture with respect to H1)";
  }
  return "";
}

Engine engine_from(const std::string& s) {
  if (s == "exact") return Engine::exact;
  if (s == "bbgky_check") return Engine::bbgky_check;
  if (s == "mean_field") return Engine::mean_field;
  if (s == "gpe") return Engine::gpe;
  if (s == "dissipative") return Engine::dissipative;
  throw ConfigError("unknown engine '" + s + "'");
}

Boundary boundary_from(const std::string& s) {
  if (s == "open") return Boundary::open;
  if (s == "periodic") return Boundary::periodic;
  throw ConfigError("unknown boundary '" + s + "'");
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return item.key() == a; }))
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

json load_inline_or_file(const json& j, const char* inline_key, const fs::path& base) {
  if (j.contains(inline_key)) return j.at(inline_key);
  if (j.contains("path")) {
    const fs::path p = base / j.at("path").get<std::string>();
    if (!fs::exists(p)) throw ConfigError("file not found: " + p.string());
    return io::read_json_file(p);
  }
  throw ConfigError(std::string("expected '") + inline_key + "' or 'path'");
}

OneBodySpec parse_h1(const json& j, int d, const fs::path& base) {
  check_keys(j, "h1", {"type", "J", "tilt", "boundary", "omega", "spacing", "matrix", "path"});
  OneBodySpec s;
  const std::string type = get_or<std::string>(j, "type", "tight_binding");
  s.hopping = get_or(j, "J", 1.0);
  s.tilt = get_or(j, "tilt", 0.0);
  s.boundary = boundary_from(get_or<std::string>(j, "boundary", "open"));
  s.omega = get_or(j, "omega", 0.0);
  s.spacing = get_or(j, "spacing", 1.0);
  if (s.spacing <= 0.0) throw ConfigError("h1: spacing must be positive");
  if (type == "tight_binding") {
    s.kind = OneBodySpec::Kind::tight_binding;
  } else if (type == "harmonic") {
    s.kind = OneBodySpec::Kind::harmonic;
    s.boundary = Boundary::open;
    if (s.hopping <= 0.0) throw ConfigError("h1: harmonic trap needs J > 0");
  } else if (type == "matrix" || type == "file") {
    s.kind = OneBodySpec::Kind::matrix;
    s.matrix = io::matrix_from_json(load_inline_or_file(j, "matrix", base));
    if (s.matrix.rows() != d || s.matrix.cols() != d)
      throw ConfigError("h1 is " + std::to_string(s.matrix.rows()) + "x" +
                        std::to_string(s.matrix.cols()) + ", expected d x d");
    const double dev = hermiticity_defect(s.matrix);
    if (dev >= 1e-12) throw ConfigError("h1 not Hermitian (max dev = " + fmt(dev) + ")");
  } else {
    throw ConfigError("h1: unknown type '" + type + "'");
  }
  return s;
}

TwoBodySpec parse_h2(const json& j, int d, const fs::path& base) {
  check_keys(j, "h2", {"type", "g", "tensor", "path"});
  TwoBodySpec s;
  const std::string type = get_or<std::string>(j, "type", "none");
  if (type == "none") {
    s.kind = TwoBodySpec::Kind::none;
  } else if (type == "contact") {
    s.kind = TwoBodySpec::Kind::contact;
    s.g = get_or(j, "g", 0.0);
  } else if (type == "tensor" || type == "file") {
    s.kind = TwoBodySpec::Kind::tensor;
    s.tensor = io::tensor_from_json(load_inline_or_file(j, "tensor", base));
    if (s.tensor.modes() != d) throw ConfigError("h2 tensor has the wrong mode count");
    const double dev = TwoBodyOperator::hermiticity_defect(s.tensor);
    if (dev >= 1e-12) throw ConfigError("h2 not Hermitian (max dev = " + fmt(dev) + ")");
  } else {
    throw ConfigError("h2: unknown type '" + type + "'");
  }
  return s;
}

Vector normalize_orbital(Vector c, bool normalize, const std::string& what) {
  const double norm = c.norm();
  if (norm == 0.0) throw ConfigError(what + ": zero orbital");
  if (normalize) return c / norm;
  if (std::abs(norm - 1.0) > kNormTolerance)
    throw ConfigError("initial state not normalized (norm = " + fmt(norm) + ")");
  return c;
}

InitialStateSpec parse_initial(const json& j, int d, int n, std::uint64_t seed, const fs::path& base) {
  check_keys(j, "initial_state", {"type", "c", "n", "normalize", "amplitudes", "density", "path"});
  InitialStateSpec s;
  const std::string type = get_or<std::string>(j, "type", "product");
  const bool normalize = get_or(j, "normalize", false);
  if (type == "product") {
    s.kind = InitialStateSpec::Kind::product;
    if (!j.contains("c")) throw ConfigError("initial_state: product needs 'c'");
    s.orbital = io::vector_from_json(j.at("c"));
    if (s.orbital.size() != d) throw ConfigError("initial_state: orbital length != d");
    s.orbital = normalize_orbital(s.orbital, normalize, "initial_state");
  } else if (type == "random_product") {
    s.kind = InitialStateSpec::Kind::random_product;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    s.orbital.resize(d);
    for (int k = 0; k < d; ++k) {
      const double re = normal(rng);
      s.orbital(k) = cplx(re, normal(rng));
    }
    s.orbital.normalize();
  } else if (type == "fock") {
    s.kind = InitialStateSpec::Kind::fock;
    s.occupations = get_or<std::vector<int>>(j, "n", {});
    if (static_cast<int>(s.occupations.size()) != d) throw ConfigError("initial_state: n has length != d");
    int total = 0;
    for (int x : s.occupations) {
      if (x < 0) throw ConfigError("initial_state: negative occupation");
      total += x;
    }
    if (total != n) throw ConfigError("initial_state: occupations sum to " + std::to_string(total) +
                                      ", expected N = " + std::to_string(n));
  } else if (type == "explicit") {
    s.kind = InitialStateSpec::Kind::explicit_state;
    if (j.contains("amplitudes")) {
      s.amplitudes = io::vector_from_json(j.at("amplitudes"));
      const double norm = s.amplitudes.norm();
      if (normalize && norm > 0.0) s.amplitudes /= norm;
      else if (std::abs(norm - 1.0) > kNormTolerance)
        throw ConfigError("initial state not normalized (norm = " + fmt(norm) + ")");
    } else {
      const json doc = load_inline_or_file(j, "density", base);
      s.density = io::matrix_from_json(doc.is_object() ? doc.at("matrix") : doc);
    }
  } else {
    throw ConfigError("initial_state: unknown type '" + type + "'");
  }
  return s;
}

ObservableSet parse_observables(const json& j) {
  check_keys(j, "observables", {"occupations", "momentum", "purity", "trace_distance", "energy",
                                "natural_orbitals", "snapshots"});
  ObservableSet o;
  o.occupations = get_or(j, "occupations", true);
  o.momentum = get_or(j, "momentum", true);
  o.purity = get_or(j, "purity", true);
  o.trace_distance = get_or(j, "trace_distance", true);
  o.energy = get_or(j, "energy", true);
  o.natural_orbitals = get_or(j, "natural_orbitals", true);
  o.snapshots = get_or(j, "snapshots", true);
  if (!o.any()) throw ConfigError("observables: at least one observable must be enabled");
  return o;
}

QuadratureSpec parse_quadrature(const json& j) {
  check_keys(j, "quadrature", {"rule", "substeps", "tolerance", "max_doublings"});
  QuadratureSpec q;
  const std::string rule = get_or<std::string>(j, "rule", "trapezoid");
  if (rule == "trapezoid") q.rule = QuadratureRule::trapezoid;
  else if (rule == "gauss") q.rule = QuadratureRule::gauss;
  else throw ConfigError("quadrature: unknown rule '" + rule + "'");
  q.substeps = get_or(j, "substeps", q.substeps);
  q.tolerance = get_or(j, "tolerance", q.tolerance);
  q.max_doublings = get_or(j, "max_doublings", q.max_doublings);
  try {
    q.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("quadrature: ") + e.what());
  }
  return q;
}

bool needs_exact_sector(const ScenarioConfig& cfg) {
  for (Engine e : cfg.engines)
    if (e == Engine::exact || e == Engine::bbgky_check) return true;
  return cfg.observables.trace_distance;
}

bool is_product_type(const ScenarioConfig& cfg) { return initial_orbital(cfg).has_value(); }

// Column layout shared by every engine.
std::vector<std::string> observable_columns(const ScenarioConfig& cfg) {
  std::vector<std::string> cols{"time"};
  const auto per_mode = [&](const char* stem) {
    for (int k = 0; k < cfg.d; ++k) cols.push_back(stem + std::to_string(k));
  };
  if (cfg.observables.occupations) per_mode("n_");
  if (cfg.observables.momentum) per_mode("p_");
  if (cfg.observables.purity) cols.emplace_back("purity");
  if (cfg.observables.trace_distance) cols.emplace_back("trace_distance");
  if (cfg.observables.energy) cols.emplace_back("energy");
  if (cfg.observables.natural_orbitals) per_mode("no_");
  return cols;
}

struct Sample {
  Matrix rho1;
  Matrix rho_m;  // the order used for purity and trace distance
  double energy = 0.0;
};

struct Reference {
  std::vector<Matrix> rho1;
  std::vector<Matrix> rho_m;
};

class Recorder {
 public:
  Recorder(const ScenarioConfig& cfg, Engine e, std::vector<std::string> extra)
      : cfg_(cfg), path_(cfg.output_dir / (cfg.prefix + "_" + engine_name(e) + ".csv")) {
    std::vector<std::string> cols = observable_columns(cfg);
    cols.insert(cols.end(), extra.begin(), extra.end());
    csv_ = std::make_unique<io::CsvWriter>(path_, std::move(cols));
  }

  void add(double t, const Sample& s, const Matrix* reference, const std::vector<double>& extra) {
    const auto& obs = cfg_.observables;
    const double n = cfg_.n;
    std::vector<double> row{t};
    double occ_sum = 0.0;
    for (int k = 0; k < cfg_.d; ++k) occ_sum += n * s.rho1(k, k).real();
    occ_dev_ = std::max(occ_dev_, std::abs(occ_sum - n));
    if (obs.occupations)
      for (int k = 0; k < cfg_.d; ++k) row.push_back(n * s.rho1(k, k).real());
    if (obs.momentum) {
      const std::vector<double> p = momentum_distribution(s.rho1, cfg_.n);
      double sum = 0.0;
      for (double x : p) sum += x;
      mom_dev_ = std::max(mom_dev_, std::abs(sum - n));
      row.insert(row.end(), p.begin(), p.end());
    }
    if (obs.purity) row.push_back((s.rho_m * s.rho_m).trace().real());
    if (obs.trace_distance) {
      const double td = reference != nullptr ? trace_distance(s.rho_m, *reference) : 0.0;
      max_td_ = std::max(max_td_, td);
      row.push_back(td);
    }
    if (obs.energy) row.push_back(s.energy);
    if (obs.natural_orbitals) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s.rho1 + s.rho1.adjoint()));
      const Eigen::VectorXd ev = es.eigenvalues();
      for (Eigen::Index k = ev.size() - 1; k >= 0; --k) row.push_back(n * ev(k));
    }
    row.insert(row.end(), extra.begin(), extra.end());
    csv_->row(row);
  }

  json summary() const {
    json j{{"occupation_sum_max_deviation", occ_dev_}};
    if (cfg_.observables.momentum) j["momentum_sum_max_deviation"] = mom_dev_;
    if (cfg_.observables.trace_distance) j["max_trace_distance"] = max_td_;
    if (occ_dev_ > kSumTolerance || mom_dev_ > kSumTolerance)
      warn("occupation sum deviates from N by more than 1e-8 in " + path_.filename().string());
    return j;
  }

  const fs::path& path() const { return path_; }

 private:
  const ScenarioConfig& cfg_;
  fs::path path_;
  std::unique_ptr<io::CsvWriter> csv_;
  double occ_dev_ = 0.0;
  double mom_dev_ = 0.0;
  double max_td_ = 0.0;
};

struct Context {
  const ScenarioConfig& cfg;
  Hamiltonian h;
  std::optional<DensityMatrix> rho0;
  std::optional<Trajectory> exact;
  std::optional<Reference> reference;
};

const Trajectory& exact_trajectory(Context& ctx) {
  if (!ctx.exact) ctx.exact = propagate_von_neumann(ctx.h, *ctx.rho0, ctx.cfg.grid);
  return *ctx.exact;
}

const Reference* reference(Context& ctx) {
  if (!ctx.cfg.observables.trace_distance) return nullptr;
  if (!ctx.reference) {
    const Trajectory& traj = exact_trajectory(ctx);
    Reference r;
    for (const DensityMatrix& s : traj.states) {
      r.rho1.push_back(partial_trace(s, 1).matrix());
      r.rho_m.push_back(partial_trace(s, ctx.cfg.m).matrix());
    }
    ctx.reference = std::move(r);
  }
  return &*ctx.reference;
}

fs::path snapshot_path(const ScenarioConfig& cfg, Engine e, const char* suffix) {
  return cfg.output_dir / (cfg.prefix + "_" + engine_name(e) + suffix);
}

EngineSummary run_exact(Context& ctx, Engine which) {
  const ScenarioConfig& cfg = ctx.cfg;
  const Trajectory& traj = exact_trajectory(ctx);
  std::vector<std::string> extra;
  if (which == Engine::bbgky_check)
    for (int m = 1; m < cfg.n; ++m) extra.push_back("rel_err_" + std::to_string(m));
  Recorder rec(cfg, which, extra);
  const Matrix hn = ctx.h.sector_matrix(ctx.rho0->basis()).matrix;
  std::optional<SpectralPropagator> prop;
  if (which == Engine::bbgky_check) prop.emplace(hn);
  json snapshots = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const DensityMatrix& s = traj.states[k];
    const DensityMatrix rm = partial_trace(s, cfg.m);
    Sample sample{partial_trace(s, 1).matrix(), rm.matrix(), (hn * s.matrix()).trace().real()};
    std::vector<double> errs;
    if (which == Engine::bbgky_check) {
      errs = bbgky_consistency(ctx.h, *prop, *ctx.rho0, traj.times[k], cfg.bbgky_dt);
      for (double e : errs) worst = std::max(worst, e);
    }
    const Matrix* ref = cfg.observables.trace_distance ? &sample.rho_m : nullptr;
    rec.add(traj.times[k], sample, ref, errs);
    if (cfg.observables.snapshots && which == Engine::exact)
      snapshots.push_back({{"time", traj.times[k]}, {"rho", io::density_to_json(rm)}});
  }
  json diag = rec.summary();
  diag["sector_dimension"] = ctx.rho0->basis()->size();
  if (which == Engine::bbgky_check) {
    diag["max_relative_error"] = worst;
    diag["finite_difference_dt"] = cfg.bbgky_dt;
  }
  if (!snapshots.empty()) {
    const fs::path p = snapshot_path(cfg, which, "_snapshots.json");
    io::write_json_file(p, snapshots);
    diag["snapshots"] = p.filename().string();
  }
  return {which, rec.path(), diag};
}

EngineSummary record_mean_field(Context& ctx, Engine which, const MeanFieldTrajectory& traj) {
  const ScenarioConfig& cfg = ctx.cfg;
  Recorder rec(cfg, which, {});
  const Reference* ref = reference(ctx);
  std::vector<Vector> orbitals;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Vector& phi = traj.states[k].phi();
    const Matrix rho1 = phi * phi.adjoint();
    const Matrix rho_m = cfg.m == 1 ? rho1 : product_state_density(ProductStateAmplitudes::normalized(phi), cfg.m).matrix();
    Sample s{rho1, rho_m, mean_field_energy(ctx.h, phi, cfg.n)};
    rec.add(traj.times[k], s, ref != nullptr ? &ref->rho_m[k] : nullptr, {});
    orbitals.push_back(phi);
  }
  json diag = rec.summary();
  diag["accumulated_norm_defect"] = traj.accumulated_norm_defect;
  diag["rk4_steps"] = traj.steps;
  if (cfg.observables.snapshots) {
    const fs::path p = snapshot_path(cfg, which, "_orbital.csv");
    io::write_orbital_csv(p, traj.times, orbitals);
    diag["snapshots"] = p.filename().string();
  }
  return {which, rec.path(), diag};
}

LatticeConfig lattice_of(const ScenarioConfig& cfg) {
  LatticeConfig lat;
  lat.sites = cfg.d;
  lat.spacing = cfg.h1.spacing;
  lat.boundary = cfg.h1.boundary;
  lat.tilt = cfg.h1.tilt;
  lat.onsite_g = cfg.h2.kind == TwoBodySpec::Kind::contact ? cfg.h2.g : 0.0;
  lat.mass = 1.0 / (2.0 * cfg.h1.hopping * cfg.h1.spacing * cfg.h1.spacing);
  return lat;
}

EngineSummary run_dissipative(Context& ctx, const Vector& phi) {
  const ScenarioConfig& cfg = ctx.cfg;
  DissipativeOptions opts;
  opts.quadrature = cfg.quadrature;
  opts.steps_per_output = cfg.dissipative_steps;
  const DensityMatrix rho1_0(enumerate_sector(cfg.d, 1), phi * phi.adjoint());
  const DissipativeTrajectory traj = propagate_dissipative_mean_field(rho1_0, ctx.h, cfg.n, cfg.grid, opts);
  Recorder rec(cfg, Engine::dissipative,
               {"trace", "min_eigenvalue", "min_kossakowski_eigenvalue", "quadrature_error"});
  const Reference* ref = reference(ctx);
  json snapshots = json::array();
  double worst_trace = 0.0;
  double worst_eig = 0.0;
  double worst_koss = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Matrix& r1 = traj.states[k].matrix();
    const Matrix c = mean_field_potential(r1, ctx.h.h2).coeffs();
    const double n = cfg.n;
    const double energy = n * (ctx.h.h1.coeffs() * r1).trace().real() +
                          0.5 * n * (n - 1.0) * (c * r1).trace().real();
    const DissipativeDiagnostics& dg = traj.diagnostics[k];
    rec.add(traj.times[k], Sample{r1, r1, energy}, ref != nullptr ? &ref->rho1[k] : nullptr,
            {dg.trace, dg.min_eigenvalue, dg.min_kossakowski_eigenvalue, dg.quadrature_error});
    worst_trace = std::max(worst_trace, std::abs(dg.trace - 1.0));
    worst_eig = std::min(worst_eig, dg.min_eigenvalue);
    worst_koss = std::min(worst_koss, dg.min_kossakowski_eigenvalue);
    if (cfg.observables.snapshots)
      snapshots.push_back({{"time", traj.times[k]}, {"rho", io::density_to_json(traj.states[k])}});
  }
  json diag = rec.summary();
  diag["reduced_order"] = 1;
  diag["max_trace_drift"] = worst_trace;
  diag["min_eigenvalue"] = worst_eig;
  diag["min_kossakowski_eigenvalue"] = worst_koss;
  if (!snapshots.empty()) {
    const fs::path p = snapshot_path(cfg, Engine::dissipative, "_snapshots.json");
    io::write_json_file(p, snapshots);
    diag["snapshots"] = p.filename().string();
  }
  return {Engine::dissipative, rec.path(), diag};
}

}  // namespace

std::string engine_name(Engine e) {
  switch (e) {
    case Engine::exact: return "exact";
    case Engine::bbgky_check: return "bbgky_check";
    case Engine::mean_field: return "mean_field";
    case Engine::gpe: return "gpe";
    case Engine::dissipative: return "dissipative";
  }
  return "unknown";
}

static ScenarioConfig parse_config_impl(const json& doc, const fs::path& base) {
  check_keys(doc, "config", {"d", "N", "M", "h1", "h2", "initial_state", "grid", "engines",
                             "observables", "output", "quadrature", "dissipative", "bbgky_check",
                             "seed"});
  ScenarioConfig cfg;
  cfg.source = doc;
  if (!doc.contains("d") || !doc.contains("N")) throw ConfigError("config: 'd' and 'N' are required");
  cfg.d = get_or(doc, "d", 0);
  cfg.n = get_or(doc, "N", 0);
  cfg.m = get_or(doc, "M", 1);
  if (cfg.d < 1) throw ConfigError("d must be >= 1");
  if (cfg.n < 1) throw ConfigError("N must be >= 1");
  if (cfg.m < 1 || cfg.m > cfg.n) throw ConfigError("M must satisfy 1 <= M <= N");
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  cfg.h1 = parse_h1(doc.value("h1", json::object()), cfg.d, base);
  cfg.h2 = parse_h2(doc.value("h2", json::object()), cfg.d, base);
  if (!doc.contains("initial_state")) throw ConfigError("config: 'initial_state' is required");
  cfg.initial = parse_initial(doc.at("initial_state"), cfg.d, cfg.n, cfg.seed, base);

  const json grid = doc.value("grid", json::object());
  check_keys(grid, "grid", {"t0", "t1", "dt_out"});
  try {
    cfg.grid = TimeGrid(get_or(grid, "t0", 0.0), get_or(grid, "t1", 1.0), get_or(grid, "dt_out", 0.1));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }

  if (doc.contains("engines")) {
    cfg.engines.clear();
    std::set<std::string> seen;
    for (const auto& e : doc.at("engines")) {
      if (!e.is_string()) throw ConfigError("engines: expected names");
      if (!seen.insert(e.get<std::string>()).second)
        throw ConfigError("engines: '" + e.get<std::string>() + "' listed twice");
      cfg.engines.push_back(engine_from(e.get<std::string>()));
    }
    if (cfg.engines.empty()) throw ConfigError("engines: empty list");
  }
  cfg.observables = parse_observables(doc.value("observables", json::object()));
  const json out = doc.value("output", json::object());
  check_keys(out, "output", {"directory", "prefix"});
  cfg.output_dir = base / get_or<std::string>(out, "directory", ".");
  cfg.prefix = get_or<std::string>(out, "prefix", "run");
  if (cfg.prefix.empty() || cfg.prefix.find('/') != std::string::npos)
    throw ConfigError("output: prefix must be a plain file stem");
  cfg.quadrature = parse_quadrature(doc.value("quadrature", json::object()));
  const json diss = doc.value("dissipative", json::object());
  check_keys(diss, "dissipative", {"steps_per_output"});
  cfg.dissipative_steps = get_or(diss, "steps_per_output", cfg.dissipative_steps);
  if (cfg.dissipative_steps < 1) throw ConfigError("dissipative: steps_per_output must be >= 1");
  const json bb = doc.value("bbgky_check", json::object());
  check_keys(bb, "bbgky_check", {"dt"});
  cfg.bbgky_dt = get_or(bb, "dt", cfg.bbgky_dt);
  if (!(cfg.bbgky_dt > 0.0)) throw ConfigError("bbgky_check: dt must be positive");
  return cfg;
}

ScenarioConfig parse_config(const json& doc, const fs::path& base) {
  try {
    return parse_config_impl(doc, base);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ScenarioConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(io::read_json_file(path), path.parent_path());
}

Hamiltonian build_hamiltonian(const ScenarioConfig& cfg) {
  Matrix h1;
  switch (cfg.h1.kind) {
    case OneBodySpec::Kind::tight_binding:
      h1 = tight_binding(cfg.d, cfg.h1.hopping, cfg.h1.tilt, cfg.h1.boundary).coeffs();
      break;
    case OneBodySpec::Kind::harmonic: {
      h1 = tight_binding(cfg.d, cfg.h1.hopping, cfg.h1.tilt, Boundary::open).coeffs();
      const double a = cfg.h1.spacing;
      const double mass = 1.0 / (2.0 * cfg.h1.hopping * a * a);
      const double centre = 0.5 * (cfg.d - 1);
      for (int x = 0; x < cfg.d; ++x) {
        const double r = a * (x - centre);
        h1(x, x) += 0.5 * mass * cfg.h1.omega * cfg.h1.omega * r * r;
      }
      break;
    }
    case OneBodySpec::Kind::matrix:
      h1 = cfg.h1.matrix;
      break;
  }
  TwoBodyOperator h2 = TwoBodyOperator::zero(cfg.d);
  if (cfg.h2.kind == TwoBodySpec::Kind::contact) h2 = TwoBodyOperator::contact(cfg.d, cfg.h2.g);
  if (cfg.h2.kind == TwoBodySpec::Kind::tensor) h2 = TwoBodyOperator(cfg.h2.tensor, HermiticityPolicy::require);
  return Hamiltonian(OneBodyOperator(h1), h2);
}

std::optional<Vector> initial_orbital(const ScenarioConfig& cfg) {
  switch (cfg.initial.kind) {
    case InitialStateSpec::Kind::product:
    case InitialStateSpec::Kind::random_product:
      return cfg.initial.orbital;
    case InitialStateSpec::Kind::fock: {
      const auto& occ = cfg.initial.occupations;
      const auto it = std::find(occ.begin(), occ.end(), cfg.n);
      if (it == occ.end()) return std::nullopt;
      Vector e = Vector::Zero(cfg.d);
      e(it - occ.begin()) = 1.0;
      return e;
    }
    case InitialStateSpec::Kind::explicit_state:
      return std::nullopt;
  }
  return std::nullopt;
}

DensityMatrix build_initial_state(const ScenarioConfig& cfg) {
  const BasisPtr b = enumerate_sector(cfg.d, cfg.n);
  const auto dim = static_cast<Eigen::Index>(b->size());
  switch (cfg.initial.kind) {
    case InitialStateSpec::Kind::product:
    case InitialStateSpec::Kind::random_product:
      return product_state_density(ProductStateAmplitudes(cfg.initial.orbital), cfg.n);
    case InitialStateSpec::Kind::fock:
      return DensityMatrix::pure(SectorVector::basis_state(b, FockState{cfg.initial.occupations}));
    case InitialStateSpec::Kind::explicit_state:
      if (cfg.initial.amplitudes.size() > 0) {
        if (cfg.initial.amplitudes.size() != dim)
          throw ConfigError("initial_state: amplitudes length " + std::to_string(cfg.initial.amplitudes.size()) +
                            " != sector dimension " + std::to_string(dim));
        return DensityMatrix::pure(SectorVector(b, cfg.initial.amplitudes));
      }
      if (cfg.initial.density.rows() != dim || cfg.initial.density.cols() != dim)
        throw ConfigError("initial_state: density is not dim x dim with dim = " + std::to_string(dim));
      try {
        return DensityMatrix(b, cfg.initial.density);
      } catch (const NumericalError& e) {
        throw ConfigError(std::string("initial_state: ") + e.what());
      }
  }
  throw ConfigError("initial_state: unsupported");
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> report;
  for (Engine e : cfg.engines) {
    const bool mf = e == Engine::mean_field || e == Engine::gpe || e == Engine::dissipative;
    if (mf && !is_product_type(cfg))
      throw ConfigError(engine_name(e) + " needs a product initial state");
    if (e == Engine::gpe) {
      if (cfg.h1.kind != OneBodySpec::Kind::tight_binding)
        throw ConfigError("gpe needs a tight_binding h1");
      if (cfg.h2.kind == TwoBodySpec::Kind::tensor) throw ConfigError("gpe needs a contact h2");
      if (cfg.h1.hopping <= 0.0) throw ConfigError("gpe needs J > 0");
    }
    if (e == Engine::dissipative && cfg.n < 2) throw ConfigError("dissipative needs N >= 2");
    if (e == Engine::bbgky_check && cfg.n < 2) throw ConfigError("bbgky_check needs N >= 2");
    if (e == Engine::dissipative && cfg.m != 1)
      report.push_back("warning: dissipative engine reports single-particle quantities (M = 1)");
  }
  const Hamiltonian h = build_hamiltonian(cfg);
  (void)h;
  std::string dims = "dim(d,M)=" + std::to_string(sector_dimension(cfg.d, cfg.m));
  if (needs_exact_sector(cfg)) {
    const DensityMatrix rho0 = build_initial_state(cfg);  // enforces the cap
    dims = "dim(d,N)=" + std::to_string(rho0.basis()->size()) + " " + dims;
  } else {
    dims = "dim(d,N)=" + std::to_string(sector_dimension(cfg.d, cfg.n)) + " (not built) " + dims;
  }
  report.insert(report.begin(), "OK d=" + std::to_string(cfg.d) + " N=" + std::to_string(cfg.n) +
                                    " M=" + std::to_string(cfg.m) + " " + dims);
  return report;
}

RunResult run(const ScenarioConfig& cfg) {
  for (const std::string& line : validate(cfg))
    if (line.rfind("warning: ", 0) == 0) warn(line.substr(9));
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create " + cfg.output_dir.string() + ": " + ec.message());

  Context ctx{cfg, build_hamiltonian(cfg), std::nullopt, std::nullopt, std::nullopt};
  if (needs_exact_sector(cfg)) ctx.rho0 = build_initial_state(cfg);

  RunResult result;
  for (Engine e : cfg.engines) {
    switch (e) {
      case Engine::exact:
      case Engine::bbgky_check:
        result.engines.push_back(run_exact(ctx, e));
        break;
      case Engine::mean_field: {
        const MeanFieldTrajectory traj =
            propagate_mean_field(MeanFieldState(*initial_orbital(cfg)), ctx.h, cfg.n, cfg.grid);
        result.engines.push_back(record_mean_field(ctx, e, traj));
        break;
      }
      case Engine::gpe: {
        const MeanFieldTrajectory traj =
            propagate_gpe(lattice_of(cfg), MeanFieldState(*initial_orbital(cfg)), cfg.n, cfg.grid);
        result.engines.push_back(record_mean_field(ctx, e, traj));
        break;
      }
      case Engine::dissipative:
        result.engines.push_back(run_dissipative(ctx, *initial_orbital(cfg)));
        break;
    }
  }

  json engines = json::array();
  for (const EngineSummary& s : result.engines) {
    engines.push_back({{"engine", engine_name(s.engine)},
                       {"equation", equation_of(s.engine)},
                       {"csv", s.csv.filename().string()},
                       {"diagnostics", s.diagnostics}});
  }
  json bases = json::object();
  if (ctx.rho0) bases["N"] = io::basis_to_json(ctx.rho0->sector());
  if (cfg.d * cfg.m <= 64) bases["M"] = io::basis_to_json(*enumerate_sector(cfg.d, cfg.m));
  const json manifest{
      {"program", "rdyn"},
      {"version", kVersion},
      {"config", cfg.source},
      {"columns", observable_columns(cfg)},
      {"tolerances",
       {{"mean_field_snapshot", MeanFieldOptions{}.snapshot_tolerance},
        {"mean_field_norm_per_unit_time", MeanFieldOptions{}.norm_tolerance},
        {"quadrature", cfg.quadrature.tolerance},
        {"occupation_sum", kSumTolerance}}},
      {"engines", engines},
      {"bases", bases},
  };
  result.manifest = cfg.output_dir / (cfg.prefix + "_manifest.json");
  io::write_json_file(result.manifest, manifest);
  return result;
}

std::vector<double> momentum_distribution(const Matrix& rho1, int n_total) {
  const auto d = rho1.rows();
  Matrix f(d, d);
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index x = 0; x < d; ++x)
      f(k, x) = std::exp(-kI * (2.0 * std::numbers::pi * static_cast<double>(k * x) /
                                static_cast<double>(d))) /
                std::sqrt(static_cast<double>(d));
  const Matrix rk = f * rho1 * f.adjoint();
  std::vector<double> p(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) p[static_cast<std::size_t>(k)] = n_total * rk(k, k).real();
  return p;
}

std::vector<double> bbgky_consistency(const Hamiltonian& h, const SpectralPropagator& prop,
                                      const DensityMatrix& rho0, double t, double dt) {
  const BasisPtr& b = rho0.basis();
  const int n = b->particles();
  const auto at = [&](double s) {
    const Matrix u = prop.unitary(s);
    return DensityMatrix::unchecked(b, u * rho0.matrix() * u.adjoint());
  };
  const DensityMatrix now = at(t);
  const DensityMatrix plus = at(t + dt);
  const DensityMatrix minus = at(t - dt);
  std::vector<double> errs;
  for (int m = 1; m < n; ++m) {
    const Matrix fd = (partial_trace_map(plus.as_operator(), m) - partial_trace_map(minus.as_operator(), m)) / (2.0 * dt);
    const DensityMatrix rm = DensityMatrix::unchecked(enumerate_sector(b->modes(), m), partial_trace_map(now.as_operator(), m));
    const DensityMatrix rm1 = DensityMatrix::unchecked(enumerate_sector(b->modes(), m + 1),
                                                       partial_trace_map(now.as_operator(), m + 1));
    const Matrix rhs = -kI * bbgky_rhs(rm, rm1, h, n);
    const double scale = rhs.norm();
    errs.push_back(scale > 0.0 ? (fd - rhs).norm() / scale : (fd - rhs).norm());
  }
  return errs;
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "error[config]: " << e.what() << '\n';
    return 2;
  } catch (const CapExceeded& e) {
    err << "error[cap]: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    err << "error[numerical]: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    err << "error[config]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error[numerical]: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace rdyn::harness
