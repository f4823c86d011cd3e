#pragma once

// Scenario configuration, engine orchestration, observables and file output.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdyn/dissipator.hpp"

namespace rdyn::harness {

enum class Engine { exact, bbgky_check, mean_field, gpe, dissipative };

std::string engine_name(Engine e);

struct OneBodySpec {
  enum class Kind { tight_binding, harmonic, matrix } kind = Kind::tight_binding;
  double hopping = 1.0;
  double tilt = 0.0;
  Boundary boundary = Boundary::open;
  double omega = 0.0;  // harmonic: V_x = 1/2 m omega^2 (a (x - x_c))^2, m = 1/(2 J a^2)
  double spacing = 1.0;
  Matrix matrix;       // explicit coefficients
};

struct TwoBodySpec {
  enum class Kind { none, contact, tensor } kind = Kind::none;
  double g = 0.0;
  Tensor4 tensor;
};

struct InitialStateSpec {
  enum class Kind { product, random_product, fock, explicit_state } kind = Kind::product;
  Vector orbital;                // product and random_product (after seeding)
  std::vector<int> occupations;  // fock
  Vector amplitudes;             // explicit pure state in the (d, N) basis
  Matrix density;                // explicit mixed state in the (d, N) basis
};

struct ObservableSet {
  bool occupations = true;
  bool momentum = true;
  bool purity = true;
  bool trace_distance = true;
  bool energy = true;
  bool natural_orbitals = true;
  bool snapshots = true;  // JSON density snapshots and orbital CSVs

  bool any() const {
    return occupations || momentum || purity || trace_distance || energy || natural_orbitals;
  }
};

struct ScenarioConfig {
  int d = 2;
  int n = 2;
  int m = 1;
  OneBodySpec h1;
  TwoBodySpec h2;
  InitialStateSpec initial;
  TimeGrid grid{0.0, 1.0, 0.1};
  std::vector<Engine> engines{Engine::exact};
  ObservableSet observables;
  std::filesystem::path output_dir = ".";
  std::string prefix = "run";
  QuadratureSpec quadrature;
  int dissipative_steps = 20;
  double bbgky_dt = 1e-4;
  std::uint64_t seed = 0;
  nlohmann::json source;  // the document as read, echoed in the manifest
};

// Parses and checks a config document. Relative file references resolve
// against `base`. Throws ConfigError; never touches the filesystem for output.
ScenarioConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base = ".");
ScenarioConfig load_config(const std::filesystem::path& path);

Hamiltonian build_hamiltonian(const ScenarioConfig& cfg);

// The (d, N) initial state; product states are built from their orbital.
DensityMatrix build_initial_state(const ScenarioConfig& cfg);

// The single-particle orbital for product-type initial states, empty otherwise.
std::optional<Vector> initial_orbital(const ScenarioConfig& cfg);

// Dry run: dimension caps, Hermiticity, normalization, engine requirements.
// Returns the report lines; throws the same errors as run.
std::vector<std::string> validate(const ScenarioConfig& cfg);

struct EngineSummary {
  Engine engine;
  std::filesystem::path csv;
  nlohmann::json diagnostics;
};

struct RunResult {
  std::vector<EngineSummary> engines;
  std::filesystem::path manifest;
};

RunResult run(const ScenarioConfig& cfg);

// p_k = Tr{a^dag_k a_k rho} with a_k = d^{-1/2} sum_x e^{-i 2 pi k x / d} a_x.
std::vector<double> momentum_distribution(const Matrix& rho1, int n_total);

// Relative Frobenius error between the central difference of Tr_{N-M} rho(t)
// and the hierarchy right-hand side, for M = 1 .. N-1.
std::vector<double> bbgky_consistency(const Hamiltonian& h, const SpectralPropagator& prop,
                                      const DensityMatrix& rho0, double t, double dt);

// Maps exceptions to exit codes 2/3/4 and prints one reason line to `err`.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace rdyn::harness
