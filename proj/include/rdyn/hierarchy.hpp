#pragma once

// Reduced dynamics: the BBGKY right-hand side, its product-state truncation,
// the nonlinear mean-field Schroedinger equation and its lattice
// Gross-Pitaevskii form.

#include <vector>

#include "rdyn/exact_engine.hpp"
#include "rdyn/subsystem.hpp"

namespace rdyn {

class MeanFieldState {
 public:
  // Throws std::invalid_argument unless |norm^2 - 1| <= tol.
  explicit MeanFieldState(Vector phi, double tol = 1e-9);
  static MeanFieldState normalized(const Vector& phi);

  const Vector& phi() const { return phi_; }
  int modes() const { return static_cast<int>(phi_.size()); }
  Matrix projector() const { return phi_ * phi_.adjoint(); }
  DensityMatrix density() const;

 private:
  Vector phi_;
};

enum class Boundary { periodic, open };

// Uniform 1D lattice. Kinetic energy uses the 3-point Laplacian, so the
// hopping is J = hbar^2 / (2 m a^2) and every site carries 2J on the diagonal.
struct LatticeConfig {
  int sites = 2;
  double spacing = 1.0;
  Boundary boundary = Boundary::periodic;
  double tilt = 0.0;      // potential energy step per site, V_x = tilt * x
  double onsite_g = 0.0;  // contact coupling in the site basis
  double mass = 0.5;

  double hopping() const { return 1.0 / (2.0 * mass * spacing * spacing); }
  void validate() const;
};

// -J sum (a^dag_x a_{x+1} + h.c.) + tilt * sum x n_x
OneBodyOperator tight_binding(int sites, double hopping, double tilt, Boundary boundary);

// Discretized -(hbar^2/2m) d^2/dx^2 + V_0(x) of the lattice.
OneBodyOperator lattice_one_body(const LatticeConfig& lattice);
TwoBodyOperator lattice_contact(const LatticeConfig& lattice);

// i dr^(M)/dt = [H1 + (1 - (N - M)) H2, r^(M)] + (N - M) Tr_1{[H2, r^(M+1)]}.
// Warns when r^(M) is not the partial trace of r^(M+1) within 1e-8.
Matrix bbgky_rhs(const DensityMatrix& rho_m, const DensityMatrix& rho_m1, const Hamiltonian& h,
                 int n_total);

// Product-state closure of the hierarchy: [H1 + H2 + (N - M) C(rho1), r^(M)].
// For M > 1 the result carries no information beyond the single-particle
// orbital that generated the product state.
Matrix truncated_bbgky_rhs(const DensityMatrix& rho_m, const DensityMatrix& rho1,
                           const Hamiltonian& h, int n_total);

// C_nm = sum_ij V_{nj;im} rho1_ij
OneBodyOperator mean_field_potential(const Matrix& rho1, const TwoBodyOperator& h2);
OneBodyOperator mean_field_potential(const DensityMatrix& rho1, const TwoBodyOperator& h2);

// Interaction-picture potential C_I(t1, t2): the two-body tensor is rotated to
// time t1; the caller supplies rho1_I(t2).
OneBodyOperator mean_field_potential_interaction(double t1, const DensityMatrix& rho1_i,
                                                 const TwoBodyOperator& h2,
                                                 const OneBodyOperator& h1);

// H1 + (N - 1) C(|phi><phi|)
Matrix effective_hamiltonian(const Hamiltonian& h, const Vector& phi, int n_total);

struct MeanFieldOptions {
  double snapshot_tolerance = 1e-9;  // step-doubling acceptance per output interval
  double step_fraction = 0.05;       // initial dt <= step_fraction / ||H_eff||
  int max_doublings = 24;
  double norm_tolerance = 1e-9;      // per unit time, before renormalization
  bool renormalize = true;
};

struct MeanFieldTrajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
  double accumulated_norm_defect = 0.0;  // sum over intervals of |‖phi‖ - 1|
  long steps = 0;
};

MeanFieldTrajectory propagate_mean_field(const MeanFieldState& phi0, const Hamiltonian& h,
                                         int n_total, const TimeGrid& grid,
                                         const MeanFieldOptions& opts = {});

// Lattice Gross-Pitaevskii equation evaluated directly on the stencil:
// i dphi_x/dt = -J (phi_{x+1} - 2 phi_x + phi_{x-1}) + V_x phi_x + g (N-1) |phi_x|^2 phi_x
MeanFieldTrajectory propagate_gpe(const LatticeConfig& lattice, const MeanFieldState& phi0,
                                  int n_total, const TimeGrid& grid,
                                  const MeanFieldOptions& opts = {});

// Energy functional <h1> + 1/2 g (N-1) sum |phi|^4 (per particle).
double gpe_energy(const LatticeConfig& lattice, const Vector& phi, int n_total);

// Total energy of the N-fold product state: N (<h1> + 1/2 (N-1) <C(phi)>).
double mean_field_energy(const Hamiltonian& h, const Vector& phi, int n_total);

// Fixed-point iteration phi <- ground state of H_eff(phi) with linear mixing.
MeanFieldState self_consistent_state(const Hamiltonian& h, int n_total, const Vector& guess,
                                     double tolerance = 1e-12, int max_iterations = 10000);

}  // namespace rdyn
