#pragma once

// Exact propagation of the N-particle von Neumann equation
//   d rho / dt = -i [H, rho]    (hbar = 1)
// in a fixed-N sector, and interaction-picture transformations with respect to
// the single-particle part of H.

#include <vector>

#include "rdyn/second_quant.hpp"

namespace rdyn {

struct Hamiltonian {
  OneBodyOperator h1;
  TwoBodyOperator h2;

  // Throws std::invalid_argument on mode mismatch or non-Hermitian h1.
  Hamiltonian(OneBodyOperator one, TwoBodyOperator two);

  int modes() const { return h1.modes(); }
  SectorOperator one_body_matrix(BasisPtr basis) const { return embed_one_body(h1, basis); }
  SectorOperator two_body_matrix(BasisPtr basis) const { return embed_two_body(h2, basis); }
  SectorOperator sector_matrix(BasisPtr basis) const;
};

// Output times t0, t0 + dt_out, ..., up to t1.
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 0.0;
  double dt_out = 1.0;

  TimeGrid() = default;
  TimeGrid(double start, double stop, double step);
  std::vector<double> times() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
};

// exp(-i H t) for Hermitian H via eigendecomposition.
Matrix unitary_exp(const Matrix& hermitian, double t);

// Eigendecomposition of a sector Hamiltonian, reusable across times.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const Matrix& hermitian);
  Matrix unitary(double t) const;
  const Eigen::VectorXd& energies() const { return energies_; }

 private:
  Eigen::VectorXd energies_;
  Matrix vectors_;
};

Trajectory propagate_von_neumann(const Hamiltonian& h, const DensityMatrix& rho0,
                                 const TimeGrid& grid);

// Fixed-step classical Runge-Kutta integration of the same equation;
// `steps_per_output` steps between consecutive output times.
Trajectory propagate_von_neumann_rk4(const Hamiltonian& h, const DensityMatrix& rho0,
                                     const TimeGrid& grid, int steps_per_output);

// -i [H, rho]
Matrix von_neumann_rhs(const Matrix& h, const Matrix& rho);

// U1(t) = exp(-i h1 t) on a single particle.
Matrix single_particle_propagator(const OneBodyOperator& h1, double t);

// X_I = U1^dag(t) X U1(t), U1 embedded in the operator's sector.
SectorOperator to_interaction_picture(const SectorOperator& x, const OneBodyOperator& h1, double t);
SectorOperator from_interaction_picture(const SectorOperator& x, const OneBodyOperator& h1,
                                        double t);
DensityMatrix to_interaction_picture(const DensityMatrix& rho, const OneBodyOperator& h1, double t);
DensityMatrix from_interaction_picture(const DensityMatrix& rho, const OneBodyOperator& h1,
                                       double t);

}  // namespace rdyn
