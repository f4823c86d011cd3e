#include "rdyn/exact_engine.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace rdyn {

Hamiltonian::Hamiltonian(OneBodyOperator one, TwoBodyOperator two)
    : h1(std::move(one)), h2(std::move(two)) {
  if (h1.modes() != h2.modes()) throw std::invalid_argument("h1 and h2 mode counts differ");
  if (!h1.is_hermitian()) throw std::invalid_argument("h1 not Hermitian");
}

SectorOperator Hamiltonian::sector_matrix(BasisPtr basis) const {
  SectorOperator out = one_body_matrix(basis);
  out.matrix += two_body_matrix(basis).matrix;
  return out;
}

TimeGrid::TimeGrid(double start, double stop, double step) : t0(start), t1(stop), dt_out(step) {
  if (!(step > 0.0)) throw std::invalid_argument("time step must be positive");
  if (stop < start) throw std::invalid_argument("time grid ends before it starts");
}

std::vector<double> TimeGrid::times() const {
  const double span = (t1 - t0) / dt_out;
  const auto count = static_cast<long>(std::floor(span + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  for (long k = 0; k <= count; ++k) out.push_back(t0 + static_cast<double>(k) * dt_out);
  return out;
}

SpectralPropagator::SpectralPropagator(const Matrix& hermitian) {
  const double defect = hermiticity_defect(hermitian);
  if (defect > 1e-10 * std::max(1.0, max_abs(hermitian))) {
    throw NumericalError("propagator generator not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (hermitian + hermitian.adjoint()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  energies_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
}

Matrix SpectralPropagator::unitary(double t) const {
  Vector phases(energies_.size());
  for (Eigen::Index k = 0; k < energies_.size(); ++k) phases(k) = std::exp(-kI * energies_(k) * t);
  return vectors_ * phases.asDiagonal() * vectors_.adjoint();
}

Matrix unitary_exp(const Matrix& hermitian, double t) {
  return SpectralPropagator(hermitian).unitary(t);
}

Trajectory propagate_von_neumann(const Hamiltonian& h, const DensityMatrix& rho0,
                                 const TimeGrid& grid) {
  if (h.modes() != rho0.sector().modes()) throw std::invalid_argument("mode mismatch");
  const SpectralPropagator prop(h.sector_matrix(rho0.basis()).matrix);
  Trajectory traj;
  for (double t : grid.times()) {
    const Matrix u = prop.unitary(t - grid.t0);
    traj.times.push_back(t);
    traj.states.push_back(DensityMatrix::unchecked(rho0.basis(), u * rho0.matrix() * u.adjoint()));
  }
  return traj;
}

Matrix von_neumann_rhs(const Matrix& h, const Matrix& rho) { return -kI * commutator(h, rho); }

Trajectory propagate_von_neumann_rk4(const Hamiltonian& h, const DensityMatrix& rho0,
                                     const TimeGrid& grid, int steps_per_output) {
  if (steps_per_output < 1) throw std::invalid_argument("steps_per_output must be positive");
  const Matrix hm = h.sector_matrix(rho0.basis()).matrix;
  const double dt = grid.dt_out / steps_per_output;
  Matrix rho = rho0.matrix();
  Trajectory traj;
  const auto times = grid.times();
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (n > 0) {
      for (int s = 0; s < steps_per_output; ++s) {
        const Matrix k1 = von_neumann_rhs(hm, rho);
        const Matrix k2 = von_neumann_rhs(hm, rho + 0.5 * dt * k1);
        const Matrix k3 = von_neumann_rhs(hm, rho + 0.5 * dt * k2);
        const Matrix k4 = von_neumann_rhs(hm, rho + dt * k3);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    traj.times.push_back(times[n]);
    traj.states.push_back(DensityMatrix::unchecked(rho0.basis(), rho));
  }
  return traj;
}

Matrix single_particle_propagator(const OneBodyOperator& h1, double t) {
  return unitary_exp(h1.coeffs(), t);
}

namespace {

Matrix sector_propagator(const OneBodyOperator& h1, BasisPtr basis, double t) {
  if (h1.modes() != basis->modes()) throw std::invalid_argument("sector mismatch");
  return unitary_exp(embed_one_body(h1, basis).matrix, t);
}

}  // namespace

SectorOperator to_interaction_picture(const SectorOperator& x, const OneBodyOperator& h1,
                                      double t) {
  const Matrix u = sector_propagator(h1, x.basis, t);
  return SectorOperator(x.basis, u.adjoint() * x.matrix * u);
}

SectorOperator from_interaction_picture(const SectorOperator& x, const OneBodyOperator& h1,
                                        double t) {
  const Matrix u = sector_propagator(h1, x.basis, t);
  return SectorOperator(x.basis, u * x.matrix * u.adjoint());
}

DensityMatrix to_interaction_picture(const DensityMatrix& rho, const OneBodyOperator& h1,
                                     double t) {
  return DensityMatrix::unchecked(rho.basis(),
                                  to_interaction_picture(rho.as_operator(), h1, t).matrix);
}

DensityMatrix from_interaction_picture(const DensityMatrix& rho, const OneBodyOperator& h1,
                                       double t) {
  return DensityMatrix::unchecked(rho.basis(),
                                  from_interaction_picture(rho.as_operator(), h1, t).matrix);
}

}  // namespace rdyn
