#include "rdyn/hierarchy.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rdyn/log.hpp"

namespace rdyn {

MeanFieldState::MeanFieldState(Vector phi, double tol) : phi_(std::move(phi)) {
  if (phi_.size() < 1) throw std::invalid_argument("mean-field state needs at least one mode");
  if (std::abs(phi_.squaredNorm() - 1.0) > tol) {
    throw std::invalid_argument("mean-field state not normalized");
  }
}

MeanFieldState MeanFieldState::normalized(const Vector& phi) {
  const double n = phi.norm();
  if (n == 0.0) throw std::invalid_argument("cannot normalize the zero vector");
  return MeanFieldState(phi / n);
}

DensityMatrix MeanFieldState::density() const {
  return DensityMatrix(enumerate_sector(modes(), 1), projector());
}

void LatticeConfig::validate() const {
  if (sites < 2) throw std::invalid_argument("lattice needs at least two sites");
  if (!(spacing > 0.0)) throw std::invalid_argument("lattice spacing must be positive");
  if (!(mass > 0.0)) throw std::invalid_argument("particle mass must be positive");
}

OneBodyOperator tight_binding(int sites, double hopping, double tilt, Boundary boundary) {
  if (sites < 2) throw std::invalid_argument("lattice needs at least two sites");
  Matrix h = Matrix::Zero(sites, sites);
  for (int x = 0; x < sites; ++x) h(x, x) = tilt * x;
  for (int x = 0; x + 1 < sites; ++x) {
    h(x, x + 1) -= hopping;
    h(x + 1, x) -= hopping;
  }
  if (boundary == Boundary::periodic) {
    h(0, sites - 1) -= hopping;
    h(sites - 1, 0) -= hopping;
  }
  return OneBodyOperator(std::move(h));
}

OneBodyOperator lattice_one_body(const LatticeConfig& lattice) {
  lattice.validate();
  const double j = lattice.hopping();
  Matrix h = tight_binding(lattice.sites, j, lattice.tilt, lattice.boundary).coeffs();
  for (int x = 0; x < lattice.sites; ++x) h(x, x) += 2.0 * j;
  return OneBodyOperator(std::move(h));
}

TwoBodyOperator lattice_contact(const LatticeConfig& lattice) {
  return TwoBodyOperator::contact(lattice.sites, lattice.onsite_g);
}

Matrix bbgky_rhs(const DensityMatrix& rho_m, const DensityMatrix& rho_m1, const Hamiltonian& h,
                 int n_total) {
  const int m = rho_m.sector().particles();
  const int d = rho_m.sector().modes();
  if (m < 1) throw std::invalid_argument("bbgky_rhs: M must be at least 1");
  if (m >= n_total) throw std::invalid_argument("bbgky_rhs: M must be smaller than N");
  if (rho_m1.sector().particles() != m + 1 || rho_m1.sector().modes() != d || h.modes() != d) {
    throw std::invalid_argument("bbgky_rhs: sector mismatch");
  }
  const Matrix traced = partial_trace_map(rho_m1.as_operator(), m);
  const double gap = max_abs(traced - rho_m.matrix());
  if (gap > 1e-8) {
    char buf[120];
    std::snprintf(buf, sizeof buf, "bbgky_rhs: rho^(M) differs from Tr_1 rho^(M+1) by %.3e", gap);
    warn(buf);
  }
  const double k = n_total - m;
  const Matrix h1m = h.one_body_matrix(rho_m.basis()).matrix;
  const Matrix h2m = h.two_body_matrix(rho_m.basis()).matrix;
  const Matrix h2m1 = h.two_body_matrix(rho_m1.basis()).matrix;
  const Matrix inner = commutator(h2m1, rho_m1.matrix());
  return commutator(h1m + (1.0 - k) * h2m, rho_m.matrix()) +
         k * partial_trace_map(SectorOperator(rho_m1.basis(), inner), m);
}

Matrix truncated_bbgky_rhs(const DensityMatrix& rho_m, const DensityMatrix& rho1,
                           const Hamiltonian& h, int n_total) {
  const int m = rho_m.sector().particles();
  if (rho1.sector().particles() != 1) throw std::invalid_argument("rho1 must be single-particle");
  if (m < 1 || m > n_total) throw std::invalid_argument("truncated_bbgky_rhs: bad M");
  const OneBodyOperator c = mean_field_potential(rho1, h.h2);
  const Matrix gen = h.sector_matrix(rho_m.basis()).matrix +
                     static_cast<double>(n_total - m) * embed_one_body(c, rho_m.basis()).matrix;
  return commutator(gen, rho_m.matrix());
}

OneBodyOperator mean_field_potential(const Matrix& rho1, const TwoBodyOperator& h2) {
  const int d = h2.modes();
  if (rho1.rows() != d || rho1.cols() != d) {
    throw std::invalid_argument("mean_field_potential: mode mismatch");
  }
  Matrix c = Matrix::Zero(d, d);
  for (int n = 0; n < d; ++n)
    for (int m = 0; m < d; ++m) {
      cplx s = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s += h2(n, j, i, m) * rho1(i, j);
      c(n, m) = s;
    }
  return OneBodyOperator(std::move(c));
}

OneBodyOperator mean_field_potential(const DensityMatrix& rho1, const TwoBodyOperator& h2) {
  if (rho1.sector().particles() != 1) throw std::invalid_argument("rho1 must be single-particle");
  return mean_field_potential(rho1.matrix(), h2);
}

OneBodyOperator mean_field_potential_interaction(double t1, const DensityMatrix& rho1_i,
                                                 const TwoBodyOperator& h2,
                                                 const OneBodyOperator& h1) {
  if (h1.modes() != h2.modes()) throw std::invalid_argument("mode mismatch");
  const TwoBodyOperator rotated = h2.rotated(single_particle_propagator(h1, t1));
  return mean_field_potential(rho1_i, rotated);
}

Matrix effective_hamiltonian(const Hamiltonian& h, const Vector& phi, int n_total) {
  const Matrix rho = phi * phi.adjoint();
  return h.h1.coeffs() +
         static_cast<double>(n_total - 1) * mean_field_potential(rho, h.h2).coeffs();
}

namespace {

double row_sum_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

// Adaptive fixed-step RK4 driver for i dphi/dt = H_eff(phi) phi. `apply`
// returns H_eff(phi) phi and `bound` an estimate of ||H_eff(phi)||.
template <class Apply, class Bound>
MeanFieldTrajectory drive(const MeanFieldState& phi0, const TimeGrid& grid,
                          const MeanFieldOptions& opts, Apply apply, Bound bound) {
  auto rhs = [&](const Vector& v) -> Vector { return -kI * apply(v); };
  auto integrate = [&](const Vector& start, double span, long steps) {
    Vector v = start;
    const double dt = span / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
      const Vector k1 = rhs(v);
      const Vector k2 = rhs(v + 0.5 * dt * k1);
      const Vector k3 = rhs(v + 0.5 * dt * k2);
      const Vector k4 = rhs(v + dt * k3);
      v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return v;
  };

  MeanFieldTrajectory traj;
  const auto times = grid.times();
  Vector phi = phi0.phi();
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (n > 0) {
      const double span = times[n] - times[n - 1];
      long steps = std::max(1L, static_cast<long>(std::ceil(span * bound(phi) / opts.step_fraction)));
      Vector coarse = integrate(phi, span, steps);
      Vector fine;
      int doublings = 0;
      while (true) {
        fine = integrate(phi, span, 2 * steps);
        traj.steps += 3 * steps;
        if ((fine - coarse).cwiseAbs().maxCoeff() <= opts.snapshot_tolerance) break;
        if (++doublings > opts.max_doublings) {
          throw NumericalError("mean-field integrator: step-size underflow");
        }
        steps *= 2;
        coarse = std::move(fine);
      }
      const double defect = std::abs(fine.norm() - 1.0);
      if (defect > opts.norm_tolerance * std::max(1.0, span)) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "mean-field integrator: norm drift %.3e over one interval",
                      defect);
        throw NumericalError(buf);
      }
      traj.accumulated_norm_defect += defect;
      phi = opts.renormalize ? Vector(fine / fine.norm()) : fine;
    }
    traj.times.push_back(times[n]);
    traj.states.emplace_back(phi, std::numeric_limits<double>::infinity());
  }
  return traj;
}

}  // namespace

MeanFieldTrajectory propagate_mean_field(const MeanFieldState& phi0, const Hamiltonian& h,
                                         int n_total, const TimeGrid& grid,
                                         const MeanFieldOptions& opts) {
  if (phi0.modes() != h.modes()) throw std::invalid_argument("mode mismatch");
  if (n_total < 1) throw std::invalid_argument("particle number must be positive");
  return drive(
      phi0, grid, opts,
      [&](const Vector& v) -> Vector { return effective_hamiltonian(h, v, n_total) * v; },
      [&](const Vector& v) { return row_sum_norm(effective_hamiltonian(h, v, n_total)); });
}

MeanFieldTrajectory propagate_gpe(const LatticeConfig& lattice, const MeanFieldState& phi0,
                                  int n_total, const TimeGrid& grid,
                                  const MeanFieldOptions& opts) {
  lattice.validate();
  const int l = lattice.sites;
  if (phi0.modes() != l) throw std::invalid_argument("state does not live on the lattice");
  const double j = lattice.hopping();
  const double gn = lattice.onsite_g * static_cast<double>(n_total - 1);
  const bool periodic = lattice.boundary == Boundary::periodic;

  auto neighbour = [&](const Vector& v, int x) -> cplx {
    if (x < 0) return periodic ? v(l - 1) : cplx(0.0);
    if (x >= l) return periodic ? v(0) : cplx(0.0);
    return v(x);
  };
  auto apply = [&](const Vector& v) -> Vector {
    Vector out(l);
    for (int x = 0; x < l; ++x) {
      const cplx lap = neighbour(v, x + 1) - 2.0 * v(x) + neighbour(v, x - 1);
      out(x) = -j * lap + (lattice.tilt * x + gn * std::norm(v(x))) * v(x);
    }
    return out;
  };
  auto bound = [&](const Vector& v) {
    double b = 0.0;
    for (int x = 0; x < l; ++x) {
      int links = 2;
      if (!periodic && (x == 0 || x == l - 1)) links = 1;
      const double diag = std::abs(2.0 * j + lattice.tilt * x + gn * std::norm(v(x)));
      b = std::max(b, diag + links * j);
    }
    return b;
  };
  return drive(phi0, grid, opts, apply, bound);
}

double gpe_energy(const LatticeConfig& lattice, const Vector& phi, int n_total) {
  const Matrix h1 = lattice_one_body(lattice).coeffs();
  double e = (phi.adjoint() * h1 * phi)(0, 0).real();
  double quartic = 0.0;
  for (Eigen::Index x = 0; x < phi.size(); ++x) quartic += std::pow(std::norm(phi(x)), 2);
  return e + 0.5 * lattice.onsite_g * static_cast<double>(n_total - 1) * quartic;
}

double mean_field_energy(const Hamiltonian& h, const Vector& phi, int n_total) {
  const Matrix c = mean_field_potential(Matrix(phi * phi.adjoint()), h.h2).coeffs();
  const double one = (phi.adjoint() * h.h1.coeffs() * phi)(0, 0).real();
  const double two = (phi.adjoint() * c * phi)(0, 0).real();
  return n_total * (one + 0.5 * (n_total - 1) * two);
}

MeanFieldState self_consistent_state(const Hamiltonian& h, int n_total, const Vector& guess,
                                     double tolerance, int max_iterations) {
  Vector phi = guess / guess.norm();
  double mixing = 0.5;
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix heff = effective_hamiltonian(h, phi, n_total);
    const cplx mu = (phi.adjoint() * heff * phi)(0, 0);
    if ((heff * phi - mu * phi).norm() < tolerance) return MeanFieldState(phi);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (heff + heff.adjoint()));
    Vector ground = es.eigenvectors().col(0);
    const cplx overlap = ground.dot(phi);
    if (std::abs(overlap) > 0.0) ground *= overlap / std::abs(overlap);
    Vector next = (1.0 - mixing) * phi + mixing * ground;
    phi = next / next.norm();
    if (it % 500 == 499) mixing *= 0.5;
  }
  throw NumericalError("self-consistent mean-field iteration did not converge");
}

}  // namespace rdyn
