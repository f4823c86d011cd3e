#include "rdyn/dissipator.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include <boost/math/quadrature/gauss.hpp>

#include "rdyn/log.hpp"

namespace rdyn {

void QuadratureSpec::validate() const {
  if (substeps < 2) throw std::invalid_argument("quadrature needs at least two substeps");
  if (!(tolerance > 0.0)) throw std::invalid_argument("quadrature tolerance must be positive");
  if (max_doublings < 0) throw std::invalid_argument("max_doublings must be non-negative");
}

namespace {

using GaussRule = boost::math::quadrature::gauss<double, 7>;

Vector flatten(const Tensor4& t) {
  return Eigen::Map<const Vector>(t.data().data(), static_cast<Eigen::Index>(t.data().size()));
}

Tensor4 unflatten(const Vector& v, int d) {
  Tensor4 t(d);
  for (Eigen::Index k = 0; k < v.size(); ++k) t.data()[static_cast<std::size_t>(k)] = v(k);
  return t;
}

Vector trapezoid_midpoints(const std::function<Vector(double)>& f, double a, double h, int n) {
  Vector sum = f(a + 0.5 * h);
  for (int p = 1; p < n; ++p) sum += f(a + (p + 0.5) * h);
  return sum;
}

Vector gauss_panels(const std::function<Vector(double)>& f, double a, double b, int n) {
  const auto& x = GaussRule::abscissa();
  const auto& w = GaussRule::weights();
  const double h = (b - a) / n;
  Vector sum;
  for (int p = 0; p < n; ++p) {
    const double mid = a + (p + 0.5) * h;
    const double r = 0.5 * h;
    Vector panel = w[0] * f(mid);
    for (std::size_t k = 1; k < x.size(); ++k) {
      panel += w[k] * (f(mid - r * x[k]) + f(mid + r * x[k]));
    }
    panel *= r;
    if (p == 0) {
      sum = std::move(panel);
    } else {
      sum += panel;
    }
  }
  return sum;
}

}  // namespace

Vector integrate_fixed(const std::function<Vector(double)>& f, double a, double b,
                       QuadratureRule rule, int substeps) {
  if (substeps < 1) throw std::invalid_argument("integrate_fixed: substeps must be positive");
  if (a == b) return Vector::Zero(f(a).size());
  if (rule == QuadratureRule::gauss) return gauss_panels(f, a, b, substeps);
  const double h = (b - a) / substeps;
  Vector sum = 0.5 * (f(a) + f(b));
  for (int p = 1; p < substeps; ++p) sum += f(a + p * h);
  return h * sum;
}

QuadratureResult integrate(const std::function<Vector(double)>& f, double a, double b,
                           const QuadratureSpec& spec) {
  spec.validate();
  QuadratureResult out;
  if (a == b) {
    out.value = Vector::Zero(f(a).size());
    out.substeps = spec.substeps;
    return out;
  }
  int n = spec.substeps;
  double err = 0.0;
  Vector prev = integrate_fixed(f, a, b, spec.rule, n);
  for (int k = 0; k <= spec.max_doublings; ++k) {
    Vector cur;
    if (spec.rule == QuadratureRule::trapezoid) {
      const double h = (b - a) / n;
      cur = 0.5 * prev + 0.5 * h * trapezoid_midpoints(f, a, h, n);
    } else {
      cur = integrate_fixed(f, a, b, spec.rule, 2 * n);
    }
    n *= 2;
    err = (cur - prev).cwiseAbs().maxCoeff();
    if (err <= spec.tolerance) {
      out.value = std::move(cur);
      out.error_estimate = err;
      out.substeps = n;
      return out;
    }
    prev = std::move(cur);
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "quadrature did not converge (estimate %.3e after %d panels)",
                err, n);
  throw NumericalError(buf);
}

TwoBodyOperator interaction_tensor(const TwoBodyOperator& h2, const OneBodyOperator& h1,
                                   double t) {
  if (h1.modes() != h2.modes()) throw std::invalid_argument("mode mismatch");
  return h2.rotated(single_particle_propagator(h1, t));
}

BOperators::BOperators(const Tensor4& v) : d_(v.modes()), ops_(static_cast<std::size_t>(d_ * d_)) {
  for (int beta = 0; beta < d_; ++beta)
    for (int alpha = 0; alpha < d_; ++alpha) {
      Matrix m(d_, d_);
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) m(i, j) = v(i, beta, j, alpha);
      ops_[static_cast<std::size_t>(beta * d_ + alpha)] = std::move(m);
    }
}

const Matrix& BOperators::operator()(int beta, int alpha) const {
  if (beta < 0 || beta >= d_ || alpha < 0 || alpha >= d_) {
    throw std::out_of_range("B operator index out of range");
  }
  return ops_[static_cast<std::size_t>(beta * d_ + alpha)];
}

OneBodyOperator b_operator(int beta, int alpha, double t, const TwoBodyOperator& h2,
                           const OneBodyOperator& h1) {
  const TwoBodyOperator v = interaction_tensor(h2, h1, t);
  const BOperators b(v.coeffs());
  Matrix out = b(beta, alpha);
#ifndef NDEBUG
  const double adj = max_abs(b(beta, alpha).adjoint() - b(alpha, beta));
  Matrix diag_sum = Matrix::Zero(v.modes(), v.modes());
  for (int a = 0; a < v.modes(); ++a) diag_sum += b(a, a);
  const Matrix traced = partial_trace_map(embed_two_body(v, enumerate_sector(v.modes(), 2)), 1);
  if (adj > 1e-10 || max_abs(diag_sum - traced) > 1e-10) {
    throw NumericalError("B operator identities violated");
  }
#endif
  return OneBodyOperator(std::move(out));
}

OneBodyOperator a_operator(int alpha, int beta, double s, const DensityMatrix& rho1_i,
                           const TwoBodyOperator& h2, const OneBodyOperator& h1) {
  const int d = h2.modes();
  if (rho1_i.sector().particles() != 1 || rho1_i.sector().modes() != d) {
    throw std::invalid_argument("a_operator: rho1 must be a single-particle state on the same modes");
  }
  const BOperators b(interaction_tensor(h2, h1, s).coeffs());
  Matrix out = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) out += b(alpha, k) * rho1_i.matrix()(k, beta);
  return OneBodyOperator(std::move(out));
}

OneBodyOperator a_operator_direct(int alpha, int beta, const Tensor4& v_s, const Matrix& rho1) {
  const int d = v_s.modes();
  if (alpha < 0 || alpha >= d || beta < 0 || beta >= d) {
    throw std::out_of_range("A operator index out of range");
  }
  Matrix out = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) out(i, j) += v_s(i, alpha, j, k) * rho1(k, beta);
  return OneBodyOperator(std::move(out));
}

InteractionIntegral integrate_interaction(const TwoBodyOperator& h2, const OneBodyOperator& h1,
                                          double t, const QuadratureSpec& spec) {
  if (t < 0.0) throw std::invalid_argument("memory integral needs t >= 0");
  const int d = h2.modes();
  InteractionIntegral out;
  out.t = t;
  if (t == 0.0) {
    out.value = Tensor4(d);
    out.coarse = Tensor4(d);
    out.substeps = spec.substeps;
    return out;
  }
  // Diagonalize h1 once; U(s) = W exp(-i E s) W^dag.
  const SpectralPropagator prop(h1.coeffs());
  auto f = [&](double s) { return flatten(h2.rotated(prop.unitary(s)).coeffs()); };
  spec.validate();
  int n = spec.substeps;
  Vector prev = integrate_fixed(f, 0.0, t, spec.rule, n);
  for (int k = 0; k <= spec.max_doublings; ++k) {
    Vector cur;
    if (spec.rule == QuadratureRule::trapezoid) {
      const double h = t / n;
      cur = 0.5 * prev + 0.5 * h * trapezoid_midpoints(f, 0.0, h, n);
    } else {
      cur = integrate_fixed(f, 0.0, t, spec.rule, 2 * n);
    }
    n *= 2;
    const double err = (cur - prev).cwiseAbs().maxCoeff();
    if (err <= spec.tolerance) {
      out.value = unflatten(cur, d);
      out.coarse = unflatten(prev, d);
      out.error_estimate = err;
      out.substeps = n;
      return out;
    }
    prev = std::move(cur);
  }
  throw NumericalError("memory integral did not converge");
}

Tensor4 gamma_from_integral(const Tensor4& integral, const Matrix& rho1, const Tensor4& v_t) {
  const int d = integral.modes();
  Tensor4 tmp(d);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a)
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < d; ++b) {
          cplx s = 0.0;
          for (int m = 0; m < d; ++m) s += integral(i, a, j, m) * rho1(m, b);
          tmp(i, a, j, b) = s;
        }
  Tensor4 g(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          cplx s = 0.0;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) s += tmp(i, a, j, b) * v_t(k, b, l, a);
          g(i, j, k, l) = s;
        }
  return g;
}

GammaTensor gamma_tensor(double t, const DensityMatrix& rho1_i, const TwoBodyOperator& h2,
                         const OneBodyOperator& h1, const QuadratureSpec& spec) {
  const int d = h2.modes();
  if (rho1_i.sector().particles() != 1 || rho1_i.sector().modes() != d) {
    throw std::invalid_argument("gamma_tensor: rho1 must be a single-particle state on the same modes");
  }
  const InteractionIntegral k = integrate_interaction(h2, h1, t, spec);
  const Tensor4 v_t = interaction_tensor(h2, h1, t).coeffs();
  GammaTensor out;
  out.t = t;
  out.entries = gamma_from_integral(k.value, rho1_i.matrix(), v_t);
  out.error_estimate =
      (out.entries - gamma_from_integral(k.coarse, rho1_i.matrix(), v_t)).max_abs();
  out.substeps = k.substeps;
  return out;
}

GammaSplit gamma_s_split(const Tensor4& g) {
  const int d = g.modes();
  GammaSplit out{Tensor4(d), Tensor4(d)};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const cplx a = g(i, j, k, l);
          const cplx b = std::conj(g(l, k, j, i));
          out.gamma(i, j, k, l) = a + b;
          out.s(i, j, k, l) = (a - b) / (2.0 * kI);
        }
  return out;
}

double conjugation_defect(const Tensor4& t) {
  const int d = t.modes();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          worst = std::max(worst, std::abs(t(i, j, k, l) - std::conj(t(l, k, j, i))));
  return worst;
}

Matrix kossakowski_matrix(const Tensor4& gamma) {
  const int d = gamma.modes();
  Matrix k(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int kk = 0; kk < d; ++kk)
        for (int l = 0; l < d; ++l) k(i * d + j, l * d + kk) = gamma(i, j, kk, l);
  return k;
}

UnitOperators::UnitOperators(BasisPtr basis)
    : basis_(std::move(basis)), d_(basis_->modes()), ops_(static_cast<std::size_t>(d_ * d_)) {
  for (int a = 0; a < d_; ++a)
    for (int b = 0; b < d_; ++b) {
      Matrix e = Matrix::Zero(d_, d_);
      e(a, b) = 1.0;
      ops_[static_cast<std::size_t>(a * d_ + b)] =
          embed_one_body(OneBodyOperator(std::move(e)), basis_).matrix;
    }
}

const Matrix& UnitOperators::operator()(int a, int b) const {
  return ops_[static_cast<std::size_t>(a * d_ + b)];
}

Matrix UnitOperators::combine(const Matrix& x) const {
  const auto dim = static_cast<Eigen::Index>(basis_->size());
  Matrix out = Matrix::Zero(dim, dim);
  for (int a = 0; a < d_; ++a)
    for (int b = 0; b < d_; ++b)
      if (x(a, b) != cplx(0.0)) out += x(a, b) * (*this)(a, b);
  return out;
}

namespace {

// sum_ij T_ijkl E_ij for fixed (k, l)
Matrix slice(const Tensor4& t, int k, int l) {
  const int d = t.modes();
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = t(i, j, k, l);
  return m;
}

}  // namespace

SectorOperator lamb_shift(const Tensor4& s, const UnitOperators& units) {
  const double defect = conjugation_defect(s);
  if (defect > 1e-10) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "Lamb-shift tensor lacks conjugation symmetry (%.3e)", defect);
    throw NumericalError(buf);
  }
  const int d = s.modes();
  const auto dim = static_cast<Eigen::Index>(units.basis()->size());
  Matrix h = Matrix::Zero(dim, dim);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) h += units(k, l) * units.combine(slice(s, k, l));
  return SectorOperator(units.basis(), std::move(h));
}

SectorOperator lamb_shift(const Tensor4& s, BasisPtr basis) {
  if (s.modes() != basis->modes()) throw std::invalid_argument("lamb_shift: mode mismatch");
  return lamb_shift(s, UnitOperators(std::move(basis)));
}

Matrix lindblad_dissipator(const Matrix& x, const Tensor4& gamma, const UnitOperators& units) {
  const int d = gamma.modes();
  const auto dim = x.rows();
  Matrix jump = Matrix::Zero(dim, dim);
  Matrix decay = Matrix::Zero(dim, dim);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) {
      const Matrix g = units.combine(slice(gamma, k, l));
      jump += g * x * units(k, l);
      decay += units(k, l) * g;
    }
  return jump - 0.5 * anticommutator(decay, x);
}

Matrix lindblad_form(const Matrix& x, const Tensor4& gamma, const Matrix& h_ls,
                     const UnitOperators& units) {
  return -kI * commutator(h_ls, x) + lindblad_dissipator(x, gamma, units);
}

std::vector<Matrix> integrated_a_operators(const Tensor4& integral, const Matrix& rho1) {
  const int d = integral.modes();
  const BOperators b(integral);
  std::vector<Matrix> out(static_cast<std::size_t>(d * d));
  for (int alpha = 0; alpha < d; ++alpha)
    for (int beta = 0; beta < d; ++beta) {
      Matrix a = Matrix::Zero(d, d);
      for (int k = 0; k < d; ++k) a += b(alpha, k) * rho1(k, beta);
      out[static_cast<std::size_t>(alpha * d + beta)] = std::move(a);
    }
  return out;
}

Matrix hc_form(const Matrix& x, const std::vector<Matrix>& a_bar, const BOperators& b_t,
               const UnitOperators& units) {
  const int d = b_t.modes();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (int alpha = 0; alpha < d; ++alpha)
    for (int beta = 0; beta < d; ++beta) {
      const Matrix a = units.combine(a_bar[static_cast<std::size_t>(alpha * d + beta)]);
      const Matrix b = units.combine(b_t(beta, alpha));
      const Matrix ad = a.adjoint();
      const Matrix bd = b.adjoint();
      out += a * x * b - b * a * x + bd * x * ad - x * ad * bd;
    }
  return out;
}

Matrix double_commutator_form(const Matrix& x, const std::vector<Matrix>& a_bar,
                              const BOperators& b_t, const UnitOperators& units) {
  const int d = b_t.modes();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (int alpha = 0; alpha < d; ++alpha)
    for (int beta = 0; beta < d; ++beta) {
      const Matrix a = units.combine(a_bar[static_cast<std::size_t>(alpha * d + beta)]);
      const Matrix b = units.combine(b_t(beta, alpha));
      out -= commutator(b, commutator(a, x));
    }
  return out;
}

DissipativeTerms dissipative_terms(double t, const DensityMatrix& rho_m, const Matrix& rho1,
                                   const Hamiltonian& h, const QuadratureSpec& spec) {
  const int d = h.modes();
  if (rho_m.sector().modes() != d || rho1.rows() != d) {
    throw std::invalid_argument("dissipative_terms: mode mismatch");
  }
  const TwoBodyOperator v_t = interaction_tensor(h.h2, h.h1, t);
  const InteractionIntegral k = integrate_interaction(h.h2, h.h1, t, spec);
  const Tensor4 big_gamma = gamma_from_integral(k.value, rho1, v_t.coeffs());
  const double err = (big_gamma - gamma_from_integral(k.coarse, rho1, v_t.coeffs())).max_abs();
  GammaSplit split = gamma_s_split(big_gamma);
  const UnitOperators units(rho_m.basis());
  return DissipativeTerms{embed_two_body(v_t, rho_m.basis()), mean_field_potential(rho1, v_t),
                          std::move(split.gamma), lamb_shift(split.s, units), err};
}

Matrix lindblad_rhs(const DensityMatrix& rho_m, const Tensor4& gamma, const SectorOperator& h_ls,
                    const SectorOperator& h2_i, const OneBodyOperator& c_i, int n_total) {
  const BasisPtr& basis = rho_m.basis();
  const int m = basis->particles();
  if (!h_ls.basis->same_sector(*basis) || !h2_i.basis->same_sector(*basis) ||
      gamma.modes() != basis->modes() || c_i.modes() != basis->modes()) {
    throw std::invalid_argument("lindblad_rhs: tensor/sector mismatch");
  }
  if (n_total < m) throw std::invalid_argument("lindblad_rhs: N smaller than M");
  const double k = n_total - m;
  const UnitOperators units(basis);
  const Matrix gen = h2_i.matrix + k * embed_one_body(c_i, basis).matrix + k * h_ls.matrix;
  return -kI * commutator(gen, rho_m.matrix()) +
         k * lindblad_dissipator(rho_m.matrix(), gamma, units);
}

DissipativeTrajectory propagate_dissipative_mean_field(const DensityMatrix& rho1_0,
                                                       const Hamiltonian& h, int n_total,
                                                       const TimeGrid& grid,
                                                       const DissipativeOptions& opts) {
  if (rho1_0.sector().particles() != 1) throw std::invalid_argument("rho1_0 must be single-particle");
  if (rho1_0.sector().modes() != h.modes()) throw std::invalid_argument("mode mismatch");
  if (n_total < 2) throw std::invalid_argument("dissipative propagation needs N >= 2");
  if (std::abs(rho1_0.purity() - 1.0) > 1e-9) {
    throw std::invalid_argument("dissipative propagation starts from a pure state");
  }
  if (opts.steps_per_output < 1) throw std::invalid_argument("steps_per_output must be positive");
  opts.quadrature.validate();

  const BasisPtr basis = rho1_0.basis();
  double worst_quadrature = 0.0;
  auto rhs = [&](double t, const Matrix& rho) -> Matrix {
    const DensityMatrix state = DensityMatrix::unchecked(basis, rho);
    const DissipativeTerms terms = dissipative_terms(t, state, rho, h, opts.quadrature);
    worst_quadrature = std::max(worst_quadrature, terms.quadrature_error);
    return lindblad_rhs(state, terms.gamma, terms.h_ls, terms.h2_i, terms.c_i, n_total);
  };
  auto diagnose = [&](double t, const Matrix& rho) {
    DissipativeDiagnostics diag;
    diag.trace = rho.trace().real();
    diag.purity = (rho * rho).trace().real();
    diag.min_eigenvalue = min_hermitian_eigenvalue(rho);
    const Tensor4 g = gamma_from_integral(
        integrate_interaction(h.h2, h.h1, t, opts.quadrature).value, rho,
        interaction_tensor(h.h2, h.h1, t).coeffs());
    diag.min_kossakowski_eigenvalue =
        min_hermitian_eigenvalue(kossakowski_matrix(gamma_s_split(g).gamma));
    diag.quadrature_error = worst_quadrature;
    return diag;
  };

  DissipativeTrajectory traj;
  Matrix rho = rho1_0.matrix();
  const auto times = grid.times();
  bool warned = false;
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (n > 0) {
      const double dt = (times[n] - times[n - 1]) / opts.steps_per_output;
      double t = times[n - 1];
      for (int s = 0; s < opts.steps_per_output; ++s) {
        const Matrix k1 = rhs(t, rho);
        const Matrix k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1);
        const Matrix k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2);
        const Matrix k4 = rhs(t + dt, rho + dt * k3);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = times[n - 1] + (s + 1) * dt;
      }
      if (!rho.allFinite()) throw NumericalError("dissipative integrator produced non-finite state");
    }
    DissipativeDiagnostics diag = diagnose(times[n], rho);
    worst_quadrature = 0.0;
    if (!warned && std::abs(diag.trace - 1.0) > opts.trace_warning) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "dissipative trace drift %.3e at t = %g",
                    std::abs(diag.trace - 1.0), times[n]);
      warn(buf);
      warned = true;
    }
    const DensityMatrix interaction = DensityMatrix::unchecked(basis, rho);
    traj.times.push_back(times[n]);
    traj.states.push_back(from_interaction_picture(interaction, h.h1, times[n]));
    traj.interaction_states.push_back(interaction);
    traj.diagnostics.push_back(diag);
  }
  return traj;
}

AuxOperators aux_operators(double t1, double t2, const DensityMatrix& rho1_i,
                           const DensityMatrix& rho2_i, const TwoBodyOperator& h2,
                           const OneBodyOperator& h1) {
  const int d = h2.modes();
  if (rho1_i.sector().particles() != 1 || rho1_i.sector().modes() != d) {
    throw std::invalid_argument("aux_operators: rho1 must be a single-particle state");
  }
  if (rho2_i.sector().particles() != 2 || rho2_i.sector().modes() != d) {
    throw std::invalid_argument("aux_operators: rho2 must be a two-particle state");
  }
  const TwoBodyOperator v1 = interaction_tensor(h2, h1, t1);
  const TwoBodyOperator v2 = interaction_tensor(h2, h1, t2);
  const BasisPtr two = rho2_i.basis();
  const Matrix v1_two = embed_two_body(v1, two).matrix;
  const Matrix v2_two = embed_two_body(v2, two).matrix;

  AuxOperators out;
  out.two_particle = two;
  const Matrix x = partial_trace_map(SectorOperator(two, v2_two * rho2_i.matrix()), 1);
  const BOperators b1(v1.coeffs());
  out.d = Matrix(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out.d(i, j) = (b1(i, j) * x).trace();

  const Matrix& r1 = rho1_i.matrix();
  const Matrix c22 = mean_field_potential(r1, v2).coeffs();
  const Matrix c12 = mean_field_potential(r1, v1).coeffs();
  out.e = 0.5 * c22 * r1 * c12;
  out.s = 0.5 * v1_two * rho2_i.matrix() * v2_two;

  auto herm = [](const Matrix& m) -> Matrix { return -kI * (m - m.adjoint()); };
  out.h_d = herm(out.d);
  out.h_e = herm(out.e);
  out.h_s = herm(out.s);
  return out;
}

SecondOrderTerms second_order_rhs(double t, BasisPtr sector, const StateHistory& history,
                                  const Hamiltonian& h, int n_total, const QuadratureSpec& spec,
                                  PrefactorMode mode) {
  const int d = h.modes();
  const int m = sector->particles();
  if (sector->modes() != d) throw std::invalid_argument("second_order_rhs: mode mismatch");
  if (n_total < m) throw std::invalid_argument("second_order_rhs: N smaller than M");
  if (!history.rho_m) throw std::invalid_argument("second_order_rhs: missing rho_M history");
  const double k = n_total - m;
  const double k1 = mode == PrefactorMode::exact ? std::max(0, n_total - m - 1) : k;
  const double k2 = mode == PrefactorMode::exact ? std::max(0, n_total - m - 2) : k;
  const bool need_one = k != 0.0;
  const bool need_two = k * k1 != 0.0;
  if (need_one && !history.rho1) throw std::invalid_argument("second_order_rhs: missing rho1 history");
  if (need_two && !history.rho2) throw std::invalid_argument("second_order_rhs: missing rho2 history");

  const UnitOperators units(sector);
  const BasisPtr one = enumerate_sector(d, 1);
  const BasisPtr two = enumerate_sector(d, 2);
  const TwoBodyOperator v_t = interaction_tensor(h.h2, h.h1, t);
  const Matrix v_t_m = embed_two_body(v_t, sector).matrix;
  const BOperators b_t(v_t.coeffs());
  const auto dim = static_cast<Eigen::Index>(sector->size());
  const Eigen::Index block = dim * dim;

  SecondOrderTerms out;
  const Matrix rho0 = history.rho_m(0.0);
  out.initial = -kI * commutator(v_t_m, rho0);
  out.initial_mean = Matrix::Zero(dim, dim);
  if (need_one) {
    const Matrix c_t0 = units.combine(mean_field_potential(history.rho1(0.0), v_t).coeffs());
    out.initial_mean = -k * kI * commutator(c_t0, rho0);
  }

  constexpr int kTerms = 8;
  auto integrand = [&](double s) -> Vector {
    const Matrix rho_s = history.rho_m(s);
    const TwoBodyOperator v_s = interaction_tensor(h.h2, h.h1, s);
    const Matrix v_s_m = embed_two_body(v_s, sector).matrix;
    std::array<Matrix, kTerms> terms;
    for (auto& x : terms) x = Matrix::Zero(dim, dim);
    const Matrix inner_v = commutator(v_s_m, rho_s);
    terms[0] = -commutator(v_t_m, inner_v);
    if (need_one) {
      const Matrix r1 = history.rho1(s);
      const Matrix c_ss = units.combine(mean_field_potential(r1, v_s).coeffs());
      const Matrix c_ts = units.combine(mean_field_potential(r1, v_t).coeffs());
      const BOperators b_s(v_s.coeffs());
      for (int alpha = 0; alpha < d; ++alpha)
        for (int beta = 0; beta < d; ++beta) {
          Matrix a = Matrix::Zero(d, d);
          for (int q = 0; q < d; ++q) a += b_s(alpha, q) * r1(q, beta);
          terms[1] -= k * commutator(units.combine(b_t(beta, alpha)),
                                     commutator(units.combine(a), rho_s));
        }
      const Matrix inner_c = commutator(c_ss, rho_s);
      terms[2] = -k * commutator(v_t_m, inner_c);
      terms[3] = -k * commutator(c_ts, inner_v);
      terms[4] = -k * k1 * commutator(c_ts, inner_c);
      if (need_two) {
        const AuxOperators aux =
            aux_operators(t, s, DensityMatrix::unchecked(one, r1),
                          DensityMatrix::unchecked(two, history.rho2(s)), h.h2, h.h1);
        terms[5] = -k * k1 * kI * commutator(units.combine(aux.h_d), rho_s);
        const Matrix h_s_m = embed_m_particle(SectorOperator(two, aux.h_s), sector).matrix;
        terms[6] = -k * k1 * kI * commutator(h_s_m, rho_s);
        terms[7] = -k * k1 * k2 * kI * commutator(units.combine(aux.h_e), rho_s);
      }
    }
    Vector flat(kTerms * block);
    for (int q = 0; q < kTerms; ++q) {
      flat.segment(q * block, block) = Eigen::Map<const Vector>(terms[q].data(), block);
    }
    return flat;
  };

  const QuadratureResult r = integrate(integrand, 0.0, t, spec);
  auto take = [&](int q) -> Matrix {
    return Eigen::Map<const Matrix>(r.value.data() + q * block, dim, dim);
  };
  out.memory = take(0);
  out.exchange = take(1);
  out.v_c = take(2);
  out.c_v = take(3);
  out.c_c = take(4);
  out.h_d = take(5);
  out.h_s = take(6);
  out.h_e = take(7);
  out.quadrature_error = r.error_estimate;
  out.total = out.initial + out.memory + out.initial_mean + out.exchange + out.v_c + out.c_v +
              out.c_c + out.h_d + out.h_s + out.h_e;
  return out;
}

}  // namespace rdyn
