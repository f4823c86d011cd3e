#include "rdyn/subsystem.hpp"

#include <cmath>
#include <limits>

namespace rdyn {

ProductStateAmplitudes::ProductStateAmplitudes(Vector c, double tol) : c_(std::move(c)) {
  if (c_.size() < 1) throw std::invalid_argument("product state needs at least one mode");
  const double norm2 = c_.squaredNorm();
  if (std::abs(norm2 - 1.0) > tol) {
    throw std::invalid_argument("product-state amplitudes not normalized (sum |c|^2 = " +
                                std::to_string(norm2) + ")");
  }
}

ProductStateAmplitudes ProductStateAmplitudes::normalized(const Vector& c) {
  const double norm = c.norm();
  if (norm == 0.0) throw std::invalid_argument("cannot normalize the zero vector");
  return ProductStateAmplitudes(c / norm);
}

Matrix partial_trace_map(const SectorOperator& x, int m) {
  const SectorBasis& full = *x.basis;
  const int n = full.particles();
  if (m < 0) throw std::invalid_argument("partial trace: negative target particle number");
  if (m > n) throw std::invalid_argument("partial trace: target exceeds particle number");
  const SectorBasis reduced(full.modes(), m, std::numeric_limits<std::size_t>::max());
  const SectorBasis env(full.modes(), n - m, std::numeric_limits<std::size_t>::max());
  const double norm = 1.0 / binomial_real(n, m);
  const auto dim = static_cast<Eigen::Index>(reduced.size());
  Matrix out = Matrix::Zero(dim, dim);
  std::vector<Eigen::Index> idx(reduced.size());
  std::vector<double> w(reduced.size());
  for (const FockState& e : env.states()) {
    for (std::size_t r = 0; r < reduced.size(); ++r) {
      FockState s = reduced.state(r);
      double w2 = norm;
      for (std::size_t k = 0; k < s.occupations.size(); ++k) {
        const int mk = s.occupations[k];
        s.occupations[k] += e.occupations[k];
        w2 *= binomial_real(s.occupations[k], mk);
      }
      idx[r] = static_cast<Eigen::Index>(full.index_of(s));
      w[r] = std::sqrt(w2);
    }
    for (std::size_t r = 0; r < reduced.size(); ++r) {
      for (std::size_t c = 0; c < reduced.size(); ++c) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +=
            w[r] * w[c] * x.matrix(idx[r], idx[c]);
      }
    }
  }
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, int m) {
  const int n = rho.sector().particles();
  if (m == n) return rho;
  Matrix reduced = partial_trace_map(rho.as_operator(), m);
  auto basis = enumerate_sector(rho.sector().modes(), m, std::numeric_limits<std::size_t>::max());
  return DensityMatrix(std::move(basis), std::move(reduced));
}

SectorOperator project_to_sector(const SectorOperator& x, int m) {
  const int n = x.basis->particles();
  Matrix reduced = partial_trace_map(x, m) * binomial_real(n, m);
  auto basis = enumerate_sector(x.basis->modes(), m, std::numeric_limits<std::size_t>::max());
  return SectorOperator(std::move(basis), std::move(reduced));
}

SectorVector product_state_vector(const ProductStateAmplitudes& c, int n) {
  auto basis = enumerate_sector(c.modes(), n);
  SectorVector v = SectorVector::zero(basis);
  const double nfact = static_cast<double>(factorial(n));
  for (std::size_t s = 0; s < basis->size(); ++s) {
    const FockState& st = basis->state(s);
    cplx amp = std::sqrt(nfact / static_cast<double>(st.occupation_factorial()));
    for (int k = 0; k < st.modes(); ++k) {
      for (int p = 0; p < st.occupations[static_cast<std::size_t>(k)]; ++p) {
        amp *= c.amplitudes()(k);
      }
    }
    v.amplitudes(static_cast<Eigen::Index>(s)) = amp;
  }
  return v;
}

DensityMatrix product_state_density(const ProductStateAmplitudes& c, int n) {
  const SectorVector v = product_state_vector(c, n);
  return DensityMatrix(v.basis, v.amplitudes * v.amplitudes.adjoint());
}

SectorOperator naive_tensor_trace_check(const DensityMatrix& rho1) {
  if (rho1.sector().particles() != 1) {
    throw std::invalid_argument("naive_tensor_trace_check expects a single-particle state");
  }
  const int d = rho1.sector().modes();
  const Matrix& r = rho1.matrix();
  // rho (x) rho as a two-particle operator 1/2 sum X_{ab;cd} a^dag_a a^dag_b a_c a_d
  // with X_{ab;cd} = rho_ac rho_bd.
  Tensor4 x(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) x(a, b, c, e) = r(a, c) * r(b, e);
  const TwoBodyOperator op(std::move(x), HermiticityPolicy::hermitize);
  const SectorOperator two = embed_two_body(op, enumerate_sector(d, 2));
  return SectorOperator(rho1.basis(), partial_trace_map(two, 1));
}

}  // namespace rdyn
