#pragma once

// Bosonic partial trace and product states.
//
// In the occupation basis the reduced matrix reads
//   rho^(M)_{m,m'} = sum_e w(m,e) w(m',e) rho^(N)_{m+e, m'+e},
//   w(m,e)^2 = prod_k C(m_k + e_k, m_k) / C(N, M),
// where e runs over the (d, N - M) environment sector.

#include "rdyn/second_quant.hpp"

namespace rdyn {

class ProductStateAmplitudes {
 public:
  // Throws std::invalid_argument unless |sum |c|^2 - 1| <= tol.
  explicit ProductStateAmplitudes(Vector c, double tol = 1e-9);
  // Rescales an arbitrary non-zero vector to unit norm.
  static ProductStateAmplitudes normalized(const Vector& c);

  int modes() const { return static_cast<int>(c_.size()); }
  const Vector& amplitudes() const { return c_; }

 private:
  Vector c_;
};

// Partial-trace map applied to an arbitrary operator, without validity checks.
Matrix partial_trace_map(const SectorOperator& x, int m);

// rho^(M) = Tr_{N-M}{rho^(N)}; M = N returns the input and M = 0 the 1x1
// matrix [Tr rho].
DensityMatrix partial_trace(const DensityMatrix& rho, int m);

// I^(M) X I^(M) = C(N, M) Tr_{N-M}{X}.
SectorOperator project_to_sector(const SectorOperator& x, int m);

// Condensate state with amplitudes sqrt(N!/prod n_k!) prod_k c_k^{n_k}.
SectorVector product_state_vector(const ProductStateAmplitudes& c, int n);
DensityMatrix product_state_density(const ProductStateAmplitudes& c, int n);

// Single-particle partial trace of the (generally non-bosonic) operator
// rho (x) rho, giving 1/2 (rho Tr rho + rho^2). Not renormalized.
SectorOperator naive_tensor_trace_check(const DensityMatrix& rho1);

}  // namespace rdyn
