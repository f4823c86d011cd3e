#pragma once

// One- and two-body operators in second quantization and their matrices on
// fixed-particle-number sectors.
//
//   H1 = sum_ij h_ij a^dag_i a_j
//   H2 = 1/2 sum_ijkl V_{ij;kl} a^dag_i a^dag_j a_k a_l
//
// V is stored in canonical form, averaged over i<->j and k<->l. In that form
// V_{ij;kl} is the two-particle matrix element <phi_i phi_j|H2|phi_k phi_l>
// between symmetrized tuple states.

#include <vector>

#include "rdyn/density_matrix.hpp"

namespace rdyn {

class OneBodyOperator {
 public:
  explicit OneBodyOperator(Matrix coeffs);
  static OneBodyOperator zero(int modes);

  int modes() const { return static_cast<int>(coeffs_.rows()); }
  const Matrix& coeffs() const { return coeffs_; }
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect(coeffs_) < tol; }

 private:
  Matrix coeffs_;
};

// Dense rank-4 complex tensor T(i, j, k, l), row-major.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int modes);

  int modes() const { return d_; }
  cplx& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  const cplx& operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }
  const std::vector<cplx>& data() const { return data_; }
  std::vector<cplx>& data() { return data_; }

  double max_abs() const;
  Tensor4& operator+=(const Tensor4& o);
  Tensor4& operator*=(cplx s);

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * d_ + j) * d_ + k) * d_ + l;
  }

  int d_ = 0;
  std::vector<cplx> data_;
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(Tensor4 a, const Tensor4& b);
Tensor4 operator*(cplx s, Tensor4 a);

enum class HermiticityPolicy {
  require,    // throw when V_{ij;kl} != conj(V_{lk;ji})
  hermitize,  // replace V by its Hermitian part
};

class TwoBodyOperator {
 public:
  explicit TwoBodyOperator(Tensor4 raw, HermiticityPolicy policy = HermiticityPolicy::require);
  static TwoBodyOperator zero(int modes);
  // On-site interaction 1/2 g sum_x a^dag_x a^dag_x a_x a_x in a site basis.
  static TwoBodyOperator contact(int modes, double g);

  int modes() const { return coeffs_.modes(); }
  const Tensor4& coeffs() const { return coeffs_; }
  cplx operator()(int i, int j, int k, int l) const { return coeffs_(i, j, k, l); }

  // Tensor of U^dag H2 U for a single-particle unitary U:
  // V'_{nj;im} = sum conj(U_an) conj(U_bj) V_{ab;cd} U_ci U_dm.
  TwoBodyOperator rotated(const Matrix& u) const;

  // max |V_{ij;kl} - conj(V_{lk;ji})|
  static double hermiticity_defect(const Tensor4& t);

 private:
  struct Canonical {};
  TwoBodyOperator(Tensor4 canonical, Canonical) : coeffs_(std::move(canonical)) {}

  Tensor4 coeffs_;
};

// Average over i<->j and k<->l.
Tensor4 symmetrize_exchange(const Tensor4& t);

SectorOperator embed_one_body(const OneBodyOperator& h, BasisPtr basis);
SectorOperator embed_two_body(const TwoBodyOperator& v, BasisPtr basis);

// Sum_k a^dag_k a_k.
SectorOperator number_operator(BasisPtr basis);

// Embeds an M-particle operator, given by its matrix on the (d, M) sector,
// into the (d, N) sector as (1/M!) sum A_{k;l} a^dag_{k1..kM} a_{l1..lM}.
SectorOperator embed_m_particle(const SectorOperator& a, BasisPtr target);

// A_{k;l} = <phi_k|A|phi_l> for tuple labels k, l of length M.
cplx tuple_element(const SectorOperator& a, const ModeTuple& k, const ModeTuple& l);

// <phi_i|A^(M)|phi_j> between N-particle tuple states via the binomial-inverse
// double sum over ordered index subsets. Cost grows as C(N, M)^2; intended for
// small N.
cplx m_particle_matrix_element(const SectorOperator& a, const ModeTuple& i, const ModeTuple& j);

// Tr^(N){rho^(N) A^(M)} evaluated in the N-particle sector.
cplx expectation_m_particle(const DensityMatrix& rho, const SectorOperator& a);

}  // namespace rdyn
