#pragma once

// Second-order (in H2) reduced dynamics in the interaction picture with
// respect to H1: single-particle B and A operators, the state-dependent
// autocorrelation tensor Gamma, its split into gamma and S, the Lamb shift,
// and the dissipative mean-field master equation
//
//   d rho/dt = -i [H2_I(t) + (N - M) C_I(t,t), rho]
//              - (N - M) int_0^t ds sum_ab [B_[ba](t), [A_[ab](s,t), rho]].
//
// Operators with bracketed indices, B_[ba], are full single-particle matrices:
// (B_[ba])_ij = V_I(t)_{i b; j a}.

#include <functional>
#include <vector>

#include "rdyn/exact_engine.hpp"
#include "rdyn/hierarchy.hpp"

namespace rdyn {

enum class QuadratureRule { trapezoid, gauss };

struct QuadratureSpec {
  QuadratureRule rule = QuadratureRule::trapezoid;
  int substeps = 16;        // initial number of panels
  double tolerance = 1e-8;  // successive estimates must agree to this (max abs)
  int max_doublings = 14;

  void validate() const;
};

struct QuadratureResult {
  Vector value;
  double error_estimate = 0.0;  // max |I(2n) - I(n)| at acceptance
  int substeps = 0;             // panels used for `value`
};

// int_a^b f(s) ds for vector-valued f, refining by panel doubling until two
// successive estimates agree. Throws NumericalError when that fails.
QuadratureResult integrate(const std::function<Vector(double)>& f, double a, double b,
                           const QuadratureSpec& spec);

// Single composite rule with exactly `substeps` panels, no refinement.
Vector integrate_fixed(const std::function<Vector(double)>& f, double a, double b,
                       QuadratureRule rule, int substeps);

// V_I(t) = U1^dag(t) (x) U1^dag(t) V U1(t) (x) U1(t)
TwoBodyOperator interaction_tensor(const TwoBodyOperator& h2, const OneBodyOperator& h1, double t);

// All d^2 operators B_[ba] of one tensor.
class BOperators {
 public:
  explicit BOperators(const Tensor4& v);
  int modes() const { return d_; }
  const Matrix& operator()(int beta, int alpha) const;

 private:
  int d_;
  std::vector<Matrix> ops_;
};

// B_[beta alpha](t); in debug builds checks B^dag_[ab] = B_[ba] and
// sum_a B_[aa] = Tr_1 V_I(t).
OneBodyOperator b_operator(int beta, int alpha, double t, const TwoBodyOperator& h2,
                           const OneBodyOperator& h1);

// A_[alpha beta](s,t) = sum_k B_[alpha k](s) rho1_I(t)_{k beta}.
OneBodyOperator a_operator(int alpha, int beta, double s, const DensityMatrix& rho1_i,
                           const TwoBodyOperator& h2, const OneBodyOperator& h1);

// The same from an explicit sum over the tensor entries V_{i alpha; j k}.
OneBodyOperator a_operator_direct(int alpha, int beta, const Tensor4& v_s, const Matrix& rho1);

// int_0^t V_I(s) ds.
struct InteractionIntegral {
  double t = 0.0;
  Tensor4 value;
  Tensor4 coarse;  // the previous refinement level, for error propagation
  double error_estimate = 0.0;
  int substeps = 0;
};
InteractionIntegral integrate_interaction(const TwoBodyOperator& h2, const OneBodyOperator& h1,
                                          double t, const QuadratureSpec& spec);

// Gamma_ijkl(t) = int_0^t ds Tr{B_[ij](t - s) rho1_I(t) B_[kl](t)}.
struct GammaTensor {
  double t = 0.0;
  Tensor4 entries;
  double error_estimate = 0.0;  // max entry change under one panel halving
  int substeps = 0;
};

GammaTensor gamma_tensor(double t, const DensityMatrix& rho1_i, const TwoBodyOperator& h2,
                         const OneBodyOperator& h1, const QuadratureSpec& spec);

// Contraction of a precomputed int_0^t V_I with rho and V_I(t).
Tensor4 gamma_from_integral(const Tensor4& integral, const Matrix& rho1, const Tensor4& v_t);

struct GammaSplit {
  Tensor4 gamma;  // Gamma_ijkl + conj(Gamma_lkji)
  Tensor4 s;      // (Gamma_ijkl - conj(Gamma_lkji)) / 2i
};
GammaSplit gamma_s_split(const Tensor4& g);

// max |T_ijkl - conj(T_lkji)|
double conjugation_defect(const Tensor4& t);

// gamma reshaped to the d^2 x d^2 matrix K_{(ij),(lk)} = gamma_ijkl.
Matrix kossakowski_matrix(const Tensor4& gamma);

// a^dag_a a_b on the sector, for all (a, b).
class UnitOperators {
 public:
  explicit UnitOperators(BasisPtr basis);
  const BasisPtr& basis() const { return basis_; }
  const Matrix& operator()(int a, int b) const;
  // sum_ab x_ab a^dag_a a_b
  Matrix combine(const Matrix& x) const;

 private:
  BasisPtr basis_;
  int d_;
  std::vector<Matrix> ops_;
};

// H_LS = sum_ijkl S_ijkl a^dag_k a_l a^dag_i a_j. Throws NumericalError when S
// violates S_ijkl = conj(S_lkji) by more than 1e-10.
SectorOperator lamb_shift(const Tensor4& s, BasisPtr basis);
SectorOperator lamb_shift(const Tensor4& s, const UnitOperators& units);

// sum gamma_ijkl (a^dag_i a_j X a^dag_k a_l - 1/2 {a^dag_k a_l a^dag_i a_j, X})
Matrix lindblad_dissipator(const Matrix& x, const Tensor4& gamma, const UnitOperators& units);

// -i [H_LS, X] + dissipator(X)
Matrix lindblad_form(const Matrix& x, const Tensor4& gamma, const Matrix& h_ls,
                     const UnitOperators& units);

// Integrated A operators, int_0^t A_[ab](s,t) ds = sum_k (int B_[ak]) rho_{kb}.
std::vector<Matrix> integrated_a_operators(const Tensor4& integral, const Matrix& rho1);

// sum_ab (A X B - B A X) + (B^dag X A^dag - X A^dag B^dag), A = A_[ab],
// B = B_[ba](t), embedded in the sector. Linear in X; equals the "+ H.c." form
// for Hermitian X.
Matrix hc_form(const Matrix& x, const std::vector<Matrix>& a_bar, const BOperators& b_t,
               const UnitOperators& units);

// -sum_ab [B_[ba](t), [A_[ab], X]]
Matrix double_commutator_form(const Matrix& x, const std::vector<Matrix>& a_bar,
                              const BOperators& b_t, const UnitOperators& units);

struct DissipativeTerms {
  SectorOperator h2_i;      // V_I(t) on the sector
  OneBodyOperator c_i;      // C_I(t, t)
  Tensor4 gamma;
  SectorOperator h_ls;
  double quadrature_error = 0.0;
};

// Assembles all time-t ingredients for the state rho_M.
DissipativeTerms dissipative_terms(double t, const DensityMatrix& rho_m, const Matrix& rho1,
                                   const Hamiltonian& h, const QuadratureSpec& spec);

// -i [V_I + (N - M) C_I + (N - M) H_LS, rho] + (N - M) dissipator(rho)
Matrix lindblad_rhs(const DensityMatrix& rho_m, const Tensor4& gamma, const SectorOperator& h_ls,
                    const SectorOperator& h2_i, const OneBodyOperator& c_i, int n_total);

struct DissipativeOptions {
  QuadratureSpec quadrature;
  int steps_per_output = 20;
  double trace_warning = 1e-6;
};

struct DissipativeDiagnostics {
  double trace = 1.0;
  double purity = 1.0;
  double min_eigenvalue = 0.0;
  double min_kossakowski_eigenvalue = 0.0;
  double quadrature_error = 0.0;
};

struct DissipativeTrajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;              // Schroedinger picture
  std::vector<DensityMatrix> interaction_states;  // rotated by U1
  std::vector<DissipativeDiagnostics> diagnostics;
};

// Fixed-step RK4 for the M = 1 master equation with Gamma rebuilt from the
// instantaneous rho at every stage. Purity is reported, never enforced.
DissipativeTrajectory propagate_dissipative_mean_field(const DensityMatrix& rho1_0,
                                                       const Hamiltonian& h, int n_total,
                                                       const TimeGrid& grid,
                                                       const DissipativeOptions& opts = {});

struct AuxOperators {
  Matrix d;    // sum_ij Tr{B_[ij](t1) Tr_1(V_I(t2) rho2)} a^dag_i a_j
  Matrix e;    // 1/2 C_I(t2,t2) rho1 C_I(t1,t2)
  Matrix s;    // 1/2 V_I(t1) rho2 V_I(t2), two-particle sector
  Matrix h_d;  // -i (X - X^dag) for each of the above
  Matrix h_e;
  Matrix h_s;
  BasisPtr two_particle;
};

AuxOperators aux_operators(double t1, double t2, const DensityMatrix& rho1_i,
                           const DensityMatrix& rho2_i, const TwoBodyOperator& h2,
                           const OneBodyOperator& h1);

enum class PrefactorMode {
  exact,    // N - M, N - M - 1, N - M - 2
  large_n,  // all replaced by N - M
};

// Interaction-picture states at arbitrary past times, for the memory integrals.
struct StateHistory {
  std::function<Matrix(double)> rho_m;
  std::function<Matrix(double)> rho1;
  std::function<Matrix(double)> rho2;
};

struct SecondOrderTerms {
  Matrix initial;            // -i [V(t), rho(0)]
  Matrix memory;             // -int [V(t), [V(s), rho(s)]]
  Matrix initial_mean;       // -(N-M) i [C(t,0), rho(0)]
  Matrix exchange;           // -(N-M) int sum [B_[ba](t), [A_[ab](s,s), rho(s)]]
  Matrix v_c;                // -(N-M) int [V(t), [C(s,s), rho(s)]]
  Matrix c_v;                // -(N-M) int [C(t,s), [V(s), rho(s)]]
  Matrix c_c;                // -(N-M)(N-M-1) int [C(t,s), [C(s,s), rho(s)]]
  Matrix h_d;                // -(N-M)(N-M-1) i int [H_D(t,s), rho(s)]
  Matrix h_s;                // -(N-M)(N-M-1) i int [H_S(t,s), rho(s)]
  Matrix h_e;                // -(N-M)(N-M-1)(N-M-2) i int [H_E(t,s), rho(s)]
  Matrix total;
  double quadrature_error = 0.0;
};

// Term-by-term right-hand side of the full second-order equation on the
// (d, M) sector, evaluated from a supplied history.
SecondOrderTerms second_order_rhs(double t, BasisPtr sector, const StateHistory& history,
                                  const Hamiltonian& h, int n_total, const QuadratureSpec& spec,
                                  PrefactorMode mode = PrefactorMode::exact);

}  // namespace rdyn
