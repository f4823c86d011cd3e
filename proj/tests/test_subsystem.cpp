#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rdyn/subsystem.hpp"

using namespace rdyn;

namespace {

// rho^(M)_{k;l} = sum_{e tuples} <phi_k phi_e|rho|phi_l phi_e> in tuple form,
// converted back to the occupation basis.
Matrix tuple_partial_trace(const DensityMatrix& rho, int m) {
  const int d = rho.sector().modes();
  const int n = rho.sector().particles();
  const BasisPtr small = enumerate_sector(d, m);
  const auto dim = static_cast<Eigen::Index>(small->size());
  Matrix out = Matrix::Zero(dim, dim);
  const auto env = oracle::all_tuples(d, n - m);
  for (const auto& k : oracle::all_tuples(d, m))
    for (const auto& l : oracle::all_tuples(d, m)) {
      cplx s = 0.0;
      for (const auto& e : env) {
        ModeTuple ke = k, le = l;
        ke.insert(ke.end(), e.begin(), e.end());
        le.insert(le.end(), e.begin(), e.end());
        const Vector vk = tuple_state(ke, rho.basis()).amplitudes;
        const Vector vl = tuple_state(le, rho.basis()).amplitudes;
        s += vk.dot(rho.matrix() * vl);
      }
      // Distribute the tuple element back over occupation states.
      const Vector sk = tuple_state(k, small).amplitudes;
      const Vector sl = tuple_state(l, small).amplitudes;
      out += s * sk * sl.adjoint();
    }
  return out;
}

}  // namespace

TEST_CASE("partial trace matches the tuple-sum definition") {
  oracle::Random rng(21);
  const BasisPtr big = enumerate_sector(3, 3);
  for (int trial = 0; trial < 3; ++trial) {
    const DensityMatrix rho = rng.density(big);
    for (int m = 1; m <= 2; ++m) {
      CHECK(max_abs(partial_trace(rho, m).matrix() - tuple_partial_trace(rho, m)) < 1e-12);
    }
  }
}

TEST_CASE("partial trace contract on random states") {
  oracle::Random rng(22);
  const BasisPtr big = enumerate_sector(3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const DensityMatrix rho = rng.density(big);
    const DensityMatrix r2 = partial_trace(rho, 2);
    const DensityMatrix r1 = partial_trace(rho, 1);
    CHECK(std::abs(r2.trace() - 1.0) < 1e-10);
    CHECK(std::abs(r1.trace() - 1.0) < 1e-10);
    CHECK(r2.diagnostics().min_eigenvalue > -1e-10);
    CHECK(r1.diagnostics().min_eigenvalue > -1e-10);
    CHECK(max_abs(partial_trace(r2, 1).matrix() - r1.matrix()) < 1e-11);
  }
}

TEST_CASE("trivial partial traces") {
  oracle::Random rng(23);
  const DensityMatrix rho = rng.density(enumerate_sector(2, 3));
  CHECK(max_abs(partial_trace(rho, 3).matrix() - rho.matrix()) == 0.0);
  const Matrix scalar = partial_trace_map(rho.as_operator(), 0);
  CHECK(scalar.rows() == 1);
  CHECK(std::abs(scalar(0, 0) - 1.0) < 1e-12);
  CHECK_THROWS_AS(partial_trace(rho, 4), std::invalid_argument);
  CHECK_THROWS_AS(partial_trace(rho, -1), std::invalid_argument);
}

TEST_CASE("projection onto the M-particle subspace") {
  // I^(M) X I^(M) = C(N,M) Tr_{N-M} X with I^(M) the embedded M-particle identity
  oracle::Random rng(24);
  const BasisPtr big = enumerate_sector(3, 3);
  const SectorOperator x(big, rng.hermitian(10));
  for (int m = 1; m <= 3; ++m) {
    const SectorOperator p = project_to_sector(x, m);
    CHECK(max_abs(p.matrix - static_cast<double>(binomial(3, m)) * partial_trace_map(x, m)) < 1e-12);
    // Tr{X A^(M)} = Tr{P(X) A} for any M-particle A
    const BasisPtr small = enumerate_sector(3, m);
    const SectorOperator a(small, rng.hermitian(static_cast<Eigen::Index>(small->size())));
    const cplx lhs = (x.matrix * embed_m_particle(a, big).matrix).trace();
    const cplx rhs = (p.matrix * a.matrix).trace();
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("product states reduce to their orbital") {
  oracle::Random rng(25);
  for (int n = 1; n <= 4; ++n) {
    const ProductStateAmplitudes c(rng.unit_vector(3));
    const DensityMatrix rho = product_state_density(c, n);
    CHECK(std::abs(rho.purity() - 1.0) < 1e-12);
    for (int m = 1; m <= n; ++m) {
      const DensityMatrix reduced = partial_trace(rho, m);
      CHECK(max_abs(reduced.matrix() - product_state_density(c, m).matrix()) < 1e-12);
    }
  }
}

TEST_CASE("product state amplitudes match the ladder construction") {
  // (1/sqrt(N!)) (sum_k c_k a^dag_k)^N |0>
  oracle::Random rng(26);
  const int d = 3;
  const int n = 3;
  const Vector c = rng.unit_vector(d);
  oracle::State s = oracle::vacuum(d);
  for (int p = 0; p < n; ++p) {
    oracle::State next;
    for (int k = 0; k < d; ++k) oracle::add_scaled(next, oracle::raise(s, k), c(k));
    s = next;
  }
  const BasisPtr b = enumerate_sector(d, n);
  const Vector ref = oracle::to_vector(s, *b) / std::sqrt(oracle::factorial(n));
  CHECK((product_state_vector(ProductStateAmplitudes(c), n).amplitudes - ref).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("product amplitudes with zeros") {
  Vector c = Vector::Zero(3);
  c(1) = 1.0;
  const SectorVector v = product_state_vector(ProductStateAmplitudes(c), 2);
  CHECK(v.amplitudes.allFinite());
  CHECK(std::abs(v.amplitudes.norm() - 1.0) < 1e-14);
  CHECK_THROWS_AS(ProductStateAmplitudes(Vector::Ones(2)), std::invalid_argument);
}

TEST_CASE("single-particle trace of rho (x) rho is 1/2 (rho + rho^2)") {
  oracle::Random rng(27);
  for (int d = 2; d <= 4; ++d) {
    for (int trial = 0; trial < 100 / 3 + 1; ++trial) {
      const DensityMatrix rho(enumerate_sector(d, 1), rng.density(d));
      const Matrix got = naive_tensor_trace_check(rho).matrix;
      const Matrix expect = 0.5 * (rho.matrix() + rho.matrix() * rho.matrix());
      CHECK(max_abs(got - expect) < 1e-12);
    }
  }
  // Fixed point exactly at pure states.
  const Vector phi = oracle::Random(28).unit_vector(3);
  const DensityMatrix pure(enumerate_sector(3, 1), phi * phi.adjoint());
  CHECK(max_abs(naive_tensor_trace_check(pure).matrix - pure.matrix()) < 1e-12);
}
