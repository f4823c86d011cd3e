#include "rdyn/core.hpp"

#include <Eigen/Eigenvalues>

namespace rdyn {

std::int64_t factorial(int n) {
  if (n < 0) throw std::invalid_argument("factorial of negative number");
  if (n > 20) throw std::overflow_error("factorial overflows 64 bits");
  std::int64_t r = 1;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double binomial_real(int n, int k) { return static_cast<double>(binomial(n, k)); }

double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

double max_abs(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

double trace_distance(const Matrix& a, const Matrix& b) {
  Matrix diff = a - b;
  Matrix herm = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double min_hermitian_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Matrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace rdyn
