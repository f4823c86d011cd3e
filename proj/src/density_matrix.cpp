#include "rdyn/density_matrix.hpp"

#include <cstdio>

namespace rdyn {

SectorOperator::SectorOperator(BasisPtr b, Matrix m) : basis(std::move(b)), matrix(std::move(m)) {
  if (!basis) throw std::invalid_argument("sector operator without basis");
  const auto n = static_cast<Eigen::Index>(basis->size());
  if (matrix.rows() != n || matrix.cols() != n) {
    throw std::invalid_argument("operator dimension does not match basis size");
  }
}

SectorOperator SectorOperator::zero(BasisPtr b) {
  const auto n = static_cast<Eigen::Index>(b->size());
  return SectorOperator(std::move(b), Matrix::Zero(n, n));
}

SectorOperator SectorOperator::identity(BasisPtr b) {
  const auto n = static_cast<Eigen::Index>(b->size());
  return SectorOperator(std::move(b), Matrix::Identity(n, n));
}

DensityDiagnostics diagnose_density(const Matrix& m) {
  DensityDiagnostics d;
  d.hermiticity_defect = hermiticity_defect(m);
  d.trace_defect = std::abs(m.trace() - cplx(1.0));
  d.min_eigenvalue = min_hermitian_eigenvalue(m);
  return d;
}

DensityMatrix::DensityMatrix(BasisPtr basis, Matrix matrix, NoCheck)
    : basis_(std::move(basis)), matrix_(std::move(matrix)) {
  if (!basis_) throw std::invalid_argument("density matrix without basis");
  const auto n = static_cast<Eigen::Index>(basis_->size());
  if (matrix_.rows() != n || matrix_.cols() != n) {
    throw std::invalid_argument("density matrix dimension does not match basis size");
  }
}

DensityMatrix::DensityMatrix(BasisPtr basis, Matrix matrix, const DensityTolerances& tol)
    : DensityMatrix(std::move(basis), std::move(matrix), NoCheck{}) {
  const DensityDiagnostics d = diagnose_density(matrix_);
  if (!d.ok(tol)) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "invalid density matrix (hermiticity %.3e, trace defect %.3e, min eigenvalue %.3e)",
                  d.hermiticity_defect, d.trace_defect, d.min_eigenvalue);
    throw NumericalError(buf);
  }
}

DensityMatrix DensityMatrix::unchecked(BasisPtr basis, Matrix matrix) {
  return DensityMatrix(std::move(basis), std::move(matrix), NoCheck{});
}

DensityMatrix DensityMatrix::pure(const SectorVector& psi) {
  const double norm = psi.amplitudes.norm();
  if (norm == 0.0) throw std::invalid_argument("cannot build a pure state from the zero vector");
  const Vector v = psi.amplitudes / norm;
  return DensityMatrix(psi.basis, v * v.adjoint());
}

}  // namespace rdyn
