#pragma once

#include "rdyn/fock_sector.hpp"

namespace rdyn {

// A square operator over one sector basis.
struct SectorOperator {
  BasisPtr basis;
  Matrix matrix;

  SectorOperator(BasisPtr b, Matrix m);
  static SectorOperator zero(BasisPtr b);
  static SectorOperator identity(BasisPtr b);
};

struct DensityTolerances {
  double hermiticity = 1e-12;
  double trace = 1e-10;
  double min_eigenvalue = -1e-10;
};

struct DensityDiagnostics {
  double hermiticity_defect = 0.0;
  double trace_defect = 0.0;
  double min_eigenvalue = 0.0;

  bool ok(const DensityTolerances& tol = {}) const {
    return hermiticity_defect < tol.hermiticity && trace_defect < tol.trace &&
           min_eigenvalue > tol.min_eigenvalue;
  }
};

DensityDiagnostics diagnose_density(const Matrix& m);

// Hermitian, unit-trace, positive semidefinite operator over a sector.
class DensityMatrix {
 public:
  // Throws NumericalError when the matrix violates the tolerances.
  DensityMatrix(BasisPtr basis, Matrix matrix, const DensityTolerances& tol = {});

  // Skips validation; used for trajectories whose validity is reported rather
  // than enforced.
  static DensityMatrix unchecked(BasisPtr basis, Matrix matrix);

  static DensityMatrix pure(const SectorVector& psi);

  const BasisPtr& basis() const { return basis_; }
  const Matrix& matrix() const { return matrix_; }
  const SectorBasis& sector() const { return *basis_; }

  cplx trace() const { return matrix_.trace(); }
  double purity() const { return (matrix_ * matrix_).trace().real(); }
  DensityDiagnostics diagnostics() const { return diagnose_density(matrix_); }

  SectorOperator as_operator() const { return SectorOperator(basis_, matrix_); }

 private:
  struct NoCheck {};
  DensityMatrix(BasisPtr basis, Matrix matrix, NoCheck);

  BasisPtr basis_;
  Matrix matrix_;
};

}  // namespace rdyn
