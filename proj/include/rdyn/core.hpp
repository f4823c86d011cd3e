#pragma once

// Shared numeric types, error taxonomy and small combinatorial helpers.

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <boost/rational.hpp>

namespace rdyn {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Rational = boost::rational<std::int64_t>;

inline constexpr cplx kI{0.0, 1.0};

// Exit-code taxonomy used by the command-line harness:
// ConfigError -> 2, CapExceeded -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

std::int64_t factorial(int n);
std::int64_t binomial(int n, int k);
double binomial_real(int n, int k);

double to_double(const Rational& r);

// max |a_ij| over all entries.
double max_abs(const Matrix& m);

// max |m - m^dagger|.
double hermiticity_defect(const Matrix& m);

Matrix commutator(const Matrix& a, const Matrix& b);
Matrix anticommutator(const Matrix& a, const Matrix& b);

// Half the sum of the absolute eigenvalues of (a - b); a and b Hermitian.
double trace_distance(const Matrix& a, const Matrix& b);

double min_hermitian_eigenvalue(const Matrix& m);

}  // namespace rdyn
