#pragma once

// Fixed-(d, N) bosonic sectors in the unit-norm occupation-number basis, and
// the bridge to symmetrized tuple states |phi_{i1} ... phi_{iN}>.
//
// A tuple state (i1, ..., iN) equals kappa * |n>, where n is the occupation
// vector of the multiset {i1, ..., iN} and kappa = sqrt(prod_k n_k! / N!).
// Modes are 0-based.

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <vector>

#include "rdyn/core.hpp"

namespace rdyn {

using ModeTuple = std::vector<int>;

struct FockState {
  std::vector<int> occupations;

  int modes() const { return static_cast<int>(occupations.size()); }
  int particles() const;
  // prod_k n_k!
  std::int64_t occupation_factorial() const;

  auto operator<=>(const FockState&) const = default;
};

// Default cap on sector dimension; overridden by the RDYN_MAX_DIM environment
// variable when it holds a positive integer.
inline constexpr std::size_t kDefaultDimensionCap = 20000;
std::size_t default_dimension_cap();

// C(N + d - 1, d - 1), saturating at SIZE_MAX.
std::size_t sector_dimension(int modes, int particles);

class SectorBasis {
 public:
  // Throws CapExceeded when the sector is larger than `cap`.
  SectorBasis(int modes, int particles, std::size_t cap = default_dimension_cap());

  int modes() const { return modes_; }
  int particles() const { return particles_; }
  std::size_t size() const { return states_.size(); }

  const std::vector<FockState>& states() const { return states_; }
  const FockState& state(std::size_t i) const { return states_.at(i); }

  // Throws std::out_of_range for states outside the sector.
  std::size_t index_of(const FockState& s) const;
  bool contains(const FockState& s) const { return index_.count(s) != 0; }

  bool same_sector(const SectorBasis& other) const {
    return modes_ == other.modes_ && particles_ == other.particles_;
  }

 private:
  int modes_;
  int particles_;
  std::vector<FockState> states_;
  std::map<FockState, std::size_t> index_;
};

using BasisPtr = std::shared_ptr<const SectorBasis>;

// All occupation vectors with sum N, reverse-lexicographic order.
BasisPtr enumerate_sector(int modes, int particles,
                          std::size_t cap = default_dimension_cap());

struct SectorVector {
  BasisPtr basis;
  Vector amplitudes;

  SectorVector(BasisPtr b, Vector amps);
  static SectorVector zero(BasisPtr b);
  static SectorVector basis_state(BasisPtr b, const FockState& s);
};

// (1/K!) sum_{sigma in S_K} prod_k delta(i_k, j_sigma(k)), via multiset
// multiplicities: prod_m c_m! / K! when i and j agree as multisets, else 0.
Rational perm_delta(const ModeTuple& i, const ModeTuple& j);

struct TupleLabel {
  FockState state;
  Rational kappa_squared;  // prod_k n_k! / N!
  double kappa() const;
};

TupleLabel tuple_to_fock(const ModeTuple& modes, int num_modes);

// Sorted tuple for an occupation vector, e.g. (0,2,1) -> (1,1,2).
ModeTuple fock_to_tuple(const FockState& s);

// The (sub-normalized) symmetrized tuple state expressed in `basis`.
SectorVector tuple_state(const ModeTuple& modes, BasisPtr basis);

// <phi_i|phi_j> evaluated numerically from the two tuple states.
double inner_product_symmetrized(const ModeTuple& i, const ModeTuple& j, int num_modes);

// a_{i1} ... a_{iM} v, landing in the (d, N - M) sector.
SectorVector apply_annihilation_string(const ModeTuple& modes, const SectorVector& v);

// a^dag_{i1} ... a^dag_{iM} v, landing in the (d, N + M) sector.
SectorVector apply_creation_string(const ModeTuple& modes, const SectorVector& v,
                                   std::size_t cap = default_dimension_cap());

// Dense matrices of the string maps between the two sectors.
Matrix annihilation_string_matrix(const ModeTuple& modes, const SectorBasis& from,
                                  const SectorBasis& to);
Matrix creation_string_matrix(const ModeTuple& modes, const SectorBasis& from,
                              const SectorBasis& to);

}  // namespace rdyn
