#include "rdyn/fock_sector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace rdyn {

int FockState::particles() const {
  int n = 0;
  for (int k : occupations) n += k;
  return n;
}

std::int64_t FockState::occupation_factorial() const {
  std::int64_t r = 1;
  for (int k : occupations) r *= factorial(k);
  return r;
}

std::size_t default_dimension_cap() {
  if (const char* env = std::getenv("RDYN_MAX_DIM")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultDimensionCap;
}

std::size_t sector_dimension(int modes, int particles) {
  if (modes < 1 || particles < 0) return 0;
  // C(N + d - 1, k) with k = min(N, d - 1), built incrementally; each partial
  // product is itself a binomial coefficient, so the division is exact.
  const int n = particles + modes - 1;
  const int k = std::min(particles, modes - 1);
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) {
    const auto factor = static_cast<std::size_t>(n - k + i);
    if (r > kMax / factor) return kMax;
    r = r * factor / static_cast<std::size_t>(i);
  }
  return r;
}

namespace {

void enumerate_rec(int mode, int remaining, std::vector<int>& occ,
                   std::vector<FockState>& out) {
  const int d = static_cast<int>(occ.size());
  if (mode == d - 1) {
    occ[mode] = remaining;
    out.push_back(FockState{occ});
    return;
  }
  for (int n = remaining; n >= 0; --n) {
    occ[mode] = n;
    enumerate_rec(mode + 1, remaining - n, occ, out);
  }
  occ[mode] = 0;
}

}  // namespace

SectorBasis::SectorBasis(int modes, int particles, std::size_t cap)
    : modes_(modes), particles_(particles) {
  if (modes < 1) throw std::invalid_argument("sector needs at least one mode");
  if (particles < 0) throw std::invalid_argument("negative particle number");
  const std::size_t dim = sector_dimension(modes, particles);
  if (dim > cap) {
    throw CapExceeded("sector (d=" + std::to_string(modes) + ", N=" +
                      std::to_string(particles) + ") has dimension " +
                      (dim == std::numeric_limits<std::size_t>::max() ? std::string("beyond 2^64")
                                                                      : std::to_string(dim)) +
                      " > cap " + std::to_string(cap));
  }
  states_.reserve(dim);
  std::vector<int> occ(static_cast<std::size_t>(modes), 0);
  enumerate_rec(0, particles, occ, states_);
  for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], i);
}

std::size_t SectorBasis::index_of(const FockState& s) const {
  auto it = index_.find(s);
  if (it == index_.end()) throw std::out_of_range("Fock state not in sector");
  return it->second;
}

BasisPtr enumerate_sector(int modes, int particles, std::size_t cap) {
  return std::make_shared<const SectorBasis>(modes, particles, cap);
}

SectorVector::SectorVector(BasisPtr b, Vector amps)
    : basis(std::move(b)), amplitudes(std::move(amps)) {
  if (!basis) throw std::invalid_argument("sector vector without basis");
  if (static_cast<std::size_t>(amplitudes.size()) != basis->size()) {
    throw std::invalid_argument("amplitude length does not match basis size");
  }
}

SectorVector SectorVector::zero(BasisPtr b) {
  const auto n = static_cast<Eigen::Index>(b->size());
  return SectorVector(std::move(b), Vector::Zero(n));
}

SectorVector SectorVector::basis_state(BasisPtr b, const FockState& s) {
  SectorVector v = zero(b);
  v.amplitudes(static_cast<Eigen::Index>(v.basis->index_of(s))) = 1.0;
  return v;
}

namespace {

std::map<int, int> multiplicities(const ModeTuple& t) {
  std::map<int, int> m;
  for (int x : t) ++m[x];
  return m;
}

}  // namespace

Rational perm_delta(const ModeTuple& i, const ModeTuple& j) {
  if (i.size() != j.size()) throw std::invalid_argument("perm_delta: tuple length mismatch");
  const auto mi = multiplicities(i);
  if (mi != multiplicities(j)) return Rational(0);
  std::int64_t num = 1;
  for (const auto& [mode, count] : mi) num *= factorial(count);
  return Rational(num, factorial(static_cast<int>(i.size())));
}

double TupleLabel::kappa() const { return std::sqrt(to_double(kappa_squared)); }

TupleLabel tuple_to_fock(const ModeTuple& modes, int num_modes) {
  FockState s{std::vector<int>(static_cast<std::size_t>(num_modes), 0)};
  for (int m : modes) {
    if (m < 0 || m >= num_modes) throw std::out_of_range("mode index out of range");
    ++s.occupations[static_cast<std::size_t>(m)];
  }
  Rational k2(s.occupation_factorial(), factorial(static_cast<int>(modes.size())));
  return TupleLabel{std::move(s), k2};
}

ModeTuple fock_to_tuple(const FockState& s) {
  ModeTuple t;
  for (int k = 0; k < s.modes(); ++k) {
    for (int c = 0; c < s.occupations[static_cast<std::size_t>(k)]; ++c) t.push_back(k);
  }
  return t;
}

SectorVector tuple_state(const ModeTuple& modes, BasisPtr basis) {
  if (static_cast<int>(modes.size()) != basis->particles()) {
    throw std::invalid_argument("tuple length does not match sector particle number");
  }
  const TupleLabel label = tuple_to_fock(modes, basis->modes());
  SectorVector v = SectorVector::basis_state(basis, label.state);
  v.amplitudes *= label.kappa();
  return v;
}

double inner_product_symmetrized(const ModeTuple& i, const ModeTuple& j, int num_modes) {
  if (i.size() != j.size()) {
    throw std::invalid_argument("inner_product_symmetrized: tuple length mismatch");
  }
  auto basis = enumerate_sector(num_modes, static_cast<int>(i.size()));
  const SectorVector a = tuple_state(i, basis);
  const SectorVector b = tuple_state(j, basis);
  return a.amplitudes.dot(b.amplitudes).real();
}

namespace {

// Applies single-mode ladder operators right-to-left, so that the string
// a_{i1} ... a_{iM} acts with a_{iM} first.
Vector apply_string(const ModeTuple& modes, bool create, const SectorBasis& from,
                    const Vector& amps, const SectorBasis& to) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(to.size()));
  for (std::size_t r = 0; r < from.size(); ++r) {
    const cplx a = amps(static_cast<Eigen::Index>(r));
    if (a == cplx(0.0)) continue;
    std::vector<int> occ = from.state(r).occupations;
    double amp = 1.0;
    bool alive = true;
    for (auto it = modes.rbegin(); it != modes.rend(); ++it) {
      auto& n = occ.at(static_cast<std::size_t>(*it));
      if (create) {
        ++n;
        amp *= std::sqrt(static_cast<double>(n));
      } else {
        if (n == 0) {
          alive = false;
          break;
        }
        amp *= std::sqrt(static_cast<double>(n));
        --n;
      }
    }
    if (!alive) continue;
    out(static_cast<Eigen::Index>(to.index_of(FockState{occ}))) += amp * a;
  }
  return out;
}

void check_modes(const ModeTuple& modes, int d) {
  for (int m : modes) {
    if (m < 0 || m >= d) throw std::out_of_range("mode index out of range");
  }
}

}  // namespace

SectorVector apply_annihilation_string(const ModeTuple& modes, const SectorVector& v) {
  const int n = v.basis->particles();
  const int m = static_cast<int>(modes.size());
  if (m > n) throw std::invalid_argument("annihilation string longer than particle number");
  check_modes(modes, v.basis->modes());
  auto target = enumerate_sector(v.basis->modes(), n - m);
  Vector out = apply_string(modes, false, *v.basis, v.amplitudes, *target);
  return SectorVector(std::move(target), std::move(out));
}

SectorVector apply_creation_string(const ModeTuple& modes, const SectorVector& v,
                                   std::size_t cap) {
  check_modes(modes, v.basis->modes());
  auto target = enumerate_sector(v.basis->modes(),
                                 v.basis->particles() + static_cast<int>(modes.size()), cap);
  Vector out = apply_string(modes, true, *v.basis, v.amplitudes, *target);
  return SectorVector(std::move(target), std::move(out));
}

namespace {

Matrix string_matrix(const ModeTuple& modes, bool create, const SectorBasis& from,
                     const SectorBasis& to) {
  const int shift = create ? static_cast<int>(modes.size()) : -static_cast<int>(modes.size());
  if (from.modes() != to.modes() || from.particles() + shift != to.particles()) {
    throw std::invalid_argument("string matrix: sectors do not match string length");
  }
  check_modes(modes, from.modes());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(to.size()),
                            static_cast<Eigen::Index>(from.size()));
  for (std::size_t c = 0; c < from.size(); ++c) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(from.size()));
    e(static_cast<Eigen::Index>(c)) = 1.0;
    out.col(static_cast<Eigen::Index>(c)) = apply_string(modes, create, from, e, to);
  }
  return out;
}

}  // namespace

Matrix annihilation_string_matrix(const ModeTuple& modes, const SectorBasis& from,
                                  const SectorBasis& to) {
  return string_matrix(modes, false, from, to);
}

Matrix creation_string_matrix(const ModeTuple& modes, const SectorBasis& from,
                              const SectorBasis& to) {
  return string_matrix(modes, true, from, to);
}

}  // namespace rdyn
