#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "oracles.hpp"
#include "rdyn/fock_sector.hpp"

using namespace rdyn;

TEST_CASE("sector dimension is C(N+d-1, d-1)") {
  CHECK(sector_dimension(3, 3) == 10);
  CHECK(sector_dimension(2, 5) == 6);
  CHECK(sector_dimension(4, 0) == 1);
  CHECK(sector_dimension(8, 2) == 36);
  for (int d = 1; d <= 5; ++d)
    for (int n = 0; n <= 5; ++n) CHECK(enumerate_sector(d, n)->size() == sector_dimension(d, n));
}

TEST_CASE("basis is reverse lexicographic") {
  const BasisPtr b = enumerate_sector(3, 2);
  const std::vector<std::vector<int>> expected = {{2, 0, 0}, {1, 1, 0}, {1, 0, 1},
                                                  {0, 2, 0}, {0, 1, 1}, {0, 0, 2}};
  REQUIRE(b->size() == expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    CHECK(b->state(k).occupations == expected[k]);
    CHECK(b->index_of(b->state(k)) == k);
  }
  CHECK_FALSE(b->contains(FockState{{1, 1, 1}}));
  CHECK_THROWS_AS(b->index_of(FockState{{1, 1, 1}}), std::out_of_range);
}

TEST_CASE("dimension cap") {
  CHECK_THROWS_AS(SectorBasis(10, 10, 1000), CapExceeded);
  CHECK_NOTHROW(SectorBasis(3, 3, 10));
  CHECK_THROWS_AS(SectorBasis(3, 3, 9), CapExceeded);
  CHECK_THROWS_AS(SectorBasis(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(SectorBasis(2, -1), std::invalid_argument);
}

TEST_CASE("perm_delta matches the permutation sum for d=3, K<=4") {
  for (int k = 0; k <= 4; ++k) {
    const auto tuples = oracle::all_tuples(3, k);
    for (const auto& i : tuples)
      for (const auto& j : tuples) REQUIRE(perm_delta(i, j) == oracle::perm_delta(i, j));
  }
}

TEST_CASE("perm_delta examples") {
  CHECK(perm_delta({0, 0, 1}, {0, 1, 0}) == Rational(1, 3));
  CHECK(perm_delta({0, 1, 2}, {2, 1, 0}) == Rational(1, 6));
  CHECK(perm_delta({1, 1, 1}, {1, 1, 1}) == Rational(1));
  CHECK(perm_delta({0, 1}, {0, 2}) == Rational(0));
}

TEST_CASE("tuple labels") {
  const TupleLabel t = tuple_to_fock({0, 0, 1}, 3);
  CHECK(t.state.occupations == std::vector<int>{2, 1, 0});
  CHECK(t.kappa_squared == Rational(1, 3));
  CHECK(fock_to_tuple(FockState{{0, 2, 1}}) == ModeTuple{1, 1, 2});
  CHECK_THROWS_AS(tuple_to_fock({0, 3}, 3), std::out_of_range);
}

TEST_CASE("tuple states agree with the ladder construction") {
  const int d = 3;
  for (int n = 1; n <= 3; ++n) {
    const BasisPtr b = enumerate_sector(d, n);
    for (const auto& t : oracle::all_tuples(d, n)) {
      const Vector ours = tuple_state(t, b).amplitudes;
      const Vector ref = oracle::to_vector(oracle::tuple_state(t, d), *b);
      REQUIRE((ours - ref).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("overlap of tuple states is the permutation-invariant delta") {
  for (const auto& i : oracle::all_tuples(3, 3))
    for (const auto& j : oracle::all_tuples(3, 3)) {
      REQUIRE(std::abs(inner_product_symmetrized(i, j, 3) - to_double(perm_delta(i, j))) < 1e-14);
    }
}

TEST_CASE("ordered tuple states resolve the identity") {
  for (int n = 1; n <= 3; ++n) {
    const BasisPtr b = enumerate_sector(3, n);
    const auto dim = static_cast<Eigen::Index>(b->size());
    Matrix sum = Matrix::Zero(dim, dim);
    for (const auto& t : oracle::all_tuples(3, n)) {
      const Vector v = tuple_state(t, b).amplitudes;
      sum += v * v.adjoint();
    }
    CHECK(max_abs(sum - Matrix::Identity(dim, dim)) < 1e-12);
  }
}

TEST_CASE("string actions match single-ladder products on every basis state") {
  const int d = 3;
  const int n = 3;
  const BasisPtr b = enumerate_sector(d, n);
  for (int m = 0; m <= n; ++m) {
    for (const auto& modes : oracle::all_tuples(d, m)) {
      for (const FockState& s : b->states()) {
        const SectorVector v = SectorVector::basis_state(b, s);
        const SectorVector down = apply_annihilation_string(modes, v);
        const oracle::State ref = oracle::annihilate(modes, oracle::State{{s.occupations, 1.0}});
        REQUIRE((down.amplitudes - oracle::to_vector(ref, *down.basis)).cwiseAbs().maxCoeff() <
                1e-12);
        const SectorVector up = apply_creation_string(modes, v);
        const oracle::State ref_up = oracle::create(modes, oracle::State{{s.occupations, 1.0}});
        REQUIRE((up.amplitudes - oracle::to_vector(ref_up, *up.basis)).cwiseAbs().maxCoeff() <
                1e-12);
      }
    }
  }
}

TEST_CASE("annihilation on tuple states follows the subset expansion") {
  // a_{i1..iM}|phi_j> = sqrt((N-M)!/N!) M! sum_{alpha} delta_{i;j_alpha} |phi_{j \ j_alpha}>
  const int d = 3;
  const int n = 3;
  for (int m = 1; m <= n; ++m) {
    const BasisPtr small = enumerate_sector(d, n - m);
    for (const auto& i : oracle::all_tuples(d, m))
      for (const auto& j : oracle::all_tuples(d, n)) {
        const SectorVector got = apply_annihilation_string(i, tuple_state(j, enumerate_sector(d, n)));
        Vector expect = Vector::Zero(static_cast<Eigen::Index>(small->size()));
        std::vector<int> mask(static_cast<std::size_t>(n), 0);
        std::fill(mask.begin(), mask.begin() + m, 1);
        std::sort(mask.begin(), mask.end());
        do {
          ModeTuple picked, rest;
          for (int k = 0; k < n; ++k) (mask[static_cast<std::size_t>(k)] ? picked : rest).push_back(j[static_cast<std::size_t>(k)]);
          const double w = to_double(perm_delta(i, picked));
          if (w != 0.0) expect += w * tuple_state(rest, small).amplitudes;
        } while (std::next_permutation(mask.begin(), mask.end()));
        expect *= std::sqrt(oracle::factorial(n - m) / oracle::factorial(n)) * oracle::factorial(m);
        REQUIRE((got.amplitudes - expect).cwiseAbs().maxCoeff() < 1e-12);
      }
  }
}

TEST_CASE("number strings sum to N!/(N-M)! times the identity") {
  for (int m = 1; m <= 3; ++m) {
    const BasisPtr b = enumerate_sector(3, 3);
    const BasisPtr low = enumerate_sector(3, 3 - m);
    const auto dim = static_cast<Eigen::Index>(b->size());
    Matrix sum = Matrix::Zero(dim, dim);
    for (const auto& t : oracle::all_tuples(3, m)) {
      sum += creation_string_matrix(t, *low, *b) * annihilation_string_matrix(t, *b, *low);
    }
    const double f = oracle::factorial(3) / oracle::factorial(3 - m);
    CHECK(max_abs(sum - f * Matrix::Identity(dim, dim)) < 1e-12);
  }
}

TEST_CASE("annihilating past the vacuum gives zero") {
  const BasisPtr b = enumerate_sector(2, 1);
  const SectorVector v = SectorVector::basis_state(b, FockState{{1, 0}});
  const SectorVector out = apply_annihilation_string({1}, v);
  CHECK(out.amplitudes.norm() == 0.0);
  CHECK_THROWS_AS(apply_annihilation_string({0, 0}, v), std::invalid_argument);
}

TEST_CASE("environment override of the dimension cap") {
  setenv("RDYN_MAX_DIM", "5", 1);
  CHECK(default_dimension_cap() == 5);
  CHECK_THROWS_AS(enumerate_sector(3, 2), CapExceeded);
  unsetenv("RDYN_MAX_DIM");
  CHECK(default_dimension_cap() == 20000);
}
