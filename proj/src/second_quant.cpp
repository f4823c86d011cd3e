#include "rdyn/second_quant.hpp"

#include <cmath>
#include <cstdio>

namespace rdyn {

OneBodyOperator::OneBodyOperator(Matrix coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.rows() != coeffs_.cols() || coeffs_.rows() < 1) {
    throw std::invalid_argument("one-body coefficients must be a non-empty square matrix");
  }
}

OneBodyOperator OneBodyOperator::zero(int modes) {
  return OneBodyOperator(Matrix::Zero(modes, modes));
}

Tensor4::Tensor4(int modes)
    : d_(modes), data_(static_cast<std::size_t>(modes) * modes * modes * modes, cplx(0.0)) {
  if (modes < 1) throw std::invalid_argument("tensor needs at least one mode");
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (const auto& x : data_) m = std::max(m, std::abs(x));
  return m;
}

Tensor4& Tensor4::operator+=(const Tensor4& o) {
  if (o.d_ != d_) throw std::invalid_argument("tensor mode mismatch");
  for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
  return *this;
}

Tensor4& Tensor4::operator*=(cplx s) {
  for (auto& x : data_) x *= s;
  return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator-(Tensor4 a, const Tensor4& b) {
  Tensor4 nb = b;
  nb *= -1.0;
  return a += nb;
}
Tensor4 operator*(cplx s, Tensor4 a) { return a *= s; }

Tensor4 symmetrize_exchange(const Tensor4& t) {
  const int d = t.modes();
  Tensor4 out(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          out(i, j, k, l) = 0.25 * (t(i, j, k, l) + t(j, i, k, l) + t(i, j, l, k) + t(j, i, l, k));
  return out;
}

double TwoBodyOperator::hermiticity_defect(const Tensor4& t) {
  const int d = t.modes();
  double m = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          m = std::max(m, std::abs(t(i, j, k, l) - std::conj(t(l, k, j, i))));
  return m;
}

TwoBodyOperator::TwoBodyOperator(Tensor4 raw, HermiticityPolicy policy) {
  Tensor4 sym = symmetrize_exchange(raw);
  const double defect = hermiticity_defect(sym);
  if (defect >= 1e-12) {
    if (policy == HermiticityPolicy::require) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "two-body tensor not Hermitian (max dev = %.3e)", defect);
      throw std::invalid_argument(buf);
    }
    const int d = sym.modes();
    Tensor4 herm(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l)
            herm(i, j, k, l) = 0.5 * (sym(i, j, k, l) + std::conj(sym(l, k, j, i)));
    sym = std::move(herm);
  }
  coeffs_ = std::move(sym);
}

TwoBodyOperator TwoBodyOperator::zero(int modes) {
  return TwoBodyOperator(Tensor4(modes), Canonical{});
}

TwoBodyOperator TwoBodyOperator::contact(int modes, double g) {
  Tensor4 t(modes);
  for (int x = 0; x < modes; ++x) t(x, x, x, x) = g;
  return TwoBodyOperator(std::move(t), Canonical{});
}

TwoBodyOperator TwoBodyOperator::rotated(const Matrix& u) const {
  const int d = modes();
  if (u.rows() != d || u.cols() != d) throw std::invalid_argument("rotation dimension mismatch");
  // Contract one index at a time: O(d^5) instead of O(d^8).
  const Tensor4& v = coeffs_;
  Tensor4 t1(d), t2(d), t3(d), t4(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int m = 0; m < d; ++m) {
          cplx s = 0.0;
          for (int x = 0; x < d; ++x) s += v(a, b, c, x) * u(x, m);
          t1(a, b, c, m) = s;
        }
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int i = 0; i < d; ++i)
        for (int m = 0; m < d; ++m) {
          cplx s = 0.0;
          for (int x = 0; x < d; ++x) s += t1(a, b, x, m) * u(x, i);
          t2(a, b, i, m) = s;
        }
  for (int a = 0; a < d; ++a)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        for (int m = 0; m < d; ++m) {
          cplx s = 0.0;
          for (int x = 0; x < d; ++x) s += std::conj(u(x, j)) * t2(a, x, i, m);
          t3(a, j, i, m) = s;
        }
  for (int n = 0; n < d; ++n)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        for (int m = 0; m < d; ++m) {
          cplx s = 0.0;
          for (int x = 0; x < d; ++x) s += std::conj(u(x, n)) * t3(x, j, i, m);
          t4(n, j, i, m) = s;
        }
  return TwoBodyOperator(std::move(t4), Canonical{});
}

SectorOperator embed_one_body(const OneBodyOperator& h, BasisPtr basis) {
  const int d = basis->modes();
  if (h.modes() != d) throw std::invalid_argument("embed_one_body: mode-count mismatch");
  SectorOperator out = SectorOperator::zero(basis);
  const Matrix& c = h.coeffs();
  for (std::size_t col = 0; col < basis->size(); ++col) {
    std::vector<int> occ = basis->state(col).occupations;
    for (int j = 0; j < d; ++j) {
      const int nj = occ[static_cast<std::size_t>(j)];
      if (nj == 0) continue;
      const double aj = std::sqrt(static_cast<double>(nj));
      --occ[static_cast<std::size_t>(j)];
      for (int i = 0; i < d; ++i) {
        const cplx hij = c(i, j);
        if (hij == cplx(0.0)) continue;
        ++occ[static_cast<std::size_t>(i)];
        const double ai = std::sqrt(static_cast<double>(occ[static_cast<std::size_t>(i)]));
        const auto row = basis->index_of(FockState{occ});
        out.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) += hij * ai * aj;
        --occ[static_cast<std::size_t>(i)];
      }
      ++occ[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

SectorOperator embed_two_body(const TwoBodyOperator& v, BasisPtr basis) {
  const int d = basis->modes();
  if (v.modes() != d) throw std::invalid_argument("embed_two_body: mode-count mismatch");
  SectorOperator out = SectorOperator::zero(basis);
  if (basis->particles() < 2) return out;
  const Tensor4& t = v.coeffs();
  for (std::size_t col = 0; col < basis->size(); ++col) {
    std::vector<int> occ = basis->state(col).occupations;
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) {
        // a_k a_l: a_l acts first.
        auto& nl = occ[static_cast<std::size_t>(l)];
        if (nl == 0) continue;
        double amp = std::sqrt(static_cast<double>(nl));
        --nl;
        auto& nk = occ[static_cast<std::size_t>(k)];
        if (nk == 0) {
          ++nl;
          continue;
        }
        amp *= std::sqrt(static_cast<double>(nk));
        --nk;
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            const cplx c = t(i, j, k, l);
            if (c == cplx(0.0)) continue;
            // a^dag_i a^dag_j: a^dag_j acts first.
            auto& nj = occ[static_cast<std::size_t>(j)];
            ++nj;
            double amp2 = amp * std::sqrt(static_cast<double>(nj));
            auto& ni = occ[static_cast<std::size_t>(i)];
            ++ni;
            amp2 *= std::sqrt(static_cast<double>(ni));
            const auto row = basis->index_of(FockState{occ});
            out.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) +=
                0.5 * c * amp2;
            --ni;
            --nj;
          }
        }
        ++nk;
        ++nl;
      }
    }
  }
  return out;
}

SectorOperator number_operator(BasisPtr basis) {
  SectorOperator out = SectorOperator::zero(basis);
  for (std::size_t i = 0; i < basis->size(); ++i) {
    out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        static_cast<double>(basis->particles());
  }
  return out;
}

namespace {

// sqrt(prod_k C(n_k, e_k))
double binomial_weight(const FockState& n, const FockState& e) {
  double w = 1.0;
  for (std::size_t k = 0; k < n.occupations.size(); ++k) {
    w *= binomial_real(n.occupations[k], e.occupations[k]);
  }
  return std::sqrt(w);
}

FockState add(const FockState& a, const FockState& b) {
  FockState s = a;
  for (std::size_t k = 0; k < s.occupations.size(); ++k) s.occupations[k] += b.occupations[k];
  return s;
}

}  // namespace

SectorOperator embed_m_particle(const SectorOperator& a, BasisPtr target) {
  const SectorBasis& small = *a.basis;
  if (small.modes() != target->modes()) {
    throw std::invalid_argument("embed_m_particle: mode-count mismatch");
  }
  const int m = small.particles();
  const int n = target->particles();
  SectorOperator out = SectorOperator::zero(target);
  if (m > n) return out;
  // <n|A^(N)|n'> = sum_e A_{n-e, n'-e} sqrt(prod C(n,e) prod C(n',e)) over
  // environment occupations e with N - M particles.
  const SectorBasis env(target->modes(), n - m, std::numeric_limits<std::size_t>::max());
  for (const FockState& e : env.states()) {
    std::vector<Eigen::Index> rows(small.size());
    std::vector<double> weights(small.size());
    for (std::size_t s = 0; s < small.size(); ++s) {
      const FockState full = add(small.state(s), e);
      rows[s] = static_cast<Eigen::Index>(target->index_of(full));
      weights[s] = binomial_weight(full, e);
    }
    for (std::size_t r = 0; r < small.size(); ++r) {
      for (std::size_t c = 0; c < small.size(); ++c) {
        const cplx v = a.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (v == cplx(0.0)) continue;
        out.matrix(rows[r], rows[c]) += v * weights[r] * weights[c];
      }
    }
  }
  return out;
}

cplx tuple_element(const SectorOperator& a, const ModeTuple& k, const ModeTuple& l) {
  const int d = a.basis->modes();
  const TupleLabel lk = tuple_to_fock(k, d);
  const TupleLabel ll = tuple_to_fock(l, d);
  const auto r = static_cast<Eigen::Index>(a.basis->index_of(lk.state));
  const auto c = static_cast<Eigen::Index>(a.basis->index_of(ll.state));
  return lk.kappa() * ll.kappa() * a.matrix(r, c);
}

namespace {

void subsets(int n, int m, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == m) {
    out.push_back(cur);
    return;
  }
  for (int x = start; x < n; ++x) {
    cur.push_back(x);
    subsets(n, m, x + 1, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> ordered_subsets(int n, int m) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  subsets(n, m, 0, cur, out);
  return out;
}

void split(const ModeTuple& t, const std::vector<int>& idx, ModeTuple& picked, ModeTuple& rest) {
  picked.clear();
  rest.clear();
  std::size_t p = 0;
  for (int x = 0; x < static_cast<int>(t.size()); ++x) {
    if (p < idx.size() && idx[p] == x) {
      picked.push_back(t[static_cast<std::size_t>(x)]);
      ++p;
    } else {
      rest.push_back(t[static_cast<std::size_t>(x)]);
    }
  }
}

}  // namespace

cplx m_particle_matrix_element(const SectorOperator& a, const ModeTuple& i, const ModeTuple& j) {
  if (i.size() != j.size()) throw std::invalid_argument("tuple length mismatch");
  const int n = static_cast<int>(i.size());
  const int m = a.basis->particles();
  if (m > n) throw std::invalid_argument("operator acts on more particles than the state has");
  const auto subs = ordered_subsets(n, m);
  cplx sum = 0.0;
  ModeTuple ia, ir, jb, jr;
  for (const auto& alpha : subs) {
    split(i, alpha, ia, ir);
    for (const auto& beta : subs) {
      split(j, beta, jb, jr);
      const Rational delta = perm_delta(ir, jr);
      if (delta == Rational(0)) continue;
      sum += tuple_element(a, ia, jb) * to_double(delta);
    }
  }
  return sum / binomial_real(n, m);
}

cplx expectation_m_particle(const DensityMatrix& rho, const SectorOperator& a) {
  if (rho.sector().modes() != a.basis->modes()) {
    throw std::invalid_argument("expectation: mode-count mismatch");
  }
  if (a.basis->particles() > rho.sector().particles()) {
    throw std::invalid_argument("expectation: operator particle number exceeds state");
  }
  const SectorOperator full = embed_m_particle(a, rho.basis());
  return (rho.matrix() * full.matrix).trace();
}

}  // namespace rdyn
