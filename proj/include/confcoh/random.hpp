#ifndef CONFCOH_RANDOM_HPP
#define CONFCOH_RANDOM_HPP

#include <random>
#include <vector>

#include "density.hpp"

namespace confcoh {

enum class Side { A, B };

namespace detail {

inline Matrix ginibre(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = cplx{g(rng), g(rng)};
  return m;
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase convention fixed.
inline Matrix haar_unitary(Eigen::Index d, std::mt19937_64& rng) {
  if (d == 0) return Matrix(0, 0);
  const Matrix z = ginibre(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR();
  for (Eigen::Index k = 0; k < d; ++k) {
    const double a = std::abs(r(k, k));
    if (a > 0.0) q.col(k) *= r(k, k) / a;
  }
  return q;
}

/// Random density matrix of the given rank on a d-dimensional space.
inline Matrix random_density_block(Eigen::Index d, Eigen::Index rank, std::mt19937_64& rng) {
  const Matrix g = ginibre(d, rank, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

/// Random weights on the simplex.
inline std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(k);
  double s = 0.0;
  for (auto& x : w) s += (x = e(rng));
  for (auto& x : w) x /= s;
  return w;
}

/// Block-diagonal (in particle count) unitary on the substates of one side.
inline std::vector<Matrix> local_sector_unitaries(const BipartiteIndex& bi, Side side, std::mt19937_64& rng) {
  std::vector<Matrix> us(static_cast<std::size_t>(bi.max_n()) + 1);
  for (int n = 0; n <= bi.max_n(); ++n) {
    if (!bi.has_sector(n)) continue;
    const auto d = static_cast<Eigen::Index>(side == Side::A ? bi.a_states(n).size() : bi.b_states(n).size());
    us[static_cast<std::size_t>(n)] = haar_unitary(d, rng);
  }
  return us;
}

/// Lifts per-sector local unitaries to the full sector: U^A (x) 1 or 1 (x) U^B.
inline Matrix lift_local(const BipartiteIndex& bi, Side side, const std::vector<Matrix>& us) {
  const auto d = static_cast<Eigen::Index>(bi.basis().dim());
  Matrix u = Matrix::Zero(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const auto& sr = bi.split(static_cast<std::size_t>(r));
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto& sc = bi.split(static_cast<std::size_t>(c));
      if (sr.n != sc.n) continue;
      const Matrix& un = us[static_cast<std::size_t>(sr.n)];
      if (side == Side::A) {
        if (sr.mu == sc.mu) u(r, c) = un(static_cast<Eigen::Index>(sr.i), static_cast<Eigen::Index>(sc.i));
      } else {
        if (sr.i == sc.i) u(r, c) = un(static_cast<Eigen::Index>(sr.mu), static_cast<Eigen::Index>(sc.mu));
      }
    }
  }
  return u;
}

}  // namespace detail

inline PureState random_pure_state(const BasisPtr& basis, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix g = detail::ginibre(static_cast<Eigen::Index>(basis->dim()), 1, rng);
  return normalized_state(basis, g.col(0));
}

/// Ginibre-induced random density matrix of the requested rank.
inline DensityMatrix random_fixed_n_density(const BasisPtr& basis, int rank, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(basis->dim());
  if (rank < 1 || rank > d) throw std::invalid_argument("random density: rank must lie in [1, dim]");
  std::mt19937_64 rng(seed);
  return DensityMatrix(basis, detail::random_density_block(d, rank, rng));
}

/// sum_k p_k rho_k^A (x) rho_k^B with fixed local particle numbers per term.
inline DensityMatrix random_separable_fixed_n(const BasisPtr& basis, int cut, int terms, std::uint64_t seed) {
  if (terms < 1) throw std::invalid_argument("random separable: terms must be >= 1");
  const BipartiteIndex bi(basis, cut);
  std::vector<int> feasible;
  for (int n = 0; n <= bi.max_n(); ++n)
    if (bi.has_sector(n)) feasible.push_back(n);
  if (feasible.empty()) throw std::invalid_argument("random separable: no sector with both local subspaces nonempty");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
  const auto weights = detail::random_simplex(static_cast<std::size_t>(terms), rng);
  const auto d = static_cast<Eigen::Index>(basis->dim());
  Matrix rho = Matrix::Zero(d, d);
  for (int t = 0; t < terms; ++t) {
    const int n = feasible[pick(rng)];
    const auto na = static_cast<Eigen::Index>(bi.a_states(n).size());
    const auto nb = static_cast<Eigen::Index>(bi.b_states(n).size());
    std::uniform_int_distribution<Eigen::Index> ra(1, na), rb(1, nb);
    const Matrix rho_a = detail::random_density_block(na, ra(rng), rng);
    const Matrix rho_b = detail::random_density_block(nb, rb(rng), rng);
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index mu = 0; mu < nb; ++mu) {
        const auto r = static_cast<Eigen::Index>(bi.global(n, static_cast<std::size_t>(i), static_cast<std::size_t>(mu)));
        for (Eigen::Index j = 0; j < na; ++j)
          for (Eigen::Index nu = 0; nu < nb; ++nu) {
            const auto c = static_cast<Eigen::Index>(bi.global(n, static_cast<std::size_t>(j), static_cast<std::size_t>(nu)));
            rho(r, c) += weights[static_cast<std::size_t>(t)] * rho_a(i, j) * rho_b(mu, nu);
          }
      }
  }
  return DensityMatrix(basis, 0.5 * (rho + rho.adjoint()));
}

/// Haar-random local unitary acting on one side, block-diagonal in the local particle number.
inline Matrix random_local_nc_unitary(const BasisPtr& basis, int cut, Side side, std::uint64_t seed) {
  const BipartiteIndex bi(basis, cut);
  std::mt19937_64 rng(seed);
  return detail::lift_local(bi, side, detail::local_sector_unitaries(bi, side, rng));
}

/// Kraus set sum_k sqrt(p_k) U_k^A (x) U_k^B of local number-conserving unitaries (unital and trace preserving).
inline std::vector<Matrix> random_local_unital_channel(const BasisPtr& basis, int cut, int kraus_count, std::uint64_t seed) {
  if (kraus_count < 1) throw std::invalid_argument("random channel: kraus_count must be >= 1");
  const BipartiteIndex bi(basis, cut);
  std::mt19937_64 rng(seed);
  const auto weights = detail::random_simplex(static_cast<std::size_t>(kraus_count), rng);
  std::vector<Matrix> kraus;
  kraus.reserve(static_cast<std::size_t>(kraus_count));
  for (int k = 0; k < kraus_count; ++k) {
    const Matrix ua = detail::lift_local(bi, Side::A, detail::local_sector_unitaries(bi, Side::A, rng));
    const Matrix ub = detail::lift_local(bi, Side::B, detail::local_sector_unitaries(bi, Side::B, rng));
    kraus.push_back(std::sqrt(weights[static_cast<std::size_t>(k)]) * ua * ub);
  }
  return kraus;
}

inline DensityMatrix apply_channel(const DensityMatrix& rho, const std::vector<Matrix>& kraus) {
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Matrix out = Matrix::Zero(d, d);
  for (const auto& k : kraus) {
    if (k.rows() != d || k.cols() != d) throw std::invalid_argument("apply_channel: Kraus operator shape mismatch");
    out += k * rho.data() * k.adjoint();
  }
  return DensityMatrix::trusted(rho.basis_ptr(), 0.5 * (out + out.adjoint()), rho.tolerances());
}

/// U rho U^dagger.
inline DensityMatrix conjugate(const DensityMatrix& rho, const Matrix& u) {
  Matrix out = u * rho.data() * u.adjoint();
  return DensityMatrix::trusted(rho.basis_ptr(), 0.5 * (out + out.adjoint()), rho.tolerances());
}

}  // namespace confcoh

#endif  // CONFCOH_RANDOM_HPP
