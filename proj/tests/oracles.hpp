// Independent reference implementations used only by the tests.
// Everything here works in the full 2^L occupation space and never touches BipartiteIndex.
#ifndef CONFCOH_TESTS_ORACLES_HPP
#define CONFCOH_TESTS_ORACLES_HPP

#include <algorithm>
#include <functional>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include <confcoh/confcoh.hpp>

namespace oracle {

using confcoh::Bits;
using confcoh::cplx;
using confcoh::Matrix;

/// Sector index -> full-space index (bit pattern, site 0 most significant).
inline Matrix embed_full(const confcoh::DensityMatrix& rho) {
  const auto& b = rho.basis();
  const Eigen::Index full = Eigen::Index{1} << b.sites();
  Matrix out = Matrix::Zero(full, full);
  for (std::size_t r = 0; r < b.dim(); ++r)
    for (std::size_t c = 0; c < b.dim(); ++c)
      out(static_cast<Eigen::Index>(b.state(r)), static_cast<Eigen::Index>(b.state(c))) = rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

/// C = Tr_B |rho>><<rho| by explicit reshaping in the full 2^LA x 2^LB product space.
inline Matrix c_matrix_full(const confcoh::DensityMatrix& rho, int cut) {
  const int L = rho.basis().sites();
  const Matrix full = embed_full(rho);
  const Eigen::Index da = Eigen::Index{1} << cut, db = Eigen::Index{1} << (L - cut);
  Matrix m = Matrix::Zero(da * da, db * db);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index mu = 0; mu < db; ++mu)
      for (Eigen::Index j = 0; j < da; ++j)
        for (Eigen::Index nu = 0; nu < db; ++nu) m(i * da + j, mu * db + nu) = full(i * db + mu, j * db + nu);
  return m * m.adjoint();
}

/// Nonzero eigenvalues (> thresh) of a Hermitian matrix, descending.
inline std::vector<double> nonzero_eigs(const Matrix& h, double thresh = 1e-13) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  std::vector<double> out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    if (es.eigenvalues()(k) > thresh) out.push_back(es.eigenvalues()(k));
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline std::vector<double> drop_small(std::vector<double> v, double thresh = 1e-13) {
  v.erase(std::remove_if(v.begin(), v.end(), [&](double x) { return x <= thresh; }), v.end());
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

inline int b_count(Bits s, int L, int cut) { return confcoh::popcount(s & ((Bits{1} << (L - cut)) - 1)); }

/// Sum of |rho_ab|^2 over pairs whose B particle numbers differ, straight from bit patterns.
inline double config_coherence_bits(const confcoh::DensityMatrix& rho, int cut) {
  const auto& b = rho.basis();
  double s = 0.0;
  for (std::size_t r = 0; r < b.dim(); ++r)
    for (std::size_t c = 0; c < b.dim(); ++c)
      if (b_count(b.state(r), b.sites(), cut) != b_count(b.state(c), b.sites(), cut))
        s += std::norm(rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
  return s;
}

/// Reduced density matrix on A by explicit partial trace in the full space.
inline Matrix reduced_a(const Eigen::VectorXcd& psi_sector, const confcoh::SectorBasis& b, int cut) {
  const int L = b.sites();
  const Eigen::Index da = Eigen::Index{1} << cut, db = Eigen::Index{1} << (L - cut);
  Matrix coeff = Matrix::Zero(da, db);
  for (std::size_t g = 0; g < b.dim(); ++g) {
    const Bits s = b.state(g);
    coeff(static_cast<Eigen::Index>(s >> (L - cut)), static_cast<Eigen::Index>(s & static_cast<Bits>(db - 1))) = psi_sector(static_cast<Eigen::Index>(g));
  }
  return coeff * coeff.adjoint();
}

/// Hopping Hamiltonian in the full 2^L space from sigma^+ sigma^- Kronecker products, projected onto the sector.
inline Matrix hamiltonian_kron(const confcoh::SectorBasis& b, double J) {
  const int L = b.sites();
  Eigen::Matrix2cd sp = Eigen::Matrix2cd::Zero(), id = Eigen::Matrix2cd::Identity();
  sp(1, 0) = 1.0;  // |1><0| with local basis (0, 1)
  const Eigen::Matrix2cd sm = sp.adjoint();
  auto kron_chain = [&](const std::vector<Eigen::Matrix2cd>& ops) {
    Matrix acc = Matrix::Ones(1, 1);
    for (const auto& o : ops) {
      Matrix next(acc.rows() * 2, acc.cols() * 2);
      for (Eigen::Index r = 0; r < acc.rows(); ++r)
        for (Eigen::Index c = 0; c < acc.cols(); ++c) next.block(2 * r, 2 * c, 2, 2) = acc(r, c) * o;
      acc = std::move(next);
    }
    return acc;
  };
  const Eigen::Index full = Eigen::Index{1} << L;
  Matrix h = Matrix::Zero(full, full);
  for (int k = 0; k + 1 < L; ++k) {
    std::vector<Eigen::Matrix2cd> ops(static_cast<std::size_t>(L), id);
    ops[static_cast<std::size_t>(k)] = sp;
    ops[static_cast<std::size_t>(k) + 1] = sm;
    const Matrix t = kron_chain(ops);
    h += J * (t + t.adjoint());
  }
  const auto d = static_cast<Eigen::Index>(b.dim());
  Matrix out(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) out(r, c) = h(static_cast<Eigen::Index>(b.state(static_cast<std::size_t>(r))), static_cast<Eigen::Index>(b.state(static_cast<std::size_t>(c))));
  return out;
}

/// Dissipator gamma sum_i (2 n_i rho n_i - {n_i, rho}) with explicit matrix products.
inline Matrix dissipator_products(const Matrix& rho, const confcoh::SectorBasis& b, double gamma) {
  const auto d = static_cast<Eigen::Index>(b.dim());
  Matrix out = Matrix::Zero(d, d);
  for (int i = 0; i < b.sites(); ++i) {
    Matrix n = Matrix::Zero(d, d);
    for (Eigen::Index g = 0; g < d; ++g) n(g, g) = b.occupation(static_cast<std::size_t>(g), i) ? 1.0 : 0.0;
    out += gamma * (2.0 * n * rho * n - n * rho - rho * n);
  }
  return out;
}

/// Row-major vectorized Liouvillian on the sector: vec(X)_{a d + b} = X_ab.
inline Matrix liouvillian(const confcoh::SectorBasis& b, double J, double gamma) {
  const Matrix h = hamiltonian_kron(b, J);
  const auto d = static_cast<Eigen::Index>(b.dim());
  Matrix lv = Matrix::Zero(d * d, d * d);
  // -i (H x 1 - 1 x H^T) in row-major convention
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index bb = 0; bb < d; ++bb)
      for (Eigen::Index c = 0; c < d; ++c) {
        lv(a * d + bb, c * d + bb) += cplx{0.0, -1.0} * h(a, c);
        lv(a * d + bb, a * d + c) += cplx{0.0, 1.0} * h(c, bb);
      }
  for (int i = 0; i < b.sites(); ++i)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index bb = 0; bb < d; ++bb) {
        const double na = b.occupation(static_cast<std::size_t>(a), i), nb = b.occupation(static_cast<std::size_t>(bb), i);
        lv(a * d + bb, a * d + bb) += gamma * (2.0 * na * nb - na - nb);
      }
  return lv;
}

/// Exact propagation exp(t L) applied to rho.
inline Matrix propagate_exact(const Matrix& rho, const confcoh::SectorBasis& b, double J, double gamma, double t) {
  const auto d = static_cast<Eigen::Index>(b.dim());
  const Matrix prop = (t * liouvillian(b, J, gamma)).exp();
  Eigen::VectorXcd v(d * d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index bb = 0; bb < d; ++bb) v(a * d + bb) = rho(a, bb);
  const Eigen::VectorXcd w = prop * v;
  Matrix out(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index bb = 0; bb < d; ++bb) out(a, bb) = w(a * d + bb);
  return out;
}

/// Negativity in the full 2^L space via an independent partial transpose.
inline double negativity_full(const confcoh::DensityMatrix& rho, int cut) {
  const int L = rho.basis().sites();
  const Matrix full = embed_full(rho);
  const Eigen::Index da = Eigen::Index{1} << cut, db = Eigen::Index{1} << (L - cut);
  Matrix pt(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index mu = 0; mu < db; ++mu)
      for (Eigen::Index j = 0; j < da; ++j)
        for (Eigen::Index nu = 0; nu < db; ++nu) pt(i * db + nu, j * db + mu) = full(i * db + mu, j * db + nu);
  Eigen::SelfAdjointEigenSolver<Matrix> es(pt, Eigen::EigenvaluesOnly);
  double neg = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    if (es.eigenvalues()(k) < 0.0) neg -= es.eigenvalues()(k);
  return neg;
}

}  // namespace oracle

#endif  // CONFCOH_TESTS_ORACLES_HPP
