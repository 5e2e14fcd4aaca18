#ifndef CONFCOH_DENSITY_HPP
#define CONFCOH_DENSITY_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "sector_basis.hpp"

namespace confcoh {

struct DensityTolerances {
  double herm = 1e-10;
  double psd = 1e-10;
  double trace = 1e-10;
};

/// Hermitian, unit-trace, positive semidefinite matrix on a fixed-N sector.
class DensityMatrix {
 public:
  /// Validates all invariants; throws std::invalid_argument on violation.
  DensityMatrix(BasisPtr basis, Matrix data, DensityTolerances tol = {})
      : basis_(std::move(basis)), data_(std::move(data)), tol_(tol) {
    validate();
  }

  /// Skips the eigenvalue-based PSD check; used where positivity holds by construction.
  static DensityMatrix trusted(BasisPtr basis, Matrix data, DensityTolerances tol = {}) {
    return DensityMatrix(std::move(basis), std::move(data), tol, Trusted{});
  }

  const SectorBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Matrix& data() const { return data_; }
  std::size_t dim() const { return basis_->dim(); }
  const DensityTolerances& tolerances() const { return tol_; }
  cplx operator()(Eigen::Index r, Eigen::Index c) const { return data_(r, c); }

  void validate() const {
    const auto d = static_cast<Eigen::Index>(basis_->dim());
    if (data_.rows() != d || data_.cols() != d) throw std::invalid_argument("density matrix: shape does not match sector dimension");
    check_structure();
    const RealVector ev = hermitian_eigenvalues(data_);
    if (ev.size() > 0 && ev(0) < -tol_.psd)
      throw std::invalid_argument("density matrix: negative eigenvalue " + std::to_string(ev(0)));
  }

 private:
  struct Trusted {};
  DensityMatrix(BasisPtr basis, Matrix data, DensityTolerances tol, Trusted)
      : basis_(std::move(basis)), data_(std::move(data)), tol_(tol) {
    const auto d = static_cast<Eigen::Index>(basis_->dim());
    if (data_.rows() != d || data_.cols() != d) throw std::invalid_argument("density matrix: shape does not match sector dimension");
    check_structure();
  }

  void check_structure() const {
    if (max_abs(data_ - data_.adjoint()) > tol_.herm) throw std::invalid_argument("density matrix: not Hermitian");
    if (std::abs(data_.trace() - cplx{1.0, 0.0}) > tol_.trace) throw std::invalid_argument("density matrix: trace differs from 1");
  }

  BasisPtr basis_;
  Matrix data_;
  DensityTolerances tol_;
};

/// Normalized state vector on a fixed-N sector.
class PureState {
 public:
  PureState(BasisPtr basis, Vector amplitudes, double norm_tol = 1e-10)
      : basis_(std::move(basis)), amps_(std::move(amplitudes)) {
    if (amps_.size() != static_cast<Eigen::Index>(basis_->dim())) throw std::invalid_argument("pure state: length does not match sector dimension");
    if (std::abs(amps_.norm() - 1.0) > norm_tol) throw std::invalid_argument("pure state: not normalized");
  }

  const SectorBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Vector& amplitudes() const { return amps_; }

 private:
  BasisPtr basis_;
  Vector amps_;
};

inline PureState normalized_state(const BasisPtr& basis, const Vector& v) {
  const double nrm = v.norm();
  if (nrm == 0.0) throw std::invalid_argument("pure state: zero vector");
  return PureState(basis, v / nrm);
}

/// Product state with the given 0-based sites occupied.
inline PureState occupation_state(const BasisPtr& basis, const std::vector<int>& sites) {
  Bits b = 0;
  for (int s : sites) {
    if (s < 0 || s >= basis->sites()) throw std::invalid_argument("occupation state: site out of range");
    b |= Bits{1} << (basis->sites() - 1 - s);
  }
  auto idx = basis->find(b);
  if (!idx) throw std::invalid_argument("occupation state: particle count does not match sector");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(basis->dim()));
  v(static_cast<Eigen::Index>(*idx)) = 1.0;
  return PureState(basis, v);
}

inline DensityMatrix projector(const PureState& psi) {
  const Vector& a = psi.amplitudes();
  return DensityMatrix::trusted(psi.basis_ptr(), a * a.adjoint());
}

inline DensityMatrix maximally_mixed(const BasisPtr& basis) {
  const auto d = static_cast<Eigen::Index>(basis->dim());
  return DensityMatrix::trusted(basis, Matrix::Identity(d, d) / static_cast<double>(d));
}

struct SchmidtSpectrum {
  std::vector<double> lambdas;  // descending
  int rank = 0;                 // count of lambdas above the rank threshold
};

inline constexpr double kSchmidtRankThreshold = 1e-12;

/// Entanglement spectrum of psi across the bond after `cut` sites.
inline SchmidtSpectrum schmidt(const PureState& psi, int cut) {
  const BipartiteIndex bi(psi.basis_ptr(), cut);
  const Vector& a = psi.amplitudes();
  SchmidtSpectrum out;
  for (int n = 0; n <= bi.max_n(); ++n) {
    if (!bi.has_sector(n)) continue;
    const auto na = static_cast<Eigen::Index>(bi.a_states(n).size());
    const auto nb = static_cast<Eigen::Index>(bi.b_states(n).size());
    Matrix coeff(na, nb);
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index mu = 0; mu < nb; ++mu)
        coeff(i, mu) = a(static_cast<Eigen::Index>(bi.global(n, static_cast<std::size_t>(i), static_cast<std::size_t>(mu))));
    Eigen::JacobiSVD<Matrix> svd(coeff);
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
      const double s = svd.singularValues()(k);
      out.lambdas.push_back(s * s);
    }
  }
  std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<>());
  out.rank = static_cast<int>(std::count_if(out.lambdas.begin(), out.lambdas.end(), [](double l) { return l > kSchmidtRankThreshold; }));
  return out;
}

/// Tr rho^2.
inline double purity(const DensityMatrix& rho) { return rho.data().squaredNorm(); }

/// Column-stacked vectorization |rho>>.
inline Vector vectorize(const DensityMatrix& rho) {
  const Matrix& m = rho.data();
  return Eigen::Map<const Vector>(m.data(), m.size());
}

/// (1 - p) rho + p sigma.
inline DensityMatrix mix(const DensityMatrix& rho, const DensityMatrix& sigma, double p) {
  if (!(rho.basis() == sigma.basis())) throw std::invalid_argument("mix: states live on different sectors");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mix: p must lie in [0, 1]");
  return DensityMatrix::trusted(rho.basis_ptr(), (1.0 - p) * rho.data() + p * sigma.data(), rho.tolerances());
}

/// Occupation-basis dephased copy of rho.
inline DensityMatrix diag_part(const DensityMatrix& rho) {
  Matrix d = rho.data().diagonal().asDiagonal();
  return DensityMatrix::trusted(rho.basis_ptr(), std::move(d), rho.tolerances());
}

/// Partial transpose on B, over the A x B embedding space that contains the sector.
inline Matrix partial_transpose(const DensityMatrix& rho, int cut) {
  const BipartiteIndex bi(rho.basis_ptr(), cut);
  const std::size_t nb = bi.b_total();
  const auto e = static_cast<Eigen::Index>(bi.a_total() * nb);
  Matrix pt = Matrix::Zero(e, e);
  const auto d = static_cast<Eigen::Index>(rho.dim());
  for (Eigen::Index r = 0; r < d; ++r) {
    const std::size_t er = bi.embed(static_cast<std::size_t>(r));
    const std::size_t i = er / nb, mu = er % nb;
    for (Eigen::Index c = 0; c < d; ++c) {
      const std::size_t ec = bi.embed(static_cast<std::size_t>(c));
      const std::size_t j = ec / nb, nu = ec % nb;
      pt(static_cast<Eigen::Index>(i * nb + nu), static_cast<Eigen::Index>(j * nb + mu)) = rho(r, c);
    }
  }
  return pt;
}

/// Absolute sum of the negative eigenvalues of the partial transpose.
inline double negativity(const DensityMatrix& rho, int cut) {
  const RealVector ev = hermitian_eigenvalues(partial_transpose(rho, cut));
  double neg = 0.0;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev(k) < 0.0) neg -= ev(k);
  return neg;
}

/// Sum over i != j of lambda_i lambda_j for the Schmidt spectrum, i.e. 1 - sum lambda^2.
inline double pure_quantum_correlations(const PureState& psi, int cut) {
  const auto s = schmidt(psi, cut);
  double sq = 0.0;
  for (double l : s.lambdas) sq += l * l;
  return 1.0 - sq;
}

/// Pure-state negativity from the Schmidt spectrum: 1/2 sum_{i != j} sqrt(l_i l_j).
inline double pure_negativity(const PureState& psi, int cut) {
  const auto s = schmidt(psi, cut);
  double root_sum = 0.0;
  for (double l : s.lambdas) root_sum += std::sqrt(std::max(l, 0.0));
  return 0.5 * (root_sum * root_sum - 1.0);
}

}  // namespace confcoh

#endif  // CONFCOH_DENSITY_HPP
