#ifndef CONFCOH_LINDBLAD_HPP
#define CONFCOH_LINDBLAD_HPP

#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Sparse>

#include "oses.hpp"

namespace confcoh {

/// Open hopping chain with on-site dephasing: H = J sum_i (c_i^+ c_{i+1} + h.c.), jump operators n_i at rate gamma.
struct LindbladModel {
  int sites = 2;
  double hopping = 1.0;  // J
  double gamma = 0.0;    // dephasing rate

  void validate() const {
    if (sites < 2) throw std::invalid_argument("lindblad model: L must be >= 2");
    if (!std::isfinite(hopping) || !std::isfinite(gamma)) throw std::invalid_argument("lindblad model: J and gamma must be finite");
    if (gamma < 0.0) throw std::invalid_argument("lindblad model: gamma must be >= 0");
  }
};

using SparseMatrix = Eigen::SparseMatrix<cplx>;

inline SparseMatrix hamiltonian_sparse(const LindbladModel& model, const SectorBasis& basis) {
  model.validate();
  if (basis.sites() != model.sites) throw std::invalid_argument("hamiltonian: basis and model disagree on L");
  const int L = basis.sites();
  std::vector<Eigen::Triplet<cplx>> trip;
  for (std::size_t c = 0; c < basis.dim(); ++c) {
    const Bits s = basis.state(c);
    for (int k = 0; k + 1 < L; ++k) {
      const Bits left = Bits{1} << (L - 1 - k);
      const Bits right = Bits{1} << (L - 2 - k);
      const bool occ_l = s & left, occ_r = s & right;
      if (occ_l == occ_r) continue;
      const Bits t = s ^ left ^ right;
      trip.emplace_back(static_cast<int>(basis.index_of(t)), static_cast<int>(c), cplx{model.hopping, 0.0});
    }
  }
  const auto d = static_cast<Eigen::Index>(basis.dim());
  SparseMatrix h(d, d);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

inline Matrix hamiltonian(const LindbladModel& model, const SectorBasis& basis) {
  return Matrix(hamiltonian_sparse(model, basis));
}

/// Precomputed generator of the dephasing master equation on one sector.
class DenseLindbladian {
 public:
  DenseLindbladian(const LindbladModel& model, BasisPtr basis) : model_(model), basis_(std::move(basis)) {
    h_ = hamiltonian_sparse(model_, *basis_);
    const auto d = static_cast<Eigen::Index>(basis_->dim());
    // gamma sum_i (2 n_i rho n_i - {n_i, rho}) acts entrywise as -gamma * (Hamming distance) * rho_ab.
    decay_.resize(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b)
        decay_(a, b) = -model_.gamma * popcount(basis_->state(static_cast<std::size_t>(a)) ^ basis_->state(static_cast<std::size_t>(b)));
  }

  const LindbladModel& model() const { return model_; }
  const SparseMatrix& h() const { return h_; }
  const BasisPtr& basis_ptr() const { return basis_; }

  Matrix rhs(const Matrix& rho) const {
    Matrix hr = h_ * rho;
    Matrix out = cplx{0.0, -1.0} * (hr - hr.adjoint());  // H hermitian, rho hermitian: rho H = (H rho)^dagger
    out += decay_.cwiseProduct(rho);
    return out;
  }

  /// Same generator for a general (not necessarily Hermitian) operator.
  Matrix rhs_general(const Matrix& x) const {
    Matrix out = cplx{0.0, -1.0} * (h_ * x - x * h_);
    out += decay_.cwiseProduct(x);
    return out;
  }

  Matrix rk4_step(const Matrix& rho, double dt) const {
    const Matrix k1 = rhs_general(rho);
    const Matrix k2 = rhs_general(rho + 0.5 * dt * k1);
    const Matrix k3 = rhs_general(rho + 0.5 * dt * k2);
    const Matrix k4 = rhs_general(rho + dt * k3);
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

 private:
  LindbladModel model_;
  BasisPtr basis_;
  SparseMatrix h_;
  Eigen::MatrixXd decay_;
};

inline Matrix lindblad_rhs(const DensityMatrix& rho, const LindbladModel& model) {
  return DenseLindbladian(model, rho.basis_ptr()).rhs(rho.data());
}

/// <n_i> for every site (0-based order).
inline std::vector<double> site_densities(const DensityMatrix& rho) {
  const auto& b = rho.basis();
  std::vector<double> n(static_cast<std::size_t>(b.sites()), 0.0);
  for (std::size_t g = 0; g < b.dim(); ++g) {
    const double p = rho(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g)).real();
    for (int k = 0; k < b.sites(); ++k)
      if (b.occupation(g, k)) n[static_cast<std::size_t>(k)] += p;
  }
  return n;
}

struct Observation {
  double time = 0.0;
  double purity = 0.0;
  double coherence = 0.0;  // configuration coherence at the observed cut
  double osee = 0.0;
  std::vector<double> densities;
  std::vector<OsesEntry> top_oses;  // descending, at most top_k entries
  double discarded_weight = 0.0;    // cumulative (MPDO backend only)
};

struct Trajectory {
  std::vector<Observation> points;
};

struct DenseEvolveOptions {
  double dt = 0.05;
  int steps = 0;
  int observe_every = 10;
  int substeps = 1;  // RK4 substeps per dt
  int cut = 1;
  int top_k = 8;
  double drift_tol = 1e-8;
};

inline Observation observe_dense(const DensityMatrix& rho, double t, int cut, int top_k) {
  Observation o;
  o.time = t;
  const auto blocks = build_c_blocks(rho, cut);
  const auto spec = oses(blocks);
  o.purity = purity(rho);
  o.coherence = configuration_coherence(blocks);
  o.osee = osee(spec);
  o.densities = site_densities(rho);
  auto sorted = spec.sorted_descending();
  if (static_cast<int>(sorted.size()) > top_k) sorted.resize(static_cast<std::size_t>(top_k));
  o.top_oses = std::move(sorted);
  return o;
}

/// Fixed-step RK4 integration of the master equation, observing every `observe_every` steps
/// (and at the final step). Trace drift is renormalized each step; drift beyond drift_tol aborts.
inline Trajectory evolve(const DensityMatrix& rho0, const LindbladModel& model, const DenseEvolveOptions& opt) {
  model.validate();
  if (!(opt.dt > 0.0)) throw std::invalid_argument("evolve: dt must be positive");
  if (opt.steps < 0 || opt.observe_every < 1 || opt.substeps < 1) throw std::invalid_argument("evolve: invalid step counts");
  const DenseLindbladian lv(model, rho0.basis_ptr());
  Trajectory traj;
  Matrix rho = rho0.data();
  traj.points.push_back(observe_dense(rho0, 0.0, opt.cut, opt.top_k));
  const double h = opt.dt / opt.substeps;
  for (int step = 1; step <= opt.steps; ++step) {
    for (int s = 0; s < opt.substeps; ++s) rho = lv.rk4_step(rho, h);
    const cplx tr = rho.trace();
    const double herm = max_abs(rho - rho.adjoint());
    if (!(std::abs(tr - 1.0) <= opt.drift_tol && herm <= opt.drift_tol)) {  // NaN-safe
      std::ostringstream msg;
      msg << "evolve: drift beyond tolerance at step " << step << " (|Tr - 1| = " << std::abs(tr - 1.0) << ", hermiticity " << herm << ")";
      throw NumericalAbort(msg.str());
    }
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace().real();
    if (step % opt.observe_every == 0 || step == opt.steps) {
      DensityTolerances tol;
      tol.psd = opt.drift_tol;
      traj.points.push_back(observe_dense(DensityMatrix::trusted(rho0.basis_ptr(), rho, tol), step * opt.dt, opt.cut, opt.top_k));
    }
  }
  return traj;
}

/// Final state only.
inline DensityMatrix evolve_state(const DensityMatrix& rho0, const LindbladModel& model, double dt, int steps, int substeps = 1) {
  const DenseLindbladian lv(model, rho0.basis_ptr());
  Matrix rho = rho0.data();
  const double h = dt / substeps;
  for (int step = 0; step < steps * substeps; ++step) rho = lv.rk4_step(rho, h);
  rho = 0.5 * (rho + rho.adjoint());
  return DensityMatrix::trusted(rho0.basis_ptr(), rho / rho.trace().real());
}

}  // namespace confcoh

#endif  // CONFCOH_LINDBLAD_HPP
