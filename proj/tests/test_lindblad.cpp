#include <gtest/gtest.h>

#include <cmath>

#include <confcoh/lindblad.hpp>
#include <confcoh/random.hpp>

#include "oracles.hpp"

using namespace confcoh;

TEST(Hamiltonian, TwoSites) {
  const Matrix h = hamiltonian({2, 0.7, 0.0}, *enumerate_sector(2, 1));
  EXPECT_EQ(h(0, 0), cplx(0.0));
  EXPECT_EQ(h(0, 1), cplx(0.7));
  EXPECT_EQ(h(1, 0), cplx(0.7));
  EXPECT_EQ(h(1, 1), cplx(0.0));
}

TEST(Hamiltonian, ThreeSiteSpectrum) {
  const RealVector ev = hermitian_eigenvalues(hamiltonian({3, 1.3, 0.0}, *enumerate_sector(3, 1)));
  EXPECT_NEAR(ev(0), -std::sqrt(2.0) * 1.3, 1e-14);
  EXPECT_NEAR(ev(1), 0.0, 1e-14);
  EXPECT_NEAR(ev(2), std::sqrt(2.0) * 1.3, 1e-14);
}

TEST(Hamiltonian, HermitianAndMatchesKroneckerOracle) {
  const Matrix h12 = hamiltonian({12, 1.0, 0.0}, *enumerate_sector(12, 2));
  EXPECT_EQ(max_abs(h12 - h12.adjoint()), 0.0);
  for (int N = 0; N <= 5; ++N) {
    const auto b = enumerate_sector(5, N);
    EXPECT_LT(max_abs(hamiltonian({5, 0.9, 0.0}, *b) - oracle::hamiltonian_kron(*b, 0.9)), 1e-15);
  }
}

TEST(LindbladModel, Validation) {
  EXPECT_THROW(LindbladModel({1, 1.0, 0.0}).validate(), std::invalid_argument);
  EXPECT_THROW(LindbladModel({4, 1.0, -0.1}).validate(), std::invalid_argument);
  EXPECT_THROW(LindbladModel({4, INFINITY, 0.1}).validate(), std::invalid_argument);
  EXPECT_THROW(hamiltonian({4, 1.0, 0.0}, *enumerate_sector(5, 2)), std::invalid_argument);
}

TEST(LindbladRhs, TracelessAndHermitian) {
  const auto b = enumerate_sector(6, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rho = random_fixed_n_density(b, 3, seed);
    const Matrix r = lindblad_rhs(rho, {6, 1.0, 0.3});
    EXPECT_LT(std::abs(r.trace()), 1e-14);
    EXPECT_LT(max_abs(r - r.adjoint()), 1e-14);
  }
}

TEST(LindbladRhs, DiagonalStateWithoutHoppingIsStationary) {
  const auto rho = diag_part(random_fixed_n_density(enumerate_sector(5, 2), 4, 1));
  EXPECT_LT(max_abs(lindblad_rhs(rho, {5, 0.0, 0.8})), 1e-16);
}

TEST(LindbladRhs, DissipatorMatchesMatrixProducts) {
  const auto b = enumerate_sector(5, 2);
  const auto rho = random_fixed_n_density(b, 5, 7);
  const double gamma = 0.37;
  const Matrix got = lindblad_rhs(rho, {5, 0.0, gamma});
  const Matrix ref = oracle::dissipator_products(rho.data(), *b, gamma);
  EXPECT_LT(max_abs(got - ref), 1e-15);
  // Entrywise: rate gamma per site where the two configurations differ.
  for (Eigen::Index a = 0; a < rho.data().rows(); ++a)
    for (Eigen::Index c = 0; c < rho.data().cols(); ++c) {
      const int diff = popcount(b->state(static_cast<std::size_t>(a)) ^ b->state(static_cast<std::size_t>(c)));
      EXPECT_LT(std::abs(got(a, c) + gamma * diff * rho(a, c)), 1e-15);
    }
}

TEST(LindbladRhs, UnitaryLimitIsCommutator) {
  const auto b = enumerate_sector(5, 2);
  const auto rho = random_fixed_n_density(b, 2, 9);
  const Matrix h = oracle::hamiltonian_kron(*b, 1.1);
  const Matrix ref = cplx{0.0, -1.0} * (h * rho.data() - rho.data() * h);
  EXPECT_LT(max_abs(lindblad_rhs(rho, {5, 1.1, 0.0}) - ref), 1e-14);
}

TEST(Evolve, RabiOscillation) {
  const auto b = enumerate_sector(2, 1);
  const auto rho0 = projector(occupation_state(b, {0}));
  DenseEvolveOptions opt;
  opt.dt = 0.05;
  opt.steps = 200;
  opt.substeps = 10;
  opt.observe_every = 1;
  opt.cut = 1;
  const auto traj = evolve(rho0, {2, 1.0, 0.0}, opt);
  ASSERT_EQ(traj.points.size(), 201u);
  for (const auto& o : traj.points) EXPECT_NEAR(o.densities[0], std::pow(std::cos(o.time), 2), 1e-8);
}

TEST(Evolve, MatchesExactPropagator) {
  const auto b = enumerate_sector(4, 2);
  const auto rho0 = random_fixed_n_density(b, 2, 4);
  const LindbladModel model{4, 1.0, 0.2};
  const auto rk = evolve_state(rho0, model, 0.01, 100, 4);
  const Matrix ex = oracle::propagate_exact(rho0.data(), *b, 1.0, 0.2, 1.0);
  EXPECT_LT(max_abs(rk.data() - ex), 1e-10);
}

TEST(Evolve, StepHalvingConvergesAtFourthOrder) {
  const auto b = enumerate_sector(4, 2);
  const auto rho0 = projector(occupation_state(b, {0, 3}));
  const LindbladModel model{4, 1.0, 0.1};
  const Matrix ex = oracle::propagate_exact(rho0.data(), *b, 1.0, 0.1, 2.0);
  const double e1 = max_abs(evolve_state(rho0, model, 0.1, 20).data() - ex);
  const double e2 = max_abs(evolve_state(rho0, model, 0.05, 40).data() - ex);
  EXPECT_GT(e1 / e2, 14.0);
  EXPECT_LT(e1 / e2, 18.0);
}

TEST(Evolve, PurityNonIncreasingWithDephasing) {
  const auto b = enumerate_sector(6, 2);
  DenseEvolveOptions opt;
  opt.dt = 0.05;
  opt.steps = 400;
  opt.observe_every = 1;
  opt.cut = 3;
  const auto traj = evolve(projector(occupation_state(b, {0, 5})), {6, 1.0, 0.05}, opt);
  for (std::size_t k = 1; k < traj.points.size(); ++k) {
    EXPECT_LE(traj.points[k].purity, traj.points[k - 1].purity + 1e-12);
    EXPECT_GT(traj.points[k].time, traj.points[k - 1].time);
  }
  EXPECT_NEAR(traj.points.front().coherence, 0.0, 1e-15);
  EXPECT_GT(traj.points.back().coherence, 1e-3);
}

TEST(Evolve, UnitaryEvolutionPreservesPurity) {
  const auto b = enumerate_sector(6, 3);
  DenseEvolveOptions opt;
  opt.dt = 0.05;
  opt.steps = 200;
  opt.substeps = 10;
  opt.cut = 3;
  const auto traj = evolve(projector(random_pure_state(b, 5)), {6, 1.0, 0.0}, opt);
  for (const auto& o : traj.points) EXPECT_NEAR(o.purity, 1.0, 1e-8);
}

TEST(Evolve, DephasingStepIsUnital) {
  const auto b = enumerate_sector(6, 2);
  const auto mm = maximally_mixed(b);
  const auto out = evolve_state(mm, {6, 1.0, 0.005}, 0.05, 1);
  EXPECT_LT(max_abs(out.data() - mm.data()), 1e-10);
}

TEST(Evolve, TracePreservedAndStatesValid) {
  const auto b = enumerate_sector(5, 2);
  const auto rho = evolve_state(random_fixed_n_density(b, 3, 2), {5, 1.0, 0.2}, 0.05, 100);
  EXPECT_NEAR(rho.data().trace().real(), 1.0, 1e-12);
  EXPECT_GE(hermitian_eigenvalues(rho.data())(0), -1e-8);
}

TEST(Evolve, InvalidOptionsAndDriftAbort) {
  const auto b = enumerate_sector(3, 1);
  const auto rho0 = projector(occupation_state(b, {0}));
  DenseEvolveOptions opt;
  opt.steps = 2;
  opt.dt = -1.0;
  EXPECT_THROW(evolve(rho0, {3, 1.0, 0.0}, opt), std::invalid_argument);
  opt.dt = 0.05;
  opt.substeps = 0;
  EXPECT_THROW(evolve(rho0, {3, 1.0, 0.0}, opt), std::invalid_argument);
  opt.substeps = 1;
  EXPECT_THROW(evolve(rho0, {3, 1e300, 0.0}, opt), NumericalAbort);
}
