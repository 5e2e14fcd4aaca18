#include <gtest/gtest.h>

#include <cmath>

#include <confcoh/random.hpp>
#include <confcoh/tebd.hpp>

#include "oracles.hpp"

using namespace confcoh;

namespace {

TruncationParams exact() {
  TruncationParams t;
  t.svd_cutoff = 0.0;
  t.chi_max = 1 << 20;
  return t;
}

struct Deviation {
  double coherence = 0.0;
  double purity = 0.0;
};

Deviation max_deviation(const Trajectory& a, const Trajectory& b) {
  Deviation d;
  EXPECT_EQ(a.points.size(), b.points.size());
  for (std::size_t k = 0; k < std::min(a.points.size(), b.points.size()); ++k) {
    d.coherence = std::max(d.coherence, std::abs(a.points[k].coherence - b.points[k].coherence));
    d.purity = std::max(d.purity, std::abs(a.points[k].purity - b.points[k].purity));
  }
  return d;
}

}  // namespace

TEST(Gates, SingleBondEqualsExactPropagator) {
  const LindbladModel model{2, 1.0, 0.0};
  const double dt = 0.05;
  const Matrix g = bond_gate(model, 0, dt);
  // rho = |10><10|: site 0 local (1,1) -> p = 3, site 1 (0,0) -> p = 0.
  const int in = 4 * 3 + 0;
  const Matrix ex = oracle::propagate_exact(projector(occupation_state(enumerate_sector(2, 1), {0})).data(), *enumerate_sector(2, 1), 1.0, 0.0, dt);
  EXPECT_NEAR(std::abs(g(4 * 3 + 0, in)), std::pow(std::cos(dt), 2), 1e-14);
  EXPECT_NEAR(g(4 * 3 + 0, in).real(), ex(0, 0).real(), 1e-14);  // stays |10><10|
  EXPECT_NEAR(g(4 * 0 + 3, in).real(), ex(1, 1).real(), 1e-14);  // moves to |01><01|
  EXPECT_LT(std::abs(g(4 * 1 + 2, in) - ex(0, 1)), 1e-14);     // |10><01|: site0 (1,0), site1 (0,1)
  EXPECT_LT(std::abs(g(4 * 2 + 1, in) - ex(1, 0)), 1e-14);
}

TEST(Gates, FullGateMatchesDenseLiouvillianOnTwoSites) {
  // Every (N, N) sector of two sites: compare gate action with the exact dense propagator.
  const double J = 0.8, gamma = 0.3, dt = 0.2;
  const Matrix g = bond_gate({2, J, gamma}, 0, dt);
  for (int N = 0; N <= 2; ++N) {
    const auto b = enumerate_sector(2, N);
    const auto rho = random_fixed_n_density(b, static_cast<int>(b->dim()), 7 + static_cast<std::uint64_t>(N));
    const Matrix ex = oracle::propagate_exact(rho.data(), *b, J, gamma, dt);
    auto m = mpdo_from_dense(rho, exact());
    apply_two_site_gate(m, 0, g, true);
    EXPECT_LT(max_abs(dense_from_mpdo(m).data() - ex), 1e-13) << "N = " << N;
  }
}

TEST(Gates, DephasingGateLeavesDiagonalLocalStates) {
  const Matrix g = dephasing_gate(0.7, 0.3);
  EXPECT_EQ(g(0, 0), cplx(1.0));
  EXPECT_EQ(g(3, 3), cplx(1.0));
  EXPECT_NEAR(g(1, 1).real(), std::exp(-0.21), 1e-15);
  Vector diag_local = Vector::Zero(4);
  diag_local(0) = 0.4;
  diag_local(3) = 0.6;
  EXPECT_LT(max_abs(g * diag_local - diag_local), 1e-16);
}

TEST(Gates, ConserveFlux) {
  const auto gs = trotter_gates({6, 1.0, 0.05}, 0.05, 2);
  for (const auto& layer : gs.layers)
    for (const auto& bg : layer.gates)
      for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
          const Flux out = kPhysFlux[static_cast<std::size_t>(r / 4)] + kPhysFlux[static_cast<std::size_t>(r % 4)];
          const Flux in = kPhysFlux[static_cast<std::size_t>(c / 4)] + kPhysFlux[static_cast<std::size_t>(c % 4)];
          if (out != in) {
            EXPECT_EQ(bg.gate(r, c), cplx(0.0));
          }
        }
}

TEST(Gates, LayerStructure) {
  const auto g2 = trotter_gates({6, 1.0, 0.0}, 0.1, 2);
  ASSERT_EQ(g2.layers.size(), 3u);
  EXPECT_EQ(g2.layers[0].gates.size(), 3u);
  EXPECT_EQ(g2.layers[1].gates.size(), 2u);
  const auto g1 = trotter_gates({6, 1.0, 0.0}, 0.1, 1);
  EXPECT_EQ(g1.layers.size(), 2u);
  EXPECT_THROW(trotter_gates({6, 1.0, 0.0}, 0.1, 3), std::invalid_argument);
  EXPECT_THROW(trotter_gates({6, 1.0, 0.0}, -0.1, 2), std::invalid_argument);
  auto m = mpdo_product(3, {0});
  EXPECT_THROW(apply_two_site_gate(m, 2, Matrix::Identity(16, 16), true), std::out_of_range);
}

TEST(Tebd, RabiOscillationBothOrders) {
  for (int order : {1, 2}) {
    auto m = mpdo_product(2, {0});
    TebdOptions opt;
    opt.dt = 0.05;
    opt.steps = 200;
    opt.order = order;
    opt.observe_every = 1;
    opt.cut = 1;
    const auto traj = evolve_mpdo(m, {2, 1.0, 0.0}, opt);
    for (const auto& o : traj.points) EXPECT_NEAR(o.densities[0], std::pow(std::cos(o.time), 2), 1e-10);
  }
}

TEST(Tebd, FluxAuditTraceAndCanonicalFormAfterSteps) {
  auto m = mpdo_product(7, {0, 3, 6}, exact());
  const auto gates = trotter_gates({7, 1.0, 0.1}, 0.05, 2);
  for (int s = 0; s < 20; ++s) {
    tebd_step(m, gates);
    ASSERT_NO_THROW(m.audit());
  }
  EXPECT_TRUE(is_mixed_canonical(m));
  EXPECT_NEAR(mpdo_trace(m), 1.0, 1e-12);
  const auto dense = dense_from_mpdo(m);
  EXPECT_EQ(dense.basis().particles(), 3);
}

TEST(Tebd, PurityNonIncreasing) {
  auto m = mpdo_product(6, {0, 5}, exact());
  TebdOptions opt;
  opt.dt = 0.05;
  opt.steps = 300;
  opt.observe_every = 1;
  opt.cut = 3;
  const auto traj = evolve_mpdo(m, {6, 1.0, 0.05}, opt);
  for (std::size_t k = 1; k < traj.points.size(); ++k) EXPECT_LE(traj.points[k].purity, traj.points[k - 1].purity + 1e-12);
}

TEST(Tebd, UnitaryLimitKeepsPurity) {
  auto m = mpdo_product(8, {1, 6});
  TebdOptions opt;
  opt.steps = 400;
  opt.cut = 4;
  for (const auto& o : evolve_mpdo(m, {8, 1.0, 0.0}, opt).points) EXPECT_NEAR(o.purity, 1.0, 1e-8);
}

TEST(Tebd, SecondOrderTrotterConvergence) {
  // Unitary limit: state error against the exact propagator drops about 4x per dt halving.
  const auto b = enumerate_sector(6, 2);
  const LindbladModel model{6, 1.0, 0.0};
  const auto rho0 = projector(occupation_state(b, {0, 4}));
  const double T = 2.0;
  const Matrix ex = oracle::propagate_exact(rho0.data(), *b, 1.0, 0.0, T);
  std::vector<double> err;
  for (double dt : {0.1, 0.05, 0.025}) {
    auto m = mpdo_product(6, {0, 4}, exact());
    const auto gates = trotter_gates(model, dt, 2);
    for (int s = 0; s < static_cast<int>(std::lround(T / dt)); ++s) tebd_step(m, gates);
    err.push_back(max_abs(dense_from_mpdo(m).data() - ex));
  }
  EXPECT_NEAR(err[0] / err[1], 4.0, 0.4);
  EXPECT_NEAR(err[1] / err[2], 4.0, 0.4);
}

TEST(Tebd, FirstOrderTrotterConvergence) {
  const auto b = enumerate_sector(5, 2);
  const auto rho0 = projector(occupation_state(b, {0, 3}));
  const Matrix ex = oracle::propagate_exact(rho0.data(), *b, 1.0, 0.1, 1.0);
  std::vector<double> err;
  for (double dt : {0.05, 0.025}) {
    auto m = mpdo_product(5, {0, 3}, exact());
    const auto gates = trotter_gates({5, 1.0, 0.1}, dt, 1);
    for (int s = 0; s < static_cast<int>(std::lround(1.0 / dt)); ++s) tebd_step(m, gates);
    err.push_back(max_abs(dense_from_mpdo(m).data() - ex));
  }
  EXPECT_NEAR(err[0] / err[1], 2.0, 0.3);
}

TEST(Tebd, DenseOracleTrajectoryWithExtrapolation) {
  // L = 6, N = 2, 200 steps at dt = 0.05, gamma = 0.005, cutoff 0.
  const auto b = enumerate_sector(6, 2);
  const LindbladModel model{6, 1.0, 0.005};
  DenseEvolveOptions dopt;
  dopt.dt = 0.05;
  dopt.steps = 200;
  dopt.substeps = 8;
  dopt.cut = 3;
  const auto dense = evolve(projector(occupation_state(b, {0, 4})), model, dopt);

  auto run = [&](double dt, int steps, int every) {
    auto m = mpdo_product(6, {0, 4}, exact());
    TebdOptions opt;
    opt.dt = dt;
    opt.steps = steps;
    opt.observe_every = every;
    opt.cut = 3;
    return evolve_mpdo(m, model, opt);
  };
  const auto coarse = run(0.05, 200, 10);
  const auto fine = run(0.025, 400, 20);
  const auto dc = max_deviation(dense, coarse), df = max_deviation(dense, fine);
  EXPECT_LT(dc.purity, 1e-4);
  EXPECT_NEAR(dc.coherence / df.coherence, 4.0, 0.5);
  double extrap = 0.0;
  for (std::size_t k = 0; k < dense.points.size(); ++k) {
    const double x = (4.0 * fine.points[k].coherence - coarse.points[k].coherence) / 3.0;
    extrap = std::max(extrap, std::abs(x - dense.points[k].coherence));
  }
  EXPECT_LT(extrap, 1e-6);
}

TEST(Tebd, TruncationAbort) {
  TruncationParams t;
  t.chi_max = 1;
  t.svd_cutoff = 0.0;
  t.abort_discarded = 1e-12;
  auto m = mpdo_product(4, {0, 2}, t);
  const auto gates = trotter_gates({4, 1.0, 0.0}, 0.1, 2);
  EXPECT_THROW(tebd_step(m, gates), NumericalAbort);
}
