#ifndef CONFCOH_TEBD_HPP
#define CONFCOH_TEBD_HPP

#include <cmath>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "lindblad.hpp"
#include "mpdo.hpp"

namespace confcoh {

/// Two-site superoperator gate on sites (site, site + 1). Row/column index 4 * p_left + p_right.
struct BondGate {
  int site = 0;
  Matrix gate;
};

struct GateLayer {
  std::vector<BondGate> gates;
  bool left_to_right = true;
};

struct GateSet {
  int order = 2;
  double dt = 0.0;
  std::vector<GateLayer> layers;
};

namespace detail {

inline bool gate_conserves_flux(int row, int col) {
  const Flux out = kPhysFlux[static_cast<std::size_t>(row / 4)] + kPhysFlux[static_cast<std::size_t>(row % 4)];
  const Flux in = kPhysFlux[static_cast<std::size_t>(col / 4)] + kPhysFlux[static_cast<std::size_t>(col % 4)];
  return out == in;
}

}  // namespace detail

/// Generator on one bond: hopping commutator plus the bond's share of on-site dephasing.
/// `w_left` and `w_right` weight each site's dephasing so that every site totals gamma over all bonds.
inline Matrix bond_generator(double hopping, double gamma, double w_left, double w_right) {
  // Two-site Hilbert index 2 * occ_left + occ_right.
  Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
  h(1, 2) = hopping;
  h(2, 1) = hopping;
  Matrix g = Matrix::Zero(16, 16);
  const cplx I{0.0, 1.0};
  for (int q = 0; q < 16; ++q) {
    const int q1 = q / 4, q2 = q % 4;
    const int ka = 2 * (q1 & 1) + (q2 & 1), ba = 2 * (q1 >> 1) + (q2 >> 1);
    for (int p = 0; p < 16; ++p) {
      const int p1 = p / 4, p2 = p % 4;
      const int kb = 2 * (p1 & 1) + (p2 & 1), bb = 2 * (p1 >> 1) + (p2 >> 1);
      cplx v = 0.0;
      if (ba == bb) v += -I * h(ka, kb);
      if (ka == kb) v += I * h(bb, ba);
      g(q, p) = v;
    }
    const int dl = (q1 & 1) != (q1 >> 1), dr = (q2 & 1) != (q2 >> 1);
    g(q, q) -= gamma * (w_left * dl + w_right * dr);
  }
  return g;
}

/// exp(dt * D) for one site: coherences between occupied and empty decay at rate gamma.
inline Matrix dephasing_gate(double gamma, double dt) {
  Matrix g = Matrix::Zero(4, 4);
  g(0, 0) = 1.0;
  g(1, 1) = std::exp(-gamma * dt);
  g(2, 2) = std::exp(-gamma * dt);
  g(3, 3) = 1.0;
  return g;
}

inline Matrix bond_gate(const LindbladModel& model, int site, double tau) {
  const int L = model.sites;
  auto weight = [L](int s) { return (s == 0 || s == L - 1) ? 1.0 : 0.5; };
  const Matrix gen = bond_generator(model.hopping, model.gamma, weight(site), weight(site + 1));
  Matrix gate = (tau * gen).exp();
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      if (!detail::gate_conserves_flux(r, c)) gate(r, c) = 0.0;
  return gate;
}

/// Order 1: even-indexed bonds then odd. Order 2: half even, full odd, half even.
inline GateSet trotter_gates(const LindbladModel& model, double dt, int order) {
  model.validate();
  if (order != 1 && order != 2) throw std::invalid_argument("trotter_gates: order must be 1 or 2");
  if (!(dt > 0.0)) throw std::invalid_argument("trotter_gates: dt must be positive");
  auto layer = [&](int parity, double tau, bool ltr) {
    GateLayer l;
    l.left_to_right = ltr;
    for (int k = parity; k + 1 < model.sites; k += 2) l.gates.push_back({k, bond_gate(model, k, tau)});
    if (!ltr) std::reverse(l.gates.begin(), l.gates.end());
    return l;
  };
  GateSet gs;
  gs.order = order;
  gs.dt = dt;
  if (order == 1) {
    gs.layers.push_back(layer(0, dt, true));
    gs.layers.push_back(layer(1, dt, false));
  } else {
    gs.layers.push_back(layer(0, 0.5 * dt, true));
    gs.layers.push_back(layer(1, dt, false));
    gs.layers.push_back(layer(0, 0.5 * dt, true));
  }
  for (auto it = gs.layers.begin(); it != gs.layers.end();)
    it = it->gates.empty() ? gs.layers.erase(it) : std::next(it);
  return gs;
}

/// Applies a 16x16 gate on (k, k+1) and re-splits with truncation. The center ends on k + 1
/// when `center_right`, else on k. Returns the discarded weight.
inline double apply_two_site_gate(MpdoState& m, int k, const Matrix& gate, bool center_right) {
  if (k < 0 || k + 1 >= m.sites) throw std::out_of_range("apply_two_site_gate: bond out of range");
  if (gate.rows() != 16 || gate.cols() != 16) throw std::invalid_argument("apply_two_site_gate: gate must be 16x16");
  move_center(m, center_right ? k : k + 1);
  auto& left = m.tensors[static_cast<std::size_t>(k)].blocks;
  auto& right = m.tensors[static_cast<std::size_t>(k) + 1].blocks;

  using ThetaKey = std::pair<Flux, int>;  // (left sector, 4 * p1 + p2)
  std::map<ThetaKey, Matrix> theta;
  for (const auto& [key, a] : left) {
    const Flux mid = FluxTensor::right_of(key.first, key.second);
    for (int p2 = 0; p2 < kPhysDim; ++p2) {
      auto it = right.find({mid, p2});
      if (it == right.end()) continue;
      theta.emplace(ThetaKey{key.first, 4 * key.second + p2}, a * it->second);
    }
  }
  std::map<ThetaKey, Matrix> out;
  for (const auto& [key, t] : theta)
    for (int q = 0; q < 16; ++q) {
      const cplx g = gate(q, key.second);
      if (g == cplx{0.0, 0.0}) continue;
      if (!detail::gate_conserves_flux(q, key.second)) throw std::invalid_argument("apply_two_site_gate: gate violates flux conservation");
      auto [it, inserted] = out.try_emplace(ThetaKey{key.first, q}, g * t);
      if (!inserted) it->second += g * t;
    }

  std::map<Flux, SplitGroup> groups;
  std::map<Flux, std::map<std::pair<Flux, int>, Eigen::Index>> row_off, col_off;
  for (const auto& [key, t] : out) {
    const int q1 = key.second / 4, q2 = key.second % 4;
    const Flux mid = FluxTensor::right_of(key.first, q1);
    const Flux r = FluxTensor::right_of(mid, q2);
    auto& g = groups[mid];
    auto& ro = row_off[mid];
    if (!ro.count({key.first, q1})) {
      const Eigen::Index off = g.rows.empty() ? 0 : g.rows.back().offset + g.rows.back().dim;
      ro[{key.first, q1}] = off;
      g.rows.push_back({key.first, q1, off, t.rows()});
    }
    auto& co = col_off[mid];
    if (!co.count({r, q2})) {
      const Eigen::Index off = g.cols.empty() ? 0 : g.cols.back().offset + g.cols.back().dim;
      co[{r, q2}] = off;
      g.cols.push_back({q2, r, off, t.cols()});
    }
  }
  for (auto& [mid, g] : groups) {
    const Eigen::Index rows = g.rows.back().offset + g.rows.back().dim;
    const Eigen::Index cols = g.cols.back().offset + g.cols.back().dim;
    g.mat = Matrix::Zero(rows, cols);
  }
  for (const auto& [key, t] : out) {
    const int q1 = key.second / 4, q2 = key.second % 4;
    const Flux mid = FluxTensor::right_of(key.first, q1);
    const Flux r = FluxTensor::right_of(mid, q2);
    groups[mid].mat.block(row_off[mid].at({key.first, q1}), col_off[mid].at({r, q2}), t.rows(), t.cols()) = t;
  }
  svd_groups(groups);
  const double discarded = choose_kept(groups, m.trunc);

  left.clear();
  right.clear();
  BondSectors bond;
  for (auto& [mid, g] : groups) {
    if (g.keep == 0) continue;
    const Eigen::Index kd = g.keep;
    Matrix u = g.u.leftCols(kd);
    Matrix vh = g.v.leftCols(kd).adjoint();
    if (center_right)
      vh = g.s.head(kd).asDiagonal() * vh;
    else
      u = u * g.s.head(kd).asDiagonal();
    for (const auto& slot : g.rows) left[{slot.left, slot.phys}] = u.middleRows(slot.offset, slot.dim);
    for (const auto& slot : g.cols) right[{mid, slot.phys}] = vh.middleCols(slot.offset, slot.dim);
    bond[mid] = kd;
  }
  m.bonds[static_cast<std::size_t>(k) + 1] = std::move(bond);
  m.center = center_right ? k + 1 : k;
  m.discarded_weight += discarded;
  return discarded;
}

/// One full Trotter step. Throws NumericalAbort when the step discards more than trunc.abort_discarded.
inline double tebd_step(MpdoState& m, const GateSet& gates) {
  double discarded = 0.0;
  for (const auto& layer : gates.layers)
    for (const auto& g : layer.gates) discarded += apply_two_site_gate(m, g.site, g.gate, layer.left_to_right);
  if (discarded > m.trunc.abort_discarded) {
    std::ostringstream msg;
    msg << "tebd_step: discarded weight " << discarded << " exceeds abort threshold " << m.trunc.abort_discarded;
    throw NumericalAbort(msg.str());
  }
  return discarded;
}

struct TebdOptions {
  double dt = 0.05;
  int steps = 0;
  int order = 2;
  int observe_every = 10;
  int cut = 1;
  int top_k = 8;
};

inline Observation observe_mpdo(MpdoState& m, double t, int cut, int top_k) {
  Observation o;
  o.time = t;
  const auto spec = mpdo_oses(m, cut);
  o.purity = mpdo_purity(m);
  o.coherence = spec.coherent_total();
  o.osee = osee(spec);
  o.densities = mpdo_site_densities(m);
  auto sorted = spec.sorted_descending();
  if (static_cast<int>(sorted.size()) > top_k) sorted.resize(static_cast<std::size_t>(top_k));
  o.top_oses = std::move(sorted);
  o.discarded_weight = m.discarded_weight;
  return o;
}

/// TEBD evolution; `m` is advanced in place. Observations at t = 0, every observe_every steps and the last step.
inline Trajectory evolve_mpdo(MpdoState& m, const LindbladModel& model, const TebdOptions& opt) {
  model.validate();
  if (model.sites != m.sites) throw std::invalid_argument("evolve_mpdo: model and state disagree on L");
  if (opt.steps < 0 || opt.observe_every < 1) throw std::invalid_argument("evolve_mpdo: invalid step counts");
  if (opt.cut < 1 || opt.cut >= m.sites) throw std::invalid_argument("evolve_mpdo: cut out of range");
  const GateSet gates = trotter_gates(model, opt.dt, opt.order);
  Trajectory traj;
  traj.points.push_back(observe_mpdo(m, 0.0, opt.cut, opt.top_k));
  for (int step = 1; step <= opt.steps; ++step) {
    tebd_step(m, gates);
    if (step % opt.observe_every == 0 || step == opt.steps) traj.points.push_back(observe_mpdo(m, step * opt.dt, opt.cut, opt.top_k));
  }
  return traj;
}

}  // namespace confcoh

#endif  // CONFCOH_TEBD_HPP
