#ifndef CONFCOH_OSES_HPP
#define CONFCOH_OSES_HPP

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "density.hpp"

namespace confcoh {

/// Charge label (n, n') of a C-matrix block: particles in B on the ket and bra side.
struct SectorLabel {
  int n = 0;
  int np = 0;
  bool coherent() const { return n != np; }
  auto operator<=>(const SectorLabel&) const = default;
};

struct CMatrixBlocks {
  int cut = 0;
  std::map<SectorLabel, Matrix> blocks;
  double source_purity = 0.0;
};

struct OsesEntry {
  double value = 0.0;
  SectorLabel label;
};

/// Labeled operator-space entanglement spectrum, descending within each label.
struct OsesSpectrum {
  std::vector<OsesEntry> entries;

  double total() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.value;
    return s;
  }
  /// Sum over values carrying a label with n != n'.
  double coherent_total() const {
    double s = 0.0;
    for (const auto& e : entries)
      if (e.label.coherent()) s += e.value;
    return s;
  }
  std::vector<double> values_descending() const {
    std::vector<double> v;
    v.reserve(entries.size());
    for (const auto& e : entries) v.push_back(e.value);
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
  }
  std::vector<OsesEntry> sorted_descending() const {
    auto v = entries;
    std::stable_sort(v.begin(), v.end(), [](const OsesEntry& a, const OsesEntry& b) { return a.value > b.value; });
    return v;
  }
  std::vector<double> values_for(SectorLabel l) const {
    std::vector<double> v;
    for (const auto& e : entries)
      if (e.label == l) v.push_back(e.value);
    return v;
  }
};

/// Full C = Tr_B |rho>><<rho| over the operator space of every reachable A-substate.
/// Row (i, j) sits at i * a_total + j. Dense reference route.
inline Matrix build_c_matrix(const DensityMatrix& rho, int cut) {
  const BipartiteIndex bi(rho.basis_ptr(), cut);
  const auto na = static_cast<Eigen::Index>(bi.a_total());
  const auto nb = static_cast<Eigen::Index>(bi.b_total());
  // M[(i, j), (mu, nu)] = rho_{i mu; j nu}; C = M M^dagger.
  Matrix m = Matrix::Zero(na * na, nb * nb);
  const auto d = static_cast<Eigen::Index>(rho.dim());
  for (Eigen::Index r = 0; r < d; ++r) {
    const auto er = static_cast<Eigen::Index>(bi.embed(static_cast<std::size_t>(r)));
    const Eigen::Index i = er / nb, mu = er % nb;
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto ec = static_cast<Eigen::Index>(bi.embed(static_cast<std::size_t>(c)));
      const Eigen::Index j = ec / nb, nu = ec % nb;
      m(i * na + j, mu * nb + nu) = rho(r, c);
    }
  }
  return m * m.adjoint();
}

/// Block (n, n') of the C-matrix, rows (i in a_states(n), j in a_states(n')).
inline Matrix c_block(const DensityMatrix& rho, const BipartiteIndex& bi, int n, int np) {
  const auto& an = bi.a_states(n);
  const auto& anp = bi.a_states(np);
  const auto& bn = bi.b_states(n);
  const auto& bnp = bi.b_states(np);
  const auto rows = static_cast<Eigen::Index>(an.size() * anp.size());
  const auto cols = static_cast<Eigen::Index>(bn.size() * bnp.size());
  // Columns are the rank-one generators v_{mu, nu}.
  Matrix v(rows, cols);
  for (std::size_t i = 0; i < an.size(); ++i)
    for (std::size_t j = 0; j < anp.size(); ++j)
      for (std::size_t mu = 0; mu < bn.size(); ++mu)
        for (std::size_t nu = 0; nu < bnp.size(); ++nu)
          v(static_cast<Eigen::Index>(i * anp.size() + j), static_cast<Eigen::Index>(mu * bnp.size() + nu)) =
              rho(static_cast<Eigen::Index>(bi.global(n, i, mu)), static_cast<Eigen::Index>(bi.global(np, j, nu)));
  return v * v.adjoint();
}

inline CMatrixBlocks build_c_blocks(const DensityMatrix& rho, int cut) {
  const BipartiteIndex bi(rho.basis_ptr(), cut);
  CMatrixBlocks out;
  out.cut = cut;
  out.source_purity = purity(rho);
  std::vector<SectorLabel> labels;
  for (int n = 0; n <= bi.max_n(); ++n)
    for (int np = 0; np <= bi.max_n(); ++np)
      if (bi.has_sector(n) && bi.has_sector(np)) labels.push_back({n, np});
  std::vector<Matrix> mats(labels.size());
  parallel_for(labels.size(), [&](std::size_t k) { mats[k] = c_block(rho, bi, labels[k].n, labels[k].np); });
  for (std::size_t k = 0; k < labels.size(); ++k) out.blocks.emplace(labels[k], std::move(mats[k]));
  return out;
}

/// Per-block Hermitian eigenvalues, labeled.
inline OsesSpectrum oses(const CMatrixBlocks& blocks) {
  std::vector<std::pair<SectorLabel, const Matrix*>> items;
  for (const auto& [label, m] : blocks.blocks) items.emplace_back(label, &m);
  std::vector<RealVector> evs(items.size());
  parallel_for(items.size(), [&](std::size_t k) { evs[k] = hermitian_eigenvalues(*items[k].second); });
  OsesSpectrum out;
  for (std::size_t k = 0; k < items.size(); ++k)
    for (Eigen::Index e = evs[k].size() - 1; e >= 0; --e) out.entries.push_back({evs[k](e), items[k].first});
  return out;
}

inline OsesSpectrum oses(const DensityMatrix& rho, int cut) { return oses(build_c_blocks(rho, cut)); }

/// -sum L log L (natural log, 0 log 0 = 0).
inline double osee(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values)
    if (v > 0.0) s -= v * std::log(v);
  return s;
}

inline double osee(const OsesSpectrum& spectrum) { return osee(spectrum.values_descending()); }

/// Sum of block traces over n != n'.
inline double configuration_coherence(const CMatrixBlocks& blocks) {
  double s = 0.0;
  for (const auto& [label, m] : blocks.blocks)
    if (label.coherent()) s += m.trace().real();
  return s;
}

/// Sum of |rho_ab|^2 over entries whose B-particle numbers differ; reads rho directly.
inline double config_coherence_offdiag(const DensityMatrix& rho, int cut) {
  const BipartiteIndex bi(rho.basis_ptr(), cut);
  const auto d = static_cast<Eigen::Index>(rho.dim());
  double s = 0.0;
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < d; ++r)
      if (bi.b_count(static_cast<std::size_t>(r)) != bi.b_count(static_cast<std::size_t>(c))) s += std::norm(rho(r, c));
  return s;
}

/// rho_Pi = sum_n (1 (x) Pi_n) rho (1 (x) Pi_n).
inline DensityMatrix locally_measured_state(const DensityMatrix& rho, int cut) {
  const BipartiteIndex bi(rho.basis_ptr(), cut);
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Matrix out = Matrix::Zero(d, d);
  for (int n = 0; n <= bi.max_n(); ++n) {
    const Matrix p = local_number_projector(bi, n);
    out += p * rho.data() * p;
  }
  return DensityMatrix::trusted(rho.basis_ptr(), std::move(out), rho.tolerances());
}

/// sum_{n != n'} ||(1 (x) Pi_n) rho (1 (x) Pi_n')||_F^2.
inline double config_coherence_projected(const DensityMatrix& rho, int cut) {
  const BipartiteIndex bi(rho.basis_ptr(), cut);
  std::vector<Matrix> proj;
  for (int n = 0; n <= bi.max_n(); ++n) proj.push_back(local_number_projector(bi, n));
  double s = 0.0;
  for (std::size_t n = 0; n < proj.size(); ++n)
    for (std::size_t np = 0; np < proj.size(); ++np) {
      if (n == np) continue;
      const Matrix blk = proj[n] * rho.data() * proj[np];
      s += (blk.adjoint() * blk).trace().real();
    }
  return s;
}

/// Tr((rho - rho_Pi)^2).
inline double config_coherence_relative_purity(const DensityMatrix& rho, int cut) {
  const Matrix diff = rho.data() - locally_measured_state(rho, cut).data();
  return (diff * diff).trace().real();
}

/// Maximal rank of block (n, n') with n, n' counting particles in B.
inline std::uint64_t block_rank_bound(int la, int lb, int n_total, int n, int np) {
  if (la < 0 || lb < 0 || n_total < 0) throw std::invalid_argument("block rank bound: negative argument");
  const std::uint64_t a_side = binomial(la, n_total - n) * binomial(la, n_total - np);
  const std::uint64_t b_side = binomial(lb, n) * binomial(lb, np);
  return std::min(a_side, b_side);
}

/// Exact bond dimension bound: sum of block_rank_bound over all labels.
inline std::uint64_t max_bond_dimension(int la, int lb, int n_total) {
  std::uint64_t s = 0;
  for (int n = 0; n <= n_total; ++n)
    for (int np = 0; np <= n_total; ++np) s += block_rank_bound(la, lb, n_total, n, np);
  return s;
}

struct RankBoundRow {
  std::string block;  // particle configuration: A, B (wholly on one side) and C (coherent across)
  SectorLabel label;
  int degeneracy = 1;
  std::uint64_t max_rank = 0;
};

struct RankBound {
  std::vector<RankBoundRow> rows;
  std::uint64_t total = 0;
};

/// Rank bounds grouped by unordered label pairs; total = sum max_rank * degeneracy.
inline RankBound rank_bound_table(int la, int lb, int n_total) {
  RankBound out;
  for (int n = 0; n <= n_total; ++n)
    for (int np = n; np <= n_total; ++np) {
      RankBoundRow row;
      const int lo = std::min(n, np), hi = std::max(n, np);
      row.block = std::string(static_cast<std::size_t>(n_total - hi), 'A') + std::string(static_cast<std::size_t>(lo), 'B') +
                  std::string(static_cast<std::size_t>(hi - lo), 'C');
      row.label = {n, np};
      row.degeneracy = n == np ? 1 : 2;
      row.max_rank = block_rank_bound(la, lb, n_total, n, np);
      out.total += row.max_rank * static_cast<std::uint64_t>(row.degeneracy);
      out.rows.push_back(row);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Degenerate (quantum) versus non-degenerate (classical) OSES values.

enum class Correlation { classical, quantum };

inline const char* to_string(Correlation c) { return c == Correlation::quantum ? "quantum" : "classical"; }

struct DegeneracyOptions {
  double p_probe = 1e-2;
  double tol = 1e-9;      // relative
  double floor = 1e-12;   // values at or below floor * purity carry no weight and are classical
};

/// |a - b| <= tol * max(|a|, |b|) + slack.
inline bool nearly_equal(double a, double b, double tol, double slack = 0.0) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) + slack;
}

/// Label-free classification: a value is quantum when it belongs to a degenerate group of the
/// unperturbed spectrum and stays degenerate after the probe deformation. Both inputs are
/// descending and of equal length.
inline std::vector<Correlation> classify_by_probe(const std::vector<double>& base, const std::vector<double>& probed,
                                                  double tol, double floor_abs) {
  if (base.size() != probed.size()) throw std::invalid_argument("classify_by_probe: spectra differ in length");
  const std::size_t n = base.size();
  std::vector<Correlation> out(n, Correlation::classical);
  auto degenerate_at = [&](const std::vector<double>& v, std::size_t k) {
    return (k > 0 && nearly_equal(v[k], v[k - 1], tol, floor_abs)) || (k + 1 < n && nearly_equal(v[k], v[k + 1], tol, floor_abs));
  };
  std::size_t a = 0;
  while (a < n) {
    std::size_t b = a + 1;
    while (b < n && nearly_equal(base[b], base[b - 1], tol, floor_abs)) ++b;
    if (b - a >= 2 && base[a] > floor_abs) {
      for (std::size_t k = a; k < b; ++k)
        if (probed[k] > floor_abs && degenerate_at(probed, k)) out[k] = Correlation::quantum;
    }
    a = b;
  }
  return out;
}

/// Slot-tracked variant: entry k is quantum when some other entry j is degenerate with it in
/// `base` and stays degenerate with it in every deformed spectrum. Labels are used only to
/// follow slots through the deformation, never to decide.
inline std::vector<Correlation> classify_tracked(const OsesSpectrum& base, const std::vector<const OsesSpectrum*>& deformed,
                                                 double tol, double floor_abs) {
  const std::size_t n = base.entries.size();
  for (const auto* d : deformed)
    if (d->entries.size() != n) throw std::invalid_argument("classify_tracked: spectra differ in layout");
  std::vector<Correlation> out(n, Correlation::classical);
  for (std::size_t k = 0; k < n; ++k) {
    if (base.entries[k].value <= floor_abs) continue;
    for (std::size_t j = 0; j < n && out[k] == Correlation::classical; ++j) {
      if (j == k || !nearly_equal(base.entries[k].value, base.entries[j].value, tol, floor_abs)) continue;
      bool survives = true;
      for (const auto* d : deformed)
        if (d->entries[k].value <= floor_abs || !nearly_equal(d->entries[k].value, d->entries[j].value, tol, floor_abs)) survives = false;
      if (survives) out[k] = Correlation::quantum;
    }
  }
  return out;
}

struct ClassifiedValue {
  double value = 0.0;
  SectorLabel label;
  Correlation by_label = Correlation::classical;
  Correlation by_probe = Correlation::classical;
  Correlation classification = Correlation::classical;
};

struct DegeneracyReport {
  std::vector<ClassifiedValue> values;  // descending by value
  double quantum_sum = 0.0;             // sum of values classified quantum
  bool labels_agree_with_probe = true;
  bool partners_matched = true;         // every n != n' value has an equal partner in (n', n) at p = 0 and p_probe
};

/// Diagonal state with fixed, pairwise distinct weights (golden-ratio sequence).
inline DensityMatrix generic_diagonal_state(const BasisPtr& basis) {
  const auto d = static_cast<Eigen::Index>(basis->dim());
  RealVector w(d);
  for (Eigen::Index g = 0; g < d; ++g) {
    const double x = static_cast<double>(g + 1) * 0.6180339887498949;
    w(g) = 1.0 + (x - std::floor(x));
  }
  w /= w.sum();
  return DensityMatrix::trusted(basis, Matrix(w.cast<cplx>().asDiagonal()));
}

/// Degenerate-value classification. Charge labels decide. The label-free cross-check deforms
/// rho by (1 - p) rho + p diag(rho) and by (1 - p) rho + p D with D a generic diagonal state:
/// a value counts as quantum when its degeneracy survives both. The second deformation splits
/// classical ties that the diag(rho) probe leaves intact by symmetry.
inline DegeneracyReport detect_degenerate_values(const DensityMatrix& rho, int cut, const DegeneracyOptions& opt = {}) {
  if (!(opt.p_probe > 0.0 && opt.p_probe < 1.0)) throw std::invalid_argument("detect_degenerate_values: p_probe must lie in (0, 1)");
  const OsesSpectrum base = oses(rho, cut);
  const OsesSpectrum probed = oses(mix(rho, diag_part(rho), opt.p_probe), cut);
  const OsesSpectrum generic = oses(mix(rho, generic_diagonal_state(rho.basis_ptr()), opt.p_probe), cut);
  const double floor_abs = opt.floor * purity(rho);

  DegeneracyReport rep;
  // Partner check per coherent label pair.
  for (const auto& e : base.entries) {
    if (!e.label.coherent() || e.label.n > e.label.np) continue;
    const SectorLabel mirror{e.label.np, e.label.n};
    for (const OsesSpectrum* s : {&base, &probed, &generic}) {
      auto x = s->values_for(e.label), y = s->values_for(mirror);
      if (x.size() != y.size()) {
        rep.partners_matched = false;
        continue;
      }
      for (std::size_t k = 0; k < x.size(); ++k)
        if (std::max(x[k], y[k]) > floor_abs && !nearly_equal(x[k], y[k], opt.tol, floor_abs)) rep.partners_matched = false;
    }
  }

  // Entry k of every spectrum refers to the same (label, rank) slot: the block layout is structural.
  const auto probe_class = classify_tracked(base, {&probed, &generic}, opt.tol, floor_abs);
  std::vector<std::size_t> order(base.entries.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return base.entries[a].value > base.entries[b].value; });
  for (std::size_t k : order) {
    ClassifiedValue cv;
    cv.value = base.entries[k].value;
    cv.label = base.entries[k].label;
    cv.by_label = (cv.label.coherent() && cv.value > floor_abs) ? Correlation::quantum : Correlation::classical;
    cv.by_probe = probe_class[k];
    cv.classification = cv.by_label;
    if (cv.by_label != cv.by_probe) rep.labels_agree_with_probe = false;
    if (cv.classification == Correlation::quantum) rep.quantum_sum += cv.value;
    rep.values.push_back(cv);
  }
  return rep;
}

}  // namespace confcoh

#endif  // CONFCOH_OSES_HPP
