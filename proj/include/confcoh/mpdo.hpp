#ifndef CONFCOH_MPDO_HPP
#define CONFCOH_MPDO_HPP

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oses.hpp"

namespace confcoh {

/// (ket, bra) particle numbers carried by a bond or a physical index.
struct Flux {
  int ket = 0;
  int bra = 0;
  auto operator<=>(const Flux&) const = default;
  Flux operator+(Flux o) const { return {ket + o.ket, bra + o.bra}; }
  Flux operator-(Flux o) const { return {ket - o.ket, bra - o.bra}; }
};

inline constexpr int kPhysDim = 4;
/// Local superoperator basis (ket occ, bra occ): (0,0), (1,0), (0,1), (1,1). Index = ket + 2 * bra.
inline constexpr std::array<Flux, kPhysDim> kPhysFlux{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
inline constexpr int phys_index(int ket, int bra) { return ket + 2 * bra; }

/// Sector -> dimension for one bond. The bond left of site k carries the particle numbers
/// of sites k..L-1 on the ket and bra sides.
using BondSectors = std::map<Flux, Eigen::Index>;

/// One MPDO site tensor. Block (left flux s, physical p) maps the left sector s to the right
/// sector s - phys_flux(p); only flux-conserving blocks exist.
struct FluxTensor {
  using Key = std::pair<Flux, int>;
  std::map<Key, Matrix> blocks;

  static Flux right_of(Flux left, int p) { return left - kPhysFlux[static_cast<std::size_t>(p)]; }

  const Matrix* find(Flux left, int p) const {
    auto it = blocks.find({left, p});
    return it == blocks.end() ? nullptr : &it->second;
  }
};

struct TruncationParams {
  int chi_max = 200;
  double svd_cutoff = 1e-12;  // relative to the largest singular value of the split
  double abort_discarded = std::numeric_limits<double>::infinity();  // per-step discarded weight that aborts
};

/// Flux-labeled block-sparse tensor train of the vectorized density matrix |rho>>.
/// The represented vector is never normalized: its squared norm is Tr rho^2.
struct MpdoState {
  int sites = 0;
  int particles = 0;
  std::vector<BondSectors> bonds;  // L + 1 entries
  std::vector<FluxTensor> tensors; // L entries
  std::optional<int> center;       // orthogonality center, if in mixed-canonical form
  TruncationParams trunc;
  double discarded_weight = 0.0;   // cumulative sum of discarded squared singular values

  MpdoState() = default;
  MpdoState(int l, int n, TruncationParams t = {}) : sites(l), particles(n), bonds(static_cast<std::size_t>(l) + 1),
                                                      tensors(static_cast<std::size_t>(l)), trunc(t) {
    if (l < 1 || n < 0 || n > l) throw std::invalid_argument("mpdo: need L >= 1 and 0 <= N <= L");
  }

  Eigen::Index bond_dimension(int bond) const {
    Eigen::Index d = 0;
    for (const auto& [f, dim] : bonds.at(static_cast<std::size_t>(bond))) d += dim;
    return d;
  }

  Eigen::Index max_bond_dimension() const {
    Eigen::Index d = 0;
    for (int b = 0; b <= sites; ++b) d = std::max(d, bond_dimension(b));
    return d;
  }

  /// Flux and shape audit; throws std::logic_error on the first violation.
  void audit() const {
    auto fail = [](const std::string& what) { throw std::logic_error("mpdo audit: " + what); };
    if (static_cast<int>(bonds.size()) != sites + 1 || static_cast<int>(tensors.size()) != sites) fail("length mismatch");
    if (bonds.front() != BondSectors{{Flux{particles, particles}, 1}}) fail("left boundary must be {(N,N): 1}");
    if (bonds.back() != BondSectors{{Flux{0, 0}, 1}}) fail("right boundary must be {(0,0): 1}");
    for (int b = 0; b <= sites; ++b)
      for (const auto& [f, d] : bonds[static_cast<std::size_t>(b)]) {
        const int room = sites - b;
        if (f.ket < 0 || f.bra < 0 || f.ket > std::min(particles, room) || f.bra > std::min(particles, room)) fail("bond flux out of range");
        if (particles - f.ket > b || particles - f.bra > b) fail("bond flux incompatible with prefix length");
        if (d <= 0) fail("empty sector kept on bond");
      }
    for (int k = 0; k < sites; ++k) {
      const auto& lb = bonds[static_cast<std::size_t>(k)];
      const auto& rb = bonds[static_cast<std::size_t>(k) + 1];
      for (const auto& [key, m] : tensors[static_cast<std::size_t>(k)].blocks) {
        auto li = lb.find(key.first);
        auto ri = rb.find(FluxTensor::right_of(key.first, key.second));
        if (li == lb.end() || ri == rb.end()) fail("block references a missing sector at site " + std::to_string(k));
        if (m.rows() != li->second || m.cols() != ri->second) fail("block shape mismatch at site " + std::to_string(k));
      }
    }
  }
};

namespace detail {

inline void drop_sector(MpdoState& m, int bond, Flux f) {
  m.bonds[static_cast<std::size_t>(bond)].erase(f);
  if (bond < m.sites) {
    auto& blocks = m.tensors[static_cast<std::size_t>(bond)].blocks;
    for (auto it = blocks.begin(); it != blocks.end();)
      it = it->first.first == f ? blocks.erase(it) : std::next(it);
  }
  if (bond > 0) {
    auto& blocks = m.tensors[static_cast<std::size_t>(bond) - 1].blocks;
    for (auto it = blocks.begin(); it != blocks.end();)
      it = FluxTensor::right_of(it->first.first, it->first.second) == f ? blocks.erase(it) : std::next(it);
  }
}

/// Rows (s, p) of site k that feed right sector r, in map order, with row offsets.
struct RowSlot {
  Flux left;
  int phys;
  Eigen::Index offset;
  Eigen::Index dim;
};

inline std::vector<RowSlot> rows_into(const MpdoState& m, int k, Flux r, Eigen::Index& total) {
  std::vector<RowSlot> rows;
  total = 0;
  for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks) {
    if (FluxTensor::right_of(key.first, key.second) != r) continue;
    rows.push_back({key.first, key.second, total, blk.rows()});
    total += blk.rows();
  }
  return rows;
}

struct ColSlot {
  int phys;
  Flux right;
  Eigen::Index offset;
  Eigen::Index dim;
};

inline std::vector<ColSlot> cols_from(const MpdoState& m, int k, Flux s, Eigen::Index& total) {
  std::vector<ColSlot> cols;
  total = 0;
  for (int p = 0; p < kPhysDim; ++p) {
    const Matrix* blk = m.tensors[static_cast<std::size_t>(k)].find(s, p);
    if (!blk) continue;
    cols.push_back({p, FluxTensor::right_of(s, p), total, blk->cols()});
    total += blk->cols();
  }
  return cols;
}

}  // namespace detail

/// QR at site k; R is absorbed into site k + 1. Center moves k -> k + 1.
inline void shift_center_right(MpdoState& m, int k) {
  if (k < 0 || k + 1 >= m.sites) throw std::out_of_range("shift_center_right: site out of range");
  auto& bond = m.bonds[static_cast<std::size_t>(k) + 1];
  auto& here = m.tensors[static_cast<std::size_t>(k)].blocks;
  auto& next = m.tensors[static_cast<std::size_t>(k) + 1].blocks;
  std::vector<Flux> empty;
  for (auto& [r, dr] : bond) {
    Eigen::Index total = 0;
    const auto rows = detail::rows_into(m, k, r, total);
    if (total == 0) {
      empty.push_back(r);
      continue;
    }
    Matrix stacked(total, dr);
    for (const auto& slot : rows) stacked.middleRows(slot.offset, slot.dim) = here.at({slot.left, slot.phys});
    const Eigen::Index kd = std::min(total, dr);
    Eigen::HouseholderQR<Matrix> qr(stacked);
    const Matrix q = qr.householderQ() * Matrix::Identity(total, kd);
    const Matrix rmat = qr.matrixQR().topRows(kd).triangularView<Eigen::Upper>();
    for (const auto& slot : rows) here.at({slot.left, slot.phys}) = q.middleRows(slot.offset, slot.dim);
    for (int p = 0; p < kPhysDim; ++p) {
      auto it = next.find({r, p});
      if (it != next.end()) it->second = rmat * it->second;
    }
    dr = kd;
  }
  for (const auto& r : empty) detail::drop_sector(m, k + 1, r);
  m.center = k + 1;
}

/// LQ at site k; L is absorbed into site k - 1. Center moves k -> k - 1.
inline void shift_center_left(MpdoState& m, int k) {
  if (k < 1 || k >= m.sites) throw std::out_of_range("shift_center_left: site out of range");
  auto& bond = m.bonds[static_cast<std::size_t>(k)];
  auto& here = m.tensors[static_cast<std::size_t>(k)].blocks;
  auto& prev = m.tensors[static_cast<std::size_t>(k) - 1].blocks;
  std::vector<Flux> empty;
  for (auto& [s, ds] : bond) {
    Eigen::Index total = 0;
    const auto cols = detail::cols_from(m, k, s, total);
    if (total == 0) {
      empty.push_back(s);
      continue;
    }
    Matrix wide(ds, total);
    for (const auto& slot : cols) wide.middleCols(slot.offset, slot.dim) = here.at({s, slot.phys});
    const Eigen::Index kd = std::min(total, ds);
    Eigen::HouseholderQR<Matrix> qr(wide.adjoint());
    const Matrix q = qr.householderQ() * Matrix::Identity(total, kd);                       // total x kd
    const Matrix lmat = Matrix(qr.matrixQR().topRows(kd).triangularView<Eigen::Upper>()).adjoint();  // ds x kd
    for (const auto& slot : cols) here.at({s, slot.phys}) = q.middleRows(slot.offset, slot.dim).adjoint();
    for (auto& [key, blk] : prev)
      if (FluxTensor::right_of(key.first, key.second) == s) blk = blk * lmat;
    ds = kd;
  }
  for (const auto& s : empty) detail::drop_sector(m, k, s);
  m.center = k - 1;
}

/// Left-to-right QR sweep; leaves the center on the last site.
inline void canonicalize(MpdoState& m) {
  for (int k = 0; k + 1 < m.sites; ++k) shift_center_right(m, k);
  m.center = m.sites - 1;
}

inline void move_center(MpdoState& m, int target) {
  if (target < 0 || target >= m.sites) throw std::out_of_range("move_center: site out of range");
  if (!m.center) canonicalize(m);
  while (*m.center < target) shift_center_right(m, *m.center);
  while (*m.center > target) shift_center_left(m, *m.center);
}

inline bool is_left_isometry(const MpdoState& m, int k, double tol = 1e-10) {
  for (const auto& [r, dr] : m.bonds[static_cast<std::size_t>(k) + 1]) {
    Matrix acc = Matrix::Zero(dr, dr);
    for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks)
      if (FluxTensor::right_of(key.first, key.second) == r) acc += blk.adjoint() * blk;
    if (max_abs(acc - Matrix::Identity(dr, dr)) > tol) return false;
  }
  return true;
}

inline bool is_right_isometry(const MpdoState& m, int k, double tol = 1e-10) {
  for (const auto& [s, ds] : m.bonds[static_cast<std::size_t>(k)]) {
    Matrix acc = Matrix::Zero(ds, ds);
    for (int p = 0; p < kPhysDim; ++p)
      if (const Matrix* blk = m.tensors[static_cast<std::size_t>(k)].find(s, p)) acc += (*blk) * blk->adjoint();
    if (max_abs(acc - Matrix::Identity(ds, ds)) > tol) return false;
  }
  return true;
}

/// True when every site left (right) of the center is a left (right) isometry.
inline bool is_mixed_canonical(const MpdoState& m, double tol = 1e-10) {
  if (!m.center) return false;
  for (int k = 0; k < *m.center; ++k)
    if (!is_left_isometry(m, k, tol)) return false;
  for (int k = *m.center + 1; k < m.sites; ++k)
    if (!is_right_isometry(m, k, tol)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Truncated splitting shared by construction, gates and recompression.

struct SplitGroup {
  std::vector<detail::RowSlot> rows;
  std::vector<detail::ColSlot> cols;
  Matrix mat;
  Matrix u, v;  // thin factors
  RealVector s;
  Eigen::Index keep = 0;
};

/// Global truncation over all groups: keeps at most chi_max values above cutoff * s_max.
/// Returns the discarded weight (sum of discarded s^2).
inline double choose_kept(std::map<Flux, SplitGroup>& groups, const TruncationParams& t) {
  std::vector<std::pair<double, Flux>> all;
  for (auto& [f, g] : groups)
    for (Eigen::Index i = 0; i < g.s.size(); ++i) all.emplace_back(g.s(i), f);
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double smax = all.empty() ? 0.0 : all.front().first;
  double discarded = 0.0;
  for (auto& [f, g] : groups) g.keep = 0;
  std::size_t kept = 0;
  for (const auto& [s, f] : all) {
    const bool ok = s > 0.0 && s > t.svd_cutoff * smax && kept < static_cast<std::size_t>(t.chi_max);
    if (ok) {
      ++groups.at(f).keep;
      ++kept;
    } else {
      discarded += s * s;
    }
  }
  return discarded;
}

inline void svd_groups(std::map<Flux, SplitGroup>& groups) {
  std::vector<SplitGroup*> gs;
  for (auto& [f, g] : groups) gs.push_back(&g);
  parallel_for(gs.size(), [&](std::size_t i) {
    SplitGroup& g = *gs[i];
    // Not BDCSVD: its error in Eigen 3.4.0 accumulates over long TEBD runs.
    Eigen::JacobiSVD<Matrix> svd(g.mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    g.u = svd.matrixU();
    g.v = svd.matrixV();
    g.s = svd.singularValues();
  });
}

// ---------------------------------------------------------------------------
// Dense conversion.

inline constexpr std::size_t kDenseGuard = 4096;

namespace detail {

class SuffixIndex {
 public:
  const std::vector<Bits>& strings(int len, int ones) {
    return entry(len, ones).first;
  }
  std::size_t index(int len, int ones, Bits b) { return entry(len, ones).second.at(b); }

 private:
  using Entry = std::pair<std::vector<Bits>, std::unordered_map<Bits, std::size_t>>;
  Entry& entry(int len, int ones) {
    auto key = std::make_pair(len, ones);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Entry e;
    e.first = occupation_strings(len, ones);
    for (std::size_t i = 0; i < e.first.size(); ++i) e.second.emplace(e.first[i], i);
    return cache_.emplace(key, std::move(e)).first->second;
  }
  std::map<std::pair<int, int>, Entry> cache_;
};

}  // namespace detail

/// Sequential truncated SVDs of the vectorized density matrix, sector by sector.
/// Leaves the state left-canonical with the center on the last site.
inline MpdoState mpdo_from_dense(const DensityMatrix& rho, const TruncationParams& t = {}) {
  const auto& basis = rho.basis();
  if (basis.dim() > kDenseGuard) throw std::invalid_argument("mpdo_from_dense: sector dimension exceeds the densification guard");
  const int L = basis.sites(), N = basis.particles();
  MpdoState m(L, N, t);
  detail::SuffixIndex sfx;

  // Remainder per bond sector: rows = bond index, cols = (ket suffix, bra suffix).
  std::map<Flux, Matrix> rem;
  {
    const auto d = static_cast<Eigen::Index>(basis.dim());
    Matrix r0(1, d * d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) r0(0, a * d + b) = rho(a, b);
    rem.emplace(Flux{N, N}, std::move(r0));
  }
  m.bonds[0] = {{Flux{N, N}, 1}};

  for (int k = 0; k < L; ++k) {
    const int len = L - k;
    std::map<Flux, SplitGroup> groups;
    std::map<Flux, std::map<std::pair<Flux, int>, Eigen::Index>> row_offsets;
    // Pass 1: row layout per target sector.
    for (const auto& [s, r] : rem)
      for (int p = 0; p < kPhysDim; ++p) {
        const Flux target = FluxTensor::right_of(s, p);
        if (target.ket < 0 || target.bra < 0 || target.ket > len - 1 || target.bra > len - 1) continue;
        auto& g = groups[target];
        row_offsets[target][{s, p}] = g.mat.rows();
        g.rows.push_back({s, p, g.mat.rows(), r.rows()});
        g.mat.conservativeResize(g.mat.rows() + r.rows(), 0);
      }
    for (auto& [target, g] : groups) {
      const auto nk = static_cast<Eigen::Index>(sfx.strings(len - 1, target.ket).size());
      const auto nb = static_cast<Eigen::Index>(sfx.strings(len - 1, target.bra).size());
      g.mat = Matrix::Zero(g.mat.rows(), nk * nb);
    }
    // Pass 2: scatter columns.
    const Bits top = Bits{1} << (len - 1);
    for (const auto& [s, r] : rem) {
      const auto& kets = sfx.strings(len, s.ket);
      const auto& bras = sfx.strings(len, s.bra);
      for (std::size_t x = 0; x < kets.size(); ++x)
        for (std::size_t y = 0; y < bras.size(); ++y) {
          const int a = (kets[x] & top) ? 1 : 0;
          const int b = (bras[y] & top) ? 1 : 0;
          const int p = phys_index(a, b);
          const Flux target = FluxTensor::right_of(s, p);
          auto git = groups.find(target);
          if (git == groups.end()) continue;
          auto& g = git->second;
          const auto nb = sfx.strings(len - 1, target.bra).size();
          const auto col = static_cast<Eigen::Index>(sfx.index(len - 1, target.ket, kets[x] & ~top) * nb +
                                                     sfx.index(len - 1, target.bra, bras[y] & ~top));
          const Eigen::Index off = row_offsets[target].at({s, p});
          g.mat.block(off, col, r.rows(), 1) = r.col(static_cast<Eigen::Index>(x * bras.size() + y));
        }
    }

    auto& tensor = m.tensors[static_cast<std::size_t>(k)];
    std::map<Flux, Matrix> next;
    if (k == L - 1) {
      // Last site: the single remaining column is the tensor itself.
      for (auto& [target, g] : groups)
        for (const auto& slot : g.rows) tensor.blocks[{slot.left, slot.phys}] = g.mat.middleRows(slot.offset, slot.dim);
      m.bonds[static_cast<std::size_t>(L)] = {{Flux{0, 0}, 1}};
      break;
    }
    svd_groups(groups);
    m.discarded_weight += choose_kept(groups, t);
    for (auto& [target, g] : groups) {
      if (g.keep == 0) continue;
      for (const auto& slot : g.rows)
        tensor.blocks[{slot.left, slot.phys}] = g.u.block(slot.offset, 0, slot.dim, g.keep);
      next.emplace(target, g.s.head(g.keep).asDiagonal() * g.v.leftCols(g.keep).adjoint());
      m.bonds[static_cast<std::size_t>(k) + 1][target] = g.keep;
    }
    rem = std::move(next);
  }
  // Sectors dropped by truncation can leave dangling blocks on the previous site.
  for (int k = 0; k < L; ++k) {
    auto& blocks = m.tensors[static_cast<std::size_t>(k)].blocks;
    const auto& rb = m.bonds[static_cast<std::size_t>(k) + 1];
    for (auto it = blocks.begin(); it != blocks.end();)
      it = rb.count(FluxTensor::right_of(it->first.first, it->first.second)) ? std::next(it) : blocks.erase(it);
  }
  m.center = L - 1;
  return m;
}

/// Contracts the tensor train back into a density matrix (validated for trace and Hermiticity only).
inline DensityMatrix dense_from_mpdo(const MpdoState& m, DensityTolerances tol = {1e-8, 1e-8, 1e-8}) {
  auto basis = enumerate_sector(m.sites, m.particles);
  if (basis->dim() > kDenseGuard) throw std::invalid_argument("dense_from_mpdo: sector dimension exceeds the densification guard");
  struct Prefix {
    std::vector<std::pair<Bits, Bits>> labels;
    Matrix amp;
  };
  std::map<Flux, Prefix> cur;
  cur[Flux{m.particles, m.particles}] = Prefix{{{0, 0}}, Matrix::Ones(1, 1)};
  for (int k = 0; k < m.sites; ++k) {
    std::map<Flux, std::vector<std::pair<std::vector<std::pair<Bits, Bits>>, Matrix>>> parts;
    for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks) {
      auto it = cur.find(key.first);
      if (it == cur.end()) continue;
      const Flux f = kPhysFlux[static_cast<std::size_t>(key.second)];
      std::vector<std::pair<Bits, Bits>> labels;
      labels.reserve(it->second.labels.size());
      for (const auto& [kb, bb] : it->second.labels)
        labels.emplace_back((kb << 1) | static_cast<Bits>(f.ket), (bb << 1) | static_cast<Bits>(f.bra));
      parts[FluxTensor::right_of(key.first, key.second)].emplace_back(std::move(labels), it->second.amp * blk);
    }
    std::map<Flux, Prefix> nxt;
    for (auto& [f, list] : parts) {
      Prefix p;
      Eigen::Index rows = 0;
      for (const auto& [lab, a] : list) rows += a.rows();
      p.amp.resize(rows, list.front().second.cols());
      Eigen::Index off = 0;
      for (auto& [lab, a] : list) {
        p.amp.middleRows(off, a.rows()) = a;
        off += a.rows();
        p.labels.insert(p.labels.end(), lab.begin(), lab.end());
      }
      nxt.emplace(f, std::move(p));
    }
    cur = std::move(nxt);
  }
  const auto d = static_cast<Eigen::Index>(basis->dim());
  Matrix rho = Matrix::Zero(d, d);
  auto it = cur.find(Flux{0, 0});
  if (it != cur.end())
    for (std::size_t r = 0; r < it->second.labels.size(); ++r) {
      const auto& [kb, bb] = it->second.labels[r];
      rho(static_cast<Eigen::Index>(basis->index_of(kb)), static_cast<Eigen::Index>(basis->index_of(bb))) += it->second.amp(static_cast<Eigen::Index>(r), 0);
    }
  return DensityMatrix::trusted(basis, std::move(rho), tol);
}

/// Product MPDO of an occupation configuration, built without densification.
inline MpdoState mpdo_product(int sites, const std::vector<int>& occupied, const TruncationParams& t = {}) {
  std::vector<int> occ(static_cast<std::size_t>(sites), 0);
  for (int s : occupied) {
    if (s < 0 || s >= sites || occ[static_cast<std::size_t>(s)]) throw std::invalid_argument("mpdo_product: invalid or repeated site");
    occ[static_cast<std::size_t>(s)] = 1;
  }
  const int n = static_cast<int>(occupied.size());
  MpdoState m(sites, n, t);
  int right = n;
  for (int k = 0; k < sites; ++k) {
    m.bonds[static_cast<std::size_t>(k)] = {{Flux{right, right}, 1}};
    const int o = occ[static_cast<std::size_t>(k)];
    m.tensors[static_cast<std::size_t>(k)].blocks[{Flux{right, right}, phys_index(o, o)}] = Matrix::Ones(1, 1);
    right -= o;
  }
  m.bonds[static_cast<std::size_t>(sites)] = {{Flux{0, 0}, 1}};
  m.center = 0;
  return m;
}

// ---------------------------------------------------------------------------
// Observables.

/// <<rho|rho>> = Tr rho^2 by full transfer-matrix contraction (no canonical form assumed).
inline double mpdo_purity(const MpdoState& m) {
  std::map<Flux, Matrix> env;
  env[Flux{m.particles, m.particles}] = Matrix::Ones(1, 1);
  for (int k = 0; k < m.sites; ++k) {
    std::map<Flux, Matrix> nxt;
    for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks) {
      auto it = env.find(key.first);
      if (it == env.end()) continue;
      const Flux r = FluxTensor::right_of(key.first, key.second);
      Matrix contrib = blk.adjoint() * it->second * blk;
      auto [nit, inserted] = nxt.try_emplace(r, contrib);
      if (!inserted) nit->second += contrib;
    }
    env = std::move(nxt);
  }
  auto it = env.find(Flux{0, 0});
  return it == env.end() ? 0.0 : it->second(0, 0).real();
}

namespace detail {

/// Left partial traces: row vectors per sector of bond k, contracting sites < k with physical index restricted to diagonals.
inline std::vector<std::map<Flux, Matrix>> left_traces(const MpdoState& m) {
  std::vector<std::map<Flux, Matrix>> out(static_cast<std::size_t>(m.sites) + 1);
  out[0][Flux{m.particles, m.particles}] = Matrix::Ones(1, 1);
  for (int k = 0; k < m.sites; ++k) {
    for (int p : {0, 3}) {
      for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks) {
        if (key.second != p) continue;
        auto it = out[static_cast<std::size_t>(k)].find(key.first);
        if (it == out[static_cast<std::size_t>(k)].end()) continue;
        Matrix v = it->second * blk;
        auto [nit, inserted] = out[static_cast<std::size_t>(k) + 1].try_emplace(FluxTensor::right_of(key.first, p), v);
        if (!inserted) nit->second += v;
      }
    }
  }
  return out;
}

inline std::vector<std::map<Flux, Matrix>> right_traces(const MpdoState& m) {
  std::vector<std::map<Flux, Matrix>> out(static_cast<std::size_t>(m.sites) + 1);
  out[static_cast<std::size_t>(m.sites)][Flux{0, 0}] = Matrix::Ones(1, 1);
  for (int k = m.sites - 1; k >= 0; --k) {
    for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks) {
      if (key.second != 0 && key.second != 3) continue;
      auto it = out[static_cast<std::size_t>(k) + 1].find(FluxTensor::right_of(key.first, key.second));
      if (it == out[static_cast<std::size_t>(k) + 1].end()) continue;
      Matrix v = blk * it->second;
      auto [nit, inserted] = out[static_cast<std::size_t>(k)].try_emplace(key.first, v);
      if (!inserted) nit->second += v;
    }
  }
  return out;
}

}  // namespace detail

inline double mpdo_trace(const MpdoState& m) {
  const auto r = detail::right_traces(m);
  auto it = r[0].find(Flux{m.particles, m.particles});
  return it == r[0].end() ? 0.0 : it->second(0, 0).real();
}

/// Tr(n_i rho) for every site.
inline std::vector<double> mpdo_site_densities(const MpdoState& m) {
  const auto left = detail::left_traces(m);
  const auto right = detail::right_traces(m);
  std::vector<double> n(static_cast<std::size_t>(m.sites), 0.0);
  for (int k = 0; k < m.sites; ++k) {
    cplx acc = 0.0;
    for (const auto& [key, blk] : m.tensors[static_cast<std::size_t>(k)].blocks) {
      if (key.second != 3) continue;
      auto l = left[static_cast<std::size_t>(k)].find(key.first);
      auto r = right[static_cast<std::size_t>(k) + 1].find(FluxTensor::right_of(key.first, 3));
      if (l == left[static_cast<std::size_t>(k)].end() || r == right[static_cast<std::size_t>(k) + 1].end()) continue;
      acc += (l->second * blk * r->second)(0, 0);
    }
    n[static_cast<std::size_t>(k)] = acc.real();
  }
  return n;
}

/// Squared singular values at `bond` (1 <= bond < L), labeled by the bond sector (n, n').
/// Moves the orthogonality center to the site left of the bond.
inline OsesSpectrum mpdo_oses(MpdoState& m, int bond) {
  if (bond < 1 || bond >= m.sites) throw std::out_of_range("mpdo_oses: bond out of range");
  const int k = bond - 1;
  move_center(m, k);
  OsesSpectrum out;
  for (const auto& [r, dr] : m.bonds[static_cast<std::size_t>(bond)]) {
    Eigen::Index total = 0;
    const auto rows = detail::rows_into(m, k, r, total);
    if (total == 0) continue;
    Matrix stacked(total, dr);
    for (const auto& slot : rows) stacked.middleRows(slot.offset, slot.dim) = m.tensors[static_cast<std::size_t>(k)].blocks.at({slot.left, slot.phys});
    Eigen::JacobiSVD<Matrix> svd(stacked);
    const RealVector s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) out.entries.push_back({s(i) * s(i), SectorLabel{r.ket, r.bra}});
  }
  return out;
}

inline OsesSpectrum mpdo_oses(const MpdoState& m, int bond) {
  MpdoState copy = m;
  return mpdo_oses(copy, bond);
}

inline double mpdo_config_coherence(MpdoState& m, int bond) { return mpdo_oses(m, bond).coherent_total(); }
inline double mpdo_config_coherence(const MpdoState& m, int bond) { return mpdo_oses(m, bond).coherent_total(); }

// ---------------------------------------------------------------------------
// Diagonal projection, sums and recompression.

/// Drops the (1,0) and (0,1) physical components on every site: the MPDO of diag(rho).
inline MpdoState mpdo_diag(const MpdoState& m) {
  MpdoState out = m;
  for (auto& t : out.tensors)
    for (auto it = t.blocks.begin(); it != t.blocks.end();)
      it = (it->first.second == 1 || it->first.second == 2) ? t.blocks.erase(it) : std::next(it);
  out.center.reset();
  // Remove sectors no longer reachable from both boundaries.
  for (int b = 1; b < out.sites; ++b) {
    std::vector<Flux> dead;
    for (const auto& [f, d] : out.bonds[static_cast<std::size_t>(b)]) {
      bool in = false, outgoing = false;
      for (const auto& [key, blk] : out.tensors[static_cast<std::size_t>(b) - 1].blocks)
        if (FluxTensor::right_of(key.first, key.second) == f) in = true;
      for (const auto& [key, blk] : out.tensors[static_cast<std::size_t>(b)].blocks)
        if (key.first == f) outgoing = true;
      if (!in || !outgoing) dead.push_back(f);
    }
    for (const auto& f : dead) detail::drop_sector(out, b, f);
  }
  return out;
}

/// Right-to-left truncating SVD sweep from a left-canonical state; returns the discarded weight.
inline double compress(MpdoState& m) {
  move_center(m, m.sites - 1);
  double discarded = 0.0;
  for (int k = m.sites - 1; k >= 1; --k) {
    auto& here = m.tensors[static_cast<std::size_t>(k)].blocks;
    std::map<Flux, SplitGroup> groups;
    for (const auto& [s, ds] : m.bonds[static_cast<std::size_t>(k)]) {
      Eigen::Index total = 0;
      auto cols = detail::cols_from(m, k, s, total);
      if (total == 0) continue;
      SplitGroup g;
      g.cols = std::move(cols);
      g.mat.resize(ds, total);
      for (const auto& slot : g.cols) g.mat.middleCols(slot.offset, slot.dim) = here.at({s, slot.phys});
      groups.emplace(s, std::move(g));
    }
    svd_groups(groups);
    discarded += choose_kept(groups, m.trunc);
    auto& prev = m.tensors[static_cast<std::size_t>(k) - 1].blocks;
    BondSectors nb;
    for (auto& [s, g] : groups) {
      if (g.keep == 0) continue;
      const Matrix vh = g.v.leftCols(g.keep).adjoint();
      for (const auto& slot : g.cols) here.at({s, slot.phys}) = vh.middleCols(slot.offset, slot.dim);
      const Matrix us = g.u.leftCols(g.keep) * g.s.head(g.keep).asDiagonal();
      for (auto& [key, blk] : prev)
        if (FluxTensor::right_of(key.first, key.second) == s) blk = blk * us;
      nb[s] = g.keep;
    }
    std::vector<Flux> gone;
    for (const auto& [s, ds] : m.bonds[static_cast<std::size_t>(k)])
      if (!nb.count(s)) gone.push_back(s);
    for (const auto& [s, keep] : nb) m.bonds[static_cast<std::size_t>(k)][s] = keep;
    for (const auto& s : gone) detail::drop_sector(m, k, s);
    m.center = k - 1;
  }
  m.discarded_weight += discarded;
  return discarded;
}

/// w1 |m1>> + w2 |m2>> as a direct-sum tensor train (bond dimension chi1 + chi2), optionally recompressed.
inline MpdoState mpdo_add(const MpdoState& m1, const MpdoState& m2, double w1, double w2, bool recompress = true) {
  if (m1.sites != m2.sites || m1.particles != m2.particles) throw std::invalid_argument("mpdo_add: mismatched shapes");
  const int L = m1.sites;
  MpdoState out(L, m1.particles, m1.trunc);
  if (L == 1) {
    out.bonds = m1.bonds;
    out.tensors = m1.tensors;
    for (auto& [key, blk] : out.tensors[0].blocks) blk *= w1;
    for (const auto& [key, blk] : m2.tensors[0].blocks) {
      auto [it, inserted] = out.tensors[0].blocks.try_emplace(key, w2 * blk);
      if (!inserted) it->second += w2 * blk;
    }
    return out;
  }
  auto dim_of = [](const BondSectors& b, Flux f) -> Eigen::Index {
    auto it = b.find(f);
    return it == b.end() ? 0 : it->second;
  };
  for (int b = 0; b <= L; ++b) {
    if (b == 0 || b == L) {
      out.bonds[static_cast<std::size_t>(b)] = m1.bonds[static_cast<std::size_t>(b)];
      continue;
    }
    for (const auto* src : {&m1.bonds[static_cast<std::size_t>(b)], &m2.bonds[static_cast<std::size_t>(b)]})
      for (const auto& [f, d] : *src) out.bonds[static_cast<std::size_t>(b)][f] = dim_of(m1.bonds[static_cast<std::size_t>(b)], f) + dim_of(m2.bonds[static_cast<std::size_t>(b)], f);
  }
  for (int k = 0; k < L; ++k) {
    const auto& lb1 = m1.bonds[static_cast<std::size_t>(k)];
    const auto& rb1 = m1.bonds[static_cast<std::size_t>(k) + 1];
    auto& blocks = out.tensors[static_cast<std::size_t>(k)].blocks;
    const bool first = k == 0, last = k == L - 1;
    auto place = [&](const MpdoState& src, bool second, double w) {
      for (const auto& [key, blk] : src.tensors[static_cast<std::size_t>(k)].blocks) {
        const Flux r = FluxTensor::right_of(key.first, key.second);
        const Eigen::Index rows = out.bonds[static_cast<std::size_t>(k)].at(key.first);
        const Eigen::Index cols = out.bonds[static_cast<std::size_t>(k) + 1].at(r);
        auto [it, inserted] = blocks.try_emplace(key, Matrix::Zero(rows, cols));
        const Eigen::Index r0 = (second && !first) ? dim_of(lb1, key.first) : 0;
        const Eigen::Index c0 = (second && !last) ? dim_of(rb1, r) : 0;
        const double scale = first ? w : 1.0;
        it->second.block(r0, c0, blk.rows(), blk.cols()) += scale * blk;
      }
    };
    place(m1, false, w1);
    place(m2, true, w2);
  }
  out.discarded_weight = 0.0;
  if (recompress) {
    canonicalize(out);
    compress(out);
  }
  return out;
}

/// (1 - p) rho + p diag(rho) in MPDO form.
inline MpdoState mpdo_diag_interpolation(const MpdoState& m, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mpdo_diag_interpolation: p must lie in [0, 1]");
  return mpdo_add(m, mpdo_diag(m), 1.0 - p, p, true);
}

}  // namespace confcoh

#endif  // CONFCOH_MPDO_HPP
