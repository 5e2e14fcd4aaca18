#ifndef CONFCOH_SECTOR_BASIS_HPP
#define CONFCOH_SECTOR_BASIS_HPP

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace confcoh {

/// All bitstrings of `length` bits with `ones` set bits, in descending numeric order
/// (occupied-first lexicographic order with the leading site most significant).
inline std::vector<Bits> occupation_strings(int length, int ones) {
  std::vector<Bits> out;
  if (length < 0 || ones < 0 || ones > length) return out;
  out.reserve(binomial(length, ones));
  // Recursive descent over sites: placing a particle before a hole yields descending order.
  std::function<void(int, int, Bits)> rec = [&](int site, int left, Bits acc) {
    const int remaining = length - site;
    if (left == 0) {
      out.push_back(acc);
      return;
    }
    if (left > remaining) return;
    rec(site + 1, left - 1, acc | (Bits{1} << (length - 1 - site)));
    if (left < remaining) rec(site + 1, left, acc);
  };
  rec(0, ones, 0);
  return out;
}

/// Fixed particle-number sector of an L-site chain of hardcore particles.
class SectorBasis {
 public:
  SectorBasis(int sites, int particles) : sites_(sites), particles_(particles) {
    if (sites < 1 || sites > kMaxSites) throw std::invalid_argument("sector basis: L must be in [1, 62]");
    if (particles < 0 || particles > sites) throw std::invalid_argument("sector basis: N must satisfy 0 <= N <= L");
    states_ = occupation_strings(sites, particles);
    index_.reserve(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], i);
  }

  int sites() const { return sites_; }
  int particles() const { return particles_; }
  std::size_t dim() const { return states_.size(); }
  const std::vector<Bits>& states() const { return states_; }
  Bits state(std::size_t i) const { return states_.at(i); }

  std::optional<std::size_t> find(Bits b) const {
    auto it = index_.find(b);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(Bits b) const {
    auto idx = find(b);
    if (!idx) throw std::out_of_range("sector basis: bitstring not in sector");
    return *idx;
  }

  /// Occupation (0/1) of `site` (0-based) in basis state `i`.
  int occupation(std::size_t i, int site) const {
    return static_cast<int>((states_[i] >> (sites_ - 1 - site)) & 1u);
  }

  std::string label(std::size_t i) const {
    std::string s(static_cast<std::size_t>(sites_), '0');
    for (int k = 0; k < sites_; ++k)
      if (occupation(i, k)) s[static_cast<std::size_t>(k)] = '1';
    return s;
  }

  bool operator==(const SectorBasis& o) const { return sites_ == o.sites_ && particles_ == o.particles_; }

 private:
  int sites_;
  int particles_;
  std::vector<Bits> states_;
  std::unordered_map<Bits, std::size_t> index_;
};

using BasisPtr = std::shared_ptr<const SectorBasis>;

inline BasisPtr enumerate_sector(int sites, int particles) {
  return std::make_shared<const SectorBasis>(sites, particles);
}

/// Position of a global basis state in the bipartite (n, i_n, mu_n) labelling.
struct SplitIndex {
  int n;           // particles in B
  std::size_t i;   // index into a_states(n)
  std::size_t mu;  // index into b_states(n)
};

/// Bipartition A = sites [0, cut), B = sites [cut, L) of a sector basis, organised by
/// the number n of particles in B.
class BipartiteIndex {
 public:
  BipartiteIndex(BasisPtr basis, int cut) : basis_(std::move(basis)), cut_(cut) {
    const int L = basis_->sites();
    const int N = basis_->particles();
    if (cut < 1 || cut >= L) throw std::invalid_argument("bipartite split: cut must satisfy 1 <= cut < L");
    const int lb = L - cut;
    a_states_.resize(static_cast<std::size_t>(N) + 1);
    b_states_.resize(static_cast<std::size_t>(N) + 1);
    a_offset_.assign(static_cast<std::size_t>(N) + 2, 0);
    b_offset_.assign(static_cast<std::size_t>(N) + 2, 0);
    for (int n = 0; n <= N; ++n) {
      auto a = occupation_strings(cut, N - n);
      auto b = occupation_strings(lb, n);
      if (!a.empty() && !b.empty()) {
        a_states_[static_cast<std::size_t>(n)] = std::move(a);
        b_states_[static_cast<std::size_t>(n)] = std::move(b);
      }
    }
    for (int n = 0; n <= N; ++n) {
      const auto un = static_cast<std::size_t>(n);
      a_offset_[un + 1] = a_offset_[un] + a_states_[un].size();
      b_offset_[un + 1] = b_offset_[un] + b_states_[un].size();
    }
    split_.resize(basis_->dim());
    global_.resize(static_cast<std::size_t>(N) + 1);
    for (int n = 0; n <= N; ++n) {
      const auto un = static_cast<std::size_t>(n);
      global_[un].assign(a_states_[un].size() * b_states_[un].size(), 0);
      std::unordered_map<Bits, std::size_t> bpos;
      for (std::size_t mu = 0; mu < b_states_[un].size(); ++mu) bpos.emplace(b_states_[un][mu], mu);
      for (std::size_t i = 0; i < a_states_[un].size(); ++i) {
        for (std::size_t mu = 0; mu < b_states_[un].size(); ++mu) {
          const Bits g = (a_states_[un][i] << lb) | b_states_[un][mu];
          const std::size_t gi = basis_->index_of(g);
          split_[gi] = SplitIndex{n, i, mu};
          global_[un][i * b_states_[un].size() + mu] = gi;
        }
      }
    }
  }

  const SectorBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  int cut() const { return cut_; }
  int max_n() const { return basis_->particles(); }

  /// A-substates (length cut) holding N - n particles; empty if sector n is unreachable.
  const std::vector<Bits>& a_states(int n) const { return a_states_.at(static_cast<std::size_t>(n)); }
  /// B-substates (length L - cut) holding n particles; empty if sector n is unreachable.
  const std::vector<Bits>& b_states(int n) const { return b_states_.at(static_cast<std::size_t>(n)); }
  bool has_sector(int n) const { return n >= 0 && n <= max_n() && !a_states(n).empty(); }

  const SplitIndex& split(std::size_t global) const { return split_.at(global); }
  std::size_t global(int n, std::size_t i, std::size_t mu) const {
    return global_.at(static_cast<std::size_t>(n)).at(i * b_states(n).size() + mu);
  }
  /// Particles in B for global state `g`.
  int b_count(std::size_t g) const { return split_[g].n; }

  // Embedding space: every reachable A-substate times every reachable B-substate,
  // grouped by sector n in ascending order.
  std::size_t a_total() const { return a_offset_.back(); }
  std::size_t b_total() const { return b_offset_.back(); }
  std::size_t a_offset(int n) const { return a_offset_.at(static_cast<std::size_t>(n)); }
  std::size_t b_offset(int n) const { return b_offset_.at(static_cast<std::size_t>(n)); }
  /// Row of global state `g` in the embedding (A index major).
  std::size_t embed(std::size_t g) const {
    const auto& s = split_[g];
    return (a_offset(s.n) + s.i) * b_total() + b_offset(s.n) + s.mu;
  }

 private:
  BasisPtr basis_;
  int cut_;
  std::vector<std::vector<Bits>> a_states_;
  std::vector<std::vector<Bits>> b_states_;
  std::vector<std::size_t> a_offset_;
  std::vector<std::size_t> b_offset_;
  std::vector<SplitIndex> split_;
  std::vector<std::vector<std::size_t>> global_;
};

inline BipartiteIndex bipartite_split(const BasisPtr& basis, int cut) { return BipartiteIndex(basis, cut); }

/// Diagonal 0/1 projector onto global states with exactly n particles in B.
inline Matrix local_number_projector(const BipartiteIndex& bi, int n) {
  if (n < 0 || n > bi.max_n()) throw std::invalid_argument("local number projector: n out of range");
  const auto d = static_cast<Eigen::Index>(bi.basis().dim());
  Matrix p = Matrix::Zero(d, d);
  for (Eigen::Index g = 0; g < d; ++g)
    if (bi.b_count(static_cast<std::size_t>(g)) == n) p(g, g) = 1.0;
  return p;
}

}  // namespace confcoh

#endif  // CONFCOH_SECTOR_BASIS_HPP
