#ifndef CONFCOH_CHECKPOINT_HPP
#define CONFCOH_CHECKPOINT_HPP

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mpdo.hpp"
#include "state_io.hpp"

namespace confcoh {

// MPDO checkpoint: <base>.json manifest + <base>.bin with every block, row-major,
// in the state-file scalar convention. Block offsets in the manifest count complex scalars.

inline void save_checkpoint(const MpdoState& m, const std::string& base) {
  m.audit();
  nlohmann::json j;
  j["version"] = 1;
  j["L"] = m.sites;
  j["N"] = m.particles;
  j["scalar"] = "complex-f64-interleaved-le";
  j["layout"] = "row-major";
  j["center"] = m.center ? nlohmann::json(*m.center) : nlohmann::json(nullptr);
  j["chi_max"] = m.trunc.chi_max;
  j["svd_cutoff"] = m.trunc.svd_cutoff;
  j["discarded_weight"] = m.discarded_weight;
  j["chi"] = nlohmann::json::array();
  j["bonds"] = nlohmann::json::array();
  for (int b = 0; b <= m.sites; ++b) {
    j["chi"].push_back(m.bond_dimension(b));
    auto sectors = nlohmann::json::array();
    for (const auto& [f, d] : m.bonds[static_cast<std::size_t>(b)]) sectors.push_back({{"ket", f.ket}, {"bra", f.bra}, {"dim", d}});
    j["bonds"].push_back(sectors);
  }
  std::ofstream bin(base + ".bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("cannot write " + base + ".bin");
  std::size_t offset = 0;
  j["tensors"] = nlohmann::json::array();
  for (const auto& t : m.tensors) {
    auto blocks = nlohmann::json::array();
    for (const auto& [key, blk] : t.blocks) {
      blocks.push_back({{"ket", key.first.ket}, {"bra", key.first.bra}, {"phys", key.second},
                        {"rows", blk.rows()}, {"cols", blk.cols()}, {"offset", offset}});
      for (Eigen::Index r = 0; r < blk.rows(); ++r)
        for (Eigen::Index c = 0; c < blk.cols(); ++c) io::put_complex(bin, blk(r, c));
      offset += static_cast<std::size_t>(blk.size());
    }
    j["tensors"].push_back(blocks);
  }
  j["scalars"] = offset;
  if (!bin) throw std::runtime_error("write failed for " + base + ".bin");
  std::ofstream man(base + ".json", std::ios::trunc);
  if (!man) throw std::runtime_error("cannot write " + base + ".json");
  man << j.dump(2) << '\n';
}

/// Loads and audits a checkpoint; inconsistent manifests or payloads throw std::invalid_argument.
inline MpdoState load_checkpoint(const std::string& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::slurp(base + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  const std::string raw = io::slurp(base + ".bin");
  try {
    if (j.at("version").get<int>() != 1) throw std::invalid_argument("corrupt checkpoint: unsupported version");
    TruncationParams t;
    t.chi_max = j.at("chi_max").get<int>();
    t.svd_cutoff = j.at("svd_cutoff").get<double>();
    MpdoState m(j.at("L").get<int>(), j.at("N").get<int>(), t);
    m.discarded_weight = j.at("discarded_weight").get<double>();
    if (!j.at("center").is_null()) m.center = j.at("center").get<int>();
    const std::size_t scalars = j.at("scalars").get<std::size_t>();
    if (raw.size() != scalars * 16) throw std::invalid_argument("corrupt checkpoint: payload size mismatch");
    const auto& bonds = j.at("bonds");
    if (bonds.size() != static_cast<std::size_t>(m.sites) + 1) throw std::invalid_argument("corrupt checkpoint: bond count mismatch");
    for (std::size_t b = 0; b < bonds.size(); ++b)
      for (const auto& s : bonds[b]) m.bonds[b][Flux{s.at("ket").get<int>(), s.at("bra").get<int>()}] = s.at("dim").get<Eigen::Index>();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != static_cast<std::size_t>(m.sites)) throw std::invalid_argument("corrupt checkpoint: tensor count mismatch");
    for (std::size_t k = 0; k < tensors.size(); ++k)
      for (const auto& blk : tensors[k]) {
        const auto rows = blk.at("rows").get<Eigen::Index>(), cols = blk.at("cols").get<Eigen::Index>();
        const auto off = blk.at("offset").get<std::size_t>();
        if (rows < 0 || cols < 0 || off + static_cast<std::size_t>(rows * cols) > scalars) throw std::invalid_argument("corrupt checkpoint: block out of payload range");
        Matrix a(rows, cols);
        const char* p = raw.data() + off * 16;
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c, p += 16) a(r, c) = cplx{io::get_f64(p), io::get_f64(p + 8)};
        m.tensors[k].blocks[{Flux{blk.at("ket").get<int>(), blk.at("bra").get<int>()}, blk.at("phys").get<int>()}] = std::move(a);
      }
    try {
      m.audit();
    } catch (const std::logic_error& e) {
      throw std::invalid_argument(std::string("corrupt checkpoint: ") + e.what());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("corrupt checkpoint manifest: ") + e.what());
  }
}

}  // namespace confcoh

#endif  // CONFCOH_CHECKPOINT_HPP
