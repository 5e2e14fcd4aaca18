#ifndef CONFCOH_STATE_IO_HPP
#define CONFCOH_STATE_IO_HPP

#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "density.hpp"

namespace confcoh {

// State file: one JSON header line, '\n', then interleaved (re, im) float64 little-endian, row-major.

namespace io {

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

inline double get_f64(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline void put_complex(std::ostream& os, cplx z) {
  put_f64(os, z.real());
  put_f64(os, z.imag());
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace io

struct StateFile {
  std::string kind;  // "density" or "pure"
  BasisPtr basis;
  Matrix density;                // always filled (projector for pure states)
  std::optional<Vector> amplitudes;  // pure states only
};

namespace detail {

inline void write_state_file(const std::string& path, const std::string& kind, const SectorBasis& b, const Matrix& payload) {
  nlohmann::json h = {{"version", 1}, {"kind", kind}, {"L", b.sites()}, {"N", b.particles()}, {"dim", b.dim()},
                      {"layout", "row-major"}, {"scalar", "complex-f64-interleaved-le"}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << h.dump() << '\n';
  for (Eigen::Index r = 0; r < payload.rows(); ++r)
    for (Eigen::Index c = 0; c < payload.cols(); ++c) io::put_complex(out, payload(r, c));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace detail

inline void write_state(const std::string& path, const DensityMatrix& rho) {
  detail::write_state_file(path, "density", rho.basis(), rho.data());
}

inline void write_state(const std::string& path, const PureState& psi) {
  detail::write_state_file(path, "pure", psi.basis(), psi.amplitudes().transpose());
}

/// Parses and validates a state file; corrupt headers and header/payload mismatches throw std::invalid_argument.
inline StateFile read_state(const std::string& path) {
  const std::string raw = io::slurp(path);
  const auto nl = raw.find('\n');
  if (nl == std::string::npos) throw std::invalid_argument("corrupt state file: missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(raw.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("corrupt state file: header is not JSON (") + e.what() + ")");
  }
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!h.contains(key)) throw std::invalid_argument(std::string("corrupt state file: header lacks '") + key + "'");
    return h.at(key);
  };
  StateFile sf;
  int version = 0, L = 0, N = 0;
  std::size_t dim = 0;
  std::string layout, scalar;
  try {
    version = need("version").get<int>();
    sf.kind = need("kind").get<std::string>();
    L = need("L").get<int>();
    N = need("N").get<int>();
    dim = need("dim").get<std::size_t>();
    layout = need("layout").get<std::string>();
    scalar = need("scalar").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("corrupt state file: bad header field (") + e.what() + ")");
  }
  if (version != 1) throw std::invalid_argument("corrupt state file: unsupported version");
  if (sf.kind != "density" && sf.kind != "pure") throw std::invalid_argument("corrupt state file: unknown kind '" + sf.kind + "'");
  if (layout != "row-major" || scalar != "complex-f64-interleaved-le") throw std::invalid_argument("corrupt state file: unsupported layout or scalar");
  sf.basis = enumerate_sector(L, N);
  if (sf.basis->dim() != dim) throw std::invalid_argument("corrupt state file: dim disagrees with C(L, N)");
  const std::size_t count = sf.kind == "density" ? dim * dim : dim;
  const std::size_t bytes = raw.size() - nl - 1;
  if (bytes != count * 16) throw std::invalid_argument("corrupt state file: payload size " + std::to_string(bytes) + " != expected " + std::to_string(count * 16));
  const char* p = raw.data() + nl + 1;
  const auto d = static_cast<Eigen::Index>(dim);
  if (sf.kind == "density") {
    sf.density.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c, p += 16) sf.density(r, c) = cplx{io::get_f64(p), io::get_f64(p + 8)};
    DensityMatrix check(sf.basis, sf.density);  // validates
  } else {
    Vector v(d);
    for (Eigen::Index r = 0; r < d; ++r, p += 16) v(r) = cplx{io::get_f64(p), io::get_f64(p + 8)};
    PureState psi(sf.basis, v);  // validates
    sf.density = v * v.adjoint();
    sf.amplitudes = std::move(v);
  }
  return sf;
}

inline DensityMatrix read_density(const std::string& path) {
  auto sf = read_state(path);
  return DensityMatrix::trusted(sf.basis, std::move(sf.density));
}

}  // namespace confcoh

#endif  // CONFCOH_STATE_IO_HPP
