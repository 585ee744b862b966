#pragma once

// Baseband OFDM building blocks: constellations, DFT/IDFT, cyclic prefix,
// frame assembly and PAPR.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ofdmsync {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using bitvec = std::vector<std::uint8_t>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps a phase into [-pi, pi).
inline double wrap_phase(double x) {
  double y = std::fmod(x + kPi, kTwoPi);
  if (y < 0) y += kTwoPi;
  return y - kPi;
}

/// Wraps a normalized frequency into [-0.5, 0.5).
inline double wrap_half(double x) {
  return x - std::floor(x + 0.5);
}

enum class PilotScheme { conventional, clustered };

inline std::string to_string(PilotScheme s) {
  return s == PilotScheme::conventional ? "conventional" : "clustered";
}

/// OFDM numerology and subcarrier allocation for one frame.
///
/// Bin indices are physical FFT bins in [0, n_sub). Pilot groups list the
/// first bin of each pilot group: one tone for the conventional scheme, the
/// left tone k of the adjacent pair (k, k+1) for the clustered scheme.
struct FrameConfig {
  std::size_t n_sub = 64;
  double cp_fraction = 0.25;
  int mod_order = 4;
  std::size_t symbols_per_frame = 1;
  std::vector<std::size_t> data_indices;
  std::vector<std::size_t> pilot_indices;
  cvec pilot_values;
  PilotScheme pilot_scheme = PilotScheme::conventional;
  std::vector<std::size_t> pilot_groups;

  std::size_t cp_length() const {
    return static_cast<std::size_t>(std::llround(cp_fraction * static_cast<double>(n_sub)));
  }
  std::size_t symbol_length() const { return n_sub + cp_length(); }
  std::size_t n_data() const { return data_indices.size(); }
  std::size_t n_used() const { return data_indices.size() + pilot_indices.size(); }
  /// Effective guard fraction N_cp / N_u after rounding.
  double guard_ratio() const {
    return static_cast<double>(cp_length()) / static_cast<double>(n_sub);
  }
  int bits_per_subcarrier() const { return std::countr_zero(static_cast<unsigned>(mod_order)); }
  std::size_t bits_per_symbol() const {
    return n_data() * static_cast<std::size_t>(bits_per_subcarrier());
  }
  std::size_t bits_per_frame() const { return bits_per_symbol() * symbols_per_frame; }

  /// Value transmitted on pilot bin `k`; throws if `k` is not a pilot.
  cplx pilot_value(std::size_t k) const {
    for (std::size_t i = 0; i < pilot_indices.size(); ++i)
      if (pilot_indices[i] == k) return pilot_values[i];
    throw std::invalid_argument("bin " + std::to_string(k) + " is not a pilot");
  }

  void validate() const;

  /// 802.11a-style layout scaled to n_sub: 52/64 of the band used around a
  /// nulled DC, four pilot tones. The clustered variant keeps four pilot
  /// tones but arranges them as two adjacent antipodal pairs.
  static FrameConfig wlan(std::size_t n_sub = 64, int mod_order = 4,
                          std::size_t symbols = 1, double cp_fraction = 0.25,
                          PilotScheme scheme = PilotScheme::conventional);
};

inline bool is_supported_mod_order(int m) { return m == 2 || m == 4 || m == 16 || m == 64; }

inline void FrameConfig::validate() const {
  if (n_sub == 0) throw std::invalid_argument("n_sub must be positive");
  if (!(cp_fraction >= 0.0 && cp_fraction < 1.0))
    throw std::invalid_argument("cp_fraction must lie in [0, 1)");
  if (!is_supported_mod_order(mod_order))
    throw std::invalid_argument("unsupported modulation order " + std::to_string(mod_order));
  if (symbols_per_frame == 0) throw std::invalid_argument("symbols_per_frame must be positive");
  if (pilot_indices.size() != pilot_values.size())
    throw std::invalid_argument("pilot_indices and pilot_values differ in length");
  std::vector<bool> seen(n_sub, false);
  auto claim = [&](std::size_t k, const char* what) {
    if (k >= n_sub) throw std::invalid_argument(std::string(what) + " index out of range");
    if (k == 0) throw std::invalid_argument(std::string(what) + " index on the DC bin");
    if (seen[k]) throw std::invalid_argument("subcarrier " + std::to_string(k) + " allocated twice");
    seen[k] = true;
  };
  for (auto k : pilot_indices) claim(k, "pilot");
  for (auto k : data_indices) claim(k, "data");
  if (data_indices.size() > n_sub) throw std::invalid_argument("too many data subcarriers");
  for (auto g : pilot_groups) {
    if (std::find(pilot_indices.begin(), pilot_indices.end(), g) == pilot_indices.end())
      throw std::invalid_argument("pilot group does not start on a pilot");
    if (pilot_scheme == PilotScheme::clustered) {
      std::size_t right = (g + 1) % n_sub;
      if (std::find(pilot_indices.begin(), pilot_indices.end(), right) == pilot_indices.end())
        throw std::invalid_argument("clustered pilot pair is not adjacent");
      if (std::abs(pilot_value(g) + pilot_value(right)) > 1e-12)
        throw std::invalid_argument("clustered pilot pair is not antipodal");
    }
  }
}

inline FrameConfig FrameConfig::wlan(std::size_t n_sub, int mod_order, std::size_t symbols,
                                     double cp_fraction, PilotScheme scheme) {
  FrameConfig cfg;
  cfg.n_sub = n_sub;
  cfg.mod_order = mod_order;
  cfg.symbols_per_frame = symbols;
  cfg.cp_fraction = cp_fraction;
  cfg.pilot_scheme = scheme;

  const double scale = static_cast<double>(n_sub) / 64.0;
  const auto half_used = static_cast<long>(std::llround(26.0 * scale));
  const auto p_inner = static_cast<long>(std::llround(7.0 * scale));
  const auto p_outer = static_cast<long>(std::llround(21.0 * scale));
  auto bin = [n_sub](long logical) {
    const auto n = static_cast<long>(n_sub);
    return static_cast<std::size_t>(((logical % n) + n) % n);
  };

  std::vector<long> pilots_logical;
  if (scheme == PilotScheme::conventional) {
    pilots_logical = {-p_outer, -p_inner, p_inner, p_outer};
    for (long l : pilots_logical) {
      cfg.pilot_indices.push_back(bin(l));
      cfg.pilot_values.emplace_back(1.0, 0.0);
    }
    cfg.pilot_groups = cfg.pilot_indices;
  } else {
    // Pairs (-p_outer, -p_outer+1) and (p_outer-1, p_outer).
    pilots_logical = {-p_outer, -p_outer + 1, p_outer - 1, p_outer};
    for (std::size_t i = 0; i < pilots_logical.size(); ++i) {
      cfg.pilot_indices.push_back(bin(pilots_logical[i]));
      cfg.pilot_values.emplace_back(i % 2 == 0 ? 1.0 : -1.0, 0.0);
    }
    cfg.pilot_groups = {bin(-p_outer), bin(p_outer - 1)};
  }
  for (long l = -half_used; l <= half_used; ++l) {
    if (l == 0) continue;
    if (std::find(pilots_logical.begin(), pilots_logical.end(), l) != pilots_logical.end()) continue;
    cfg.data_indices.push_back(bin(l));
  }
  std::sort(cfg.data_indices.begin(), cfg.data_indices.end());
  return cfg;
}

// ---------------------------------------------------------------------------
// Constellations

namespace detail {

inline unsigned gray_to_binary(unsigned g) {
  unsigned b = g;
  for (unsigned s = g >> 1; s != 0; s >>= 1) b ^= s;
  return b;
}

inline unsigned binary_to_gray(unsigned b) { return b ^ (b >> 1); }

struct Pam {
  unsigned levels;      // per axis
  unsigned bits;        // per axis
  double scale;         // amplitude of the unit lattice step
};

inline Pam axis_for(int mod_order) {
  switch (mod_order) {
    case 2: return {2, 1, 1.0};
    case 4: return {2, 1, 1.0 / std::sqrt(2.0)};
    case 16: return {4, 2, 1.0 / std::sqrt(10.0)};
    case 64: return {8, 3, 1.0 / std::sqrt(42.0)};
    default:
      throw std::invalid_argument("unsupported modulation order " + std::to_string(mod_order));
  }
}

inline double pam_level(const Pam& p, unsigned word) {
  const unsigned idx = gray_to_binary(word);
  return (static_cast<double>(p.levels - 1) - 2.0 * static_cast<double>(idx)) * p.scale;
}

inline unsigned pam_slice(const Pam& p, double x) {
  const double pos = (static_cast<double>(p.levels - 1) - x / p.scale) / 2.0;
  const long idx = std::clamp<long>(std::lround(pos), 0, static_cast<long>(p.levels) - 1);
  return binary_to_gray(static_cast<unsigned>(idx));
}

}  // namespace detail

/// Gray-mapped BPSK/QPSK/16QAM/64QAM with unit average symbol energy.
/// Bits are consumed MSB first; for QAM the first half of each word drives
/// the in-phase axis.
inline cvec map_bits(std::span<const std::uint8_t> bits, int mod_order) {
  const auto axis = detail::axis_for(mod_order);
  const std::size_t k = static_cast<std::size_t>(std::countr_zero(static_cast<unsigned>(mod_order)));
  if (bits.size() % k != 0)
    throw std::invalid_argument("bit count not divisible by bits per symbol");
  cvec out;
  out.reserve(bits.size() / k);
  auto word = [&](std::size_t pos, unsigned n) {
    unsigned w = 0;
    for (unsigned i = 0; i < n; ++i) w = (w << 1) | (bits[pos + i] & 1u);
    return w;
  };
  for (std::size_t i = 0; i < bits.size(); i += k) {
    if (mod_order == 2) {
      out.emplace_back(detail::pam_level(axis, word(i, 1)), 0.0);
    } else {
      out.emplace_back(detail::pam_level(axis, word(i, axis.bits)),
                       detail::pam_level(axis, word(i + axis.bits, axis.bits)));
    }
  }
  return out;
}

/// Hard-decision minimum-distance demapper, inverse of map_bits.
inline bitvec demap_symbols(std::span<const cplx> rx, int mod_order) {
  const auto axis = detail::axis_for(mod_order);
  bitvec out;
  auto push = [&](unsigned w, unsigned n) {
    for (unsigned i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>((w >> (n - 1 - i)) & 1u));
  };
  for (const auto& y : rx) {
    if (mod_order == 2) {
      push(detail::pam_slice(axis, y.real()), 1);
    } else {
      push(detail::pam_slice(axis, y.real()), axis.bits);
      push(detail::pam_slice(axis, y.imag()), axis.bits);
    }
  }
  return out;
}

/// Nearest constellation point (the slicer output used by decision-directed loops).
inline cplx slice(cplx y, int mod_order) {
  const bitvec b = demap_symbols(std::span<const cplx>(&y, 1), mod_order);
  return map_bits(b, mod_order).front();
}

// ---------------------------------------------------------------------------
// Transforms. The IDFT carries 1/N, the forward DFT carries no scaling.

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2; sign = -1 forward, +1 inverse. No scaling.
inline void fft_radix2(cvec& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * kTwoPi / static_cast<double>(len);
    for (std::size_t j = 0; j < len / 2; ++j) {
      const cplx w = std::polar(1.0, ang * static_cast<double>(j));
      for (std::size_t i = 0; i < n; i += len) {
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

inline cvec dft_direct(std::span<const cplx> x, int sign) {
  const std::size_t n = x.size();
  cvec out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{};
    for (std::size_t m = 0; m < n; ++m) {
      const double ang = sign * kTwoPi * static_cast<double>((k * m) % n) / static_cast<double>(n);
      acc += x[m] * std::polar(1.0, ang);
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace detail

/// Y_k = sum_n y_n e^{-j 2 pi n k / N}.
inline cvec dft(std::span<const cplx> time_row) {
  if (time_row.empty()) throw std::invalid_argument("dft of empty vector");
  if (!detail::is_pow2(time_row.size())) return detail::dft_direct(time_row, -1);
  cvec a(time_row.begin(), time_row.end());
  detail::fft_radix2(a, -1);
  return a;
}

/// z_n = (1/N) sum_m Z_m e^{+j 2 pi n m / N}.
inline cvec idft(std::span<const cplx> grid_row) {
  if (grid_row.empty()) throw std::invalid_argument("idft of empty vector");
  cvec a;
  if (detail::is_pow2(grid_row.size())) {
    a.assign(grid_row.begin(), grid_row.end());
    detail::fft_radix2(a, +1);
  } else {
    a = detail::dft_direct(grid_row, +1);
  }
  const double inv = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= inv;
  return a;
}

inline cvec add_cp(std::span<const cplx> symbol, std::size_t cp_length) {
  if (cp_length > symbol.size()) throw std::invalid_argument("cp_length exceeds symbol length");
  cvec out;
  out.reserve(symbol.size() + cp_length);
  out.insert(out.end(), symbol.end() - static_cast<std::ptrdiff_t>(cp_length), symbol.end());
  out.insert(out.end(), symbol.begin(), symbol.end());
  return out;
}

inline cvec remove_cp(std::span<const cplx> symbol, std::size_t n_sub, std::size_t cp_length) {
  if (symbol.size() != n_sub + cp_length)
    throw std::invalid_argument("symbol length does not match n_sub + cp_length");
  return cvec(symbol.begin() + static_cast<std::ptrdiff_t>(cp_length), symbol.end());
}

// ---------------------------------------------------------------------------
// Frames

struct FreqGrid {
  std::size_t n_sub = 0;
  std::vector<cvec> symbols;  // L rows of n_sub subcarrier values
};

struct Frame {
  FreqGrid grid;
  cvec samples;        // L * N_sym samples, CP included
  bitvec payload;
};

/// Places Gray-mapped payload on the data bins and pilots on the pilot bins
/// of every symbol, then IDFT + CP per symbol.
inline Frame build_frame(const FrameConfig& cfg, bitvec payload) {
  cfg.validate();
  if (payload.size() != cfg.bits_per_frame())
    throw std::invalid_argument("payload holds " + std::to_string(payload.size()) +
                                " bits, frame needs " + std::to_string(cfg.bits_per_frame()));
  Frame f;
  f.grid.n_sub = cfg.n_sub;
  f.grid.symbols.reserve(cfg.symbols_per_frame);
  f.samples.reserve(cfg.symbols_per_frame * cfg.symbol_length());
  const cvec points = map_bits(payload, cfg.mod_order);
  const std::size_t per_sym = cfg.n_data();
  for (std::size_t l = 0; l < cfg.symbols_per_frame; ++l) {
    cvec row(cfg.n_sub, cplx{});
    for (std::size_t i = 0; i < per_sym; ++i) row[cfg.data_indices[i]] = points[l * per_sym + i];
    for (std::size_t i = 0; i < cfg.pilot_indices.size(); ++i) row[cfg.pilot_indices[i]] = cfg.pilot_values[i];
    const cvec sym = add_cp(idft(row), cfg.cp_length());
    f.samples.insert(f.samples.end(), sym.begin(), sym.end());
    f.grid.symbols.push_back(std::move(row));
  }
  f.payload = std::move(payload);
  return f;
}

/// Peak-to-average power ratio (linear).
inline double papr(std::span<const cplx> stream) {
  if (stream.empty()) throw std::invalid_argument("papr of empty stream");
  double peak = 0.0, sum = 0.0;
  for (const auto& z : stream) {
    const double p = std::norm(z);
    peak = std::max(peak, p);
    sum += p;
  }
  const double mean = sum / static_cast<double>(stream.size());
  if (mean == 0.0) throw std::invalid_argument("papr of all-zero stream");
  return peak / mean;
}

/// Symbol `l` of a CP'd stream with the prefix removed.
inline cvec strip_symbol(std::span<const cplx> stream, const FrameConfig& cfg, std::size_t l) {
  const std::size_t ns = cfg.symbol_length();
  if ((l + 1) * ns > stream.size()) throw std::out_of_range("symbol index past end of stream");
  return cvec(stream.begin() + static_cast<std::ptrdiff_t>(l * ns + cfg.cp_length()),
              stream.begin() + static_cast<std::ptrdiff_t>((l + 1) * ns));
}

}  // namespace ofdmsync
