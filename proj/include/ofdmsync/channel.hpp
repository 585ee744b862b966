#pragma once

// Propagation and impairment models: AWGN, block Rayleigh multipath, carrier
// frequency offset, one-tap equalization, and the analytic ICI quantities.

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "core.hpp"
#include "rng.hpp"

namespace ofdmsync {

enum class DelayProfile { exponential, uniform };

inline std::string to_string(DelayProfile p) {
  return p == DelayProfile::exponential ? "exponential" : "uniform";
}

/// Static tapped delay line with sample-spaced taps, unit total power.
struct ChannelRealization {
  cvec taps{cplx{1.0, 0.0}};
  double delay_spread = 0.0;  // seconds

  std::size_t length() const { return taps.size(); }
  /// Frequency response sampled at the n_sub bin frequencies. Taps beyond
  /// n_sub fold onto p mod n_sub, which samples the same transfer function.
  cvec frequency_response(std::size_t n_sub) const {
    cvec folded(n_sub, cplx{});
    for (std::size_t p = 0; p < taps.size(); ++p) folded[p % n_sub] += taps[p];
    return dft(folded);
  }
};

/// Normalized CFO split as epsilon = integer + fractional, fractional in [-0.5, 0.5).
struct CfoSpec {
  double epsilon = 0.0;
  double integer_part() const { return epsilon - fractional_part(); }
  double fractional_part() const { return wrap_half(epsilon); }
};

class SingularChannel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Noise

/// Adds circular complex Gaussian noise of total variance noise_var.
inline void add_awgn(std::span<cplx> stream, double noise_var, Rng& rng) {
  if (noise_var < 0.0) throw std::invalid_argument("negative noise variance");
  if (noise_var == 0.0) return;
  std::normal_distribution<double> g(0.0, 1.0);
  const double s = std::sqrt(noise_var / 2.0);
  for (auto& z : stream) {
    const double re = g(rng);
    const double im = g(rng);
    z += cplx(re * s, im * s);
  }
}

inline cvec awgn(cvec stream, double noise_var, Rng& rng) {
  add_awgn(stream, noise_var, rng);
  return stream;
}

/// Noise variance per unit of mean sample power for the requested Eb/N0.
/// Includes the guard-interval energy penalty.
inline double ebn0_to_noise_var(double ebn0_db, const FrameConfig& cfg) {
  const double ebn0 = std::pow(10.0, ebn0_db / 10.0);
  const double k = static_cast<double>(cfg.bits_per_subcarrier());
  const double n = static_cast<double>(cfg.n_sub);
  const double ncp = static_cast<double>(cfg.cp_length());
  return 1.0 / (ebn0 * k * n / (n + ncp));
}

/// Mean per-sample power of a build_frame() stream: N_used unit-power bins
/// through the 1/N IDFT give N_used / N^2.
inline double mean_sample_power(const FrameConfig& cfg) {
  const double n = static_cast<double>(cfg.n_sub);
  return static_cast<double>(cfg.n_used()) / (n * n);
}

/// Absolute noise variance to add to a build_frame() stream. Each used bin
/// sees Es/N0 = ebn0 k N / (N_used (1 + G)).
inline double sample_noise_var(double ebn0_db, const FrameConfig& cfg) {
  return ebn0_to_noise_var(ebn0_db, cfg) * mean_sample_power(cfg);
}

// ---------------------------------------------------------------------------
// Multipath

inline std::size_t tap_count(double tau_max, double t_sample) {
  if (tau_max < 0.0) throw std::invalid_argument("negative delay spread");
  if (t_sample <= 0.0) throw std::invalid_argument("sample period must be positive");
  return static_cast<std::size_t>(std::llround(tau_max / t_sample)) + 1;
}

/// Power-delay profile, normalized to unit sum. Exponential decay uses an
/// RMS spread of tau_max / 4.
inline std::vector<double> power_delay_profile(double tau_max, double t_sample, DelayProfile profile) {
  const std::size_t n = tap_count(tau_max, t_sample);
  std::vector<double> p(n, 1.0);
  if (profile == DelayProfile::exponential && n > 1) {
    const double rms = tau_max / 4.0;
    for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(-static_cast<double>(i) * t_sample / rms);
  }
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  return p;
}

/// Independent complex Gaussian taps following the profile, before power
/// normalization.
inline cvec rayleigh_raw_taps(double tau_max, double t_sample, DelayProfile profile, Rng& rng) {
  const auto pdp = power_delay_profile(tau_max, t_sample, profile);
  std::normal_distribution<double> g(0.0, 1.0);
  cvec taps(pdp.size());
  for (std::size_t i = 0; i < pdp.size(); ++i) {
    const double s = std::sqrt(pdp[i] / 2.0);
    const double re = g(rng);
    const double im = g(rng);
    taps[i] = cplx(re * s, im * s);
  }
  return taps;
}

inline ChannelRealization rayleigh_realize(double tau_max, double t_sample, DelayProfile profile, Rng& rng) {
  ChannelRealization ch;
  ch.taps = rayleigh_raw_taps(tau_max, t_sample, profile, rng);
  ch.delay_spread = tau_max;
  double e = 0.0;
  for (const auto& h : ch.taps) e += std::norm(h);
  if (e == 0.0) {
    ch.taps.assign(ch.taps.size(), cplx{});
    ch.taps[0] = 1.0;
    return ch;
  }
  const double s = 1.0 / std::sqrt(e);
  for (auto& h : ch.taps) h *= s;
  return ch;
}

/// Linear convolution truncated to the input length.
inline cvec apply_channel(std::span<const cplx> stream, const ChannelRealization& ch) {
  const auto& h = ch.taps;
  cvec out(stream.size(), cplx{});
  for (std::size_t n = 0; n < stream.size(); ++n) {
    cplx acc{};
    const std::size_t pmax = std::min(h.size(), n + 1);
    for (std::size_t p = 0; p < pmax; ++p) acc += h[p] * stream[n - p];
    out[n] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Carrier frequency offset

/// y_n = z_n e^{j 2 pi (n0 + n) epsilon / N}.
inline cvec apply_cfo(std::span<const cplx> stream, double epsilon, std::size_t n_sub, std::size_t n0 = 0) {
  cvec out(stream.size());
  const double w = kTwoPi * epsilon / static_cast<double>(n_sub);
  for (std::size_t n = 0; n < stream.size(); ++n)
    out[n] = stream[n] * std::polar(1.0, w * static_cast<double>(n0 + n));
  return out;
}

// ---------------------------------------------------------------------------
// Equalization

/// Divides each listed bin by the channel response (perfect CSI).
inline cvec equalize(std::span<const cplx> row, std::span<const cplx> response,
                     std::span<const std::size_t> used_bins) {
  if (row.size() != response.size()) throw std::invalid_argument("row/response size mismatch");
  cvec out(row.begin(), row.end());
  for (auto k : used_bins) {
    if (std::abs(response[k]) < 1e-12)
      throw SingularChannel("channel response vanishes on used bin " + std::to_string(k));
    out[k] = row[k] / response[k];
  }
  return out;
}

inline FreqGrid equalize(const FreqGrid& grid, const ChannelRealization& ch,
                         std::span<const std::size_t> used_bins) {
  const cvec H = ch.frequency_response(grid.n_sub);
  FreqGrid out{grid.n_sub, {}};
  out.symbols.reserve(grid.symbols.size());
  for (const auto& row : grid.symbols) out.symbols.push_back(equalize(row, H, used_bins));
  return out;
}

// ---------------------------------------------------------------------------
// Analytic ICI quantities

/// Leakage coefficient from subcarrier m into bin k for a fractional offset
/// eps_f, with d = m - k:
///   Lambda_d = sin(pi eps) e^{-j pi d / N} / (N sin(pi (d + eps) / N)) * e^{j pi eps (N-1)/N}.
inline cplx ici_coefficient(long d, double eps_f, std::size_t n_sub) {
  const double n = static_cast<double>(n_sub);
  const long nn = static_cast<long>(n_sub);
  const long dm = ((d % nn) + nn) % nn;
  if (eps_f == 0.0) return dm == 0 ? cplx{1.0, 0.0} : cplx{};
  const double den = n * std::sin(kPi * (static_cast<double>(d) + eps_f) / n);
  if (std::abs(den) < 1e-300) return std::polar(1.0, kPi * eps_f * (n - 1.0) / n);
  const double mag = std::sin(kPi * eps_f) / den;
  return mag * std::polar(1.0, -kPi * static_cast<double>(d) / n + kPi * eps_f * (n - 1.0) / n);
}

/// SNR degradation factor caused by a CFO, in dB.
inline double snr_loss_cfo(double epsilon, double es_n0, std::size_t n_sub) {
  if (es_n0 < 0.0) throw std::invalid_argument("negative Es/N0");
  const double l0 = std::norm(ici_coefficient(0, epsilon, n_sub));
  const double gamma = (1.0 + es_n0 * (1.0 - l0)) / l0;
  return 10.0 * std::log10(gamma);
}

/// Energy penalty of a guard interval of fraction g, in dB.
inline double snr_loss_cp(double g) {
  if (!(g >= 0.0 && g < 1.0)) throw std::invalid_argument("guard fraction must lie in [0, 1)");
  return 10.0 * std::log10(1.0 + g);
}

}  // namespace ofdmsync
