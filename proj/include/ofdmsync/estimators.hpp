#pragma once

// Carrier frequency offset estimators: blind cyclic-prefix correlation,
// preamble based (Moose, Schmidl & Cox, Morelli & Mengali), Classen's pilot
// method, and the conventional / clustered pilot conjugate-product family.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "channel.hpp"
#include "core.hpp"
#include "rng.hpp"

namespace ofdmsync {

enum class EstimateKind { fractional, integer, total };

struct CfoEstimate {
  double epsilon_hat = 0.0;
  EstimateKind kind = EstimateKind::fractional;
  std::size_t n_symbols_used = 0;
};

/// Pilot groups used for estimation. Conventional: isolated tones. Clustered:
/// adjacent antipodal pairs (k, k+1), `groups` holds k.
struct PilotLayout {
  PilotScheme scheme = PilotScheme::conventional;
  std::vector<std::size_t> groups;
  cvec values;  // value on tone k of each group; the right tone carries -value

  static PilotLayout from(const FrameConfig& cfg, std::size_t max_groups = 0) {
    PilotLayout p;
    p.scheme = cfg.pilot_scheme;
    const std::size_t n = max_groups == 0 ? cfg.pilot_groups.size()
                                          : std::min(max_groups, cfg.pilot_groups.size());
    for (std::size_t i = 0; i < n; ++i) {
      p.groups.push_back(cfg.pilot_groups[i]);
      p.values.push_back(cfg.pilot_value(cfg.pilot_groups[i]));
    }
    return p;
  }

  /// Every bin touched by the layout.
  std::vector<std::size_t> tones(std::size_t n_sub) const {
    std::vector<std::size_t> t;
    for (auto g : groups) {
      t.push_back(g);
      if (scheme == PilotScheme::clustered) t.push_back((g + 1) % n_sub);
    }
    return t;
  }
};

// ---------------------------------------------------------------------------
// Blind: cyclic prefix

namespace detail {

inline std::size_t full_symbols(std::span<const cplx> rx, const FrameConfig& cfg) {
  return rx.size() / cfg.symbol_length();
}

}  // namespace detail

/// Averages the CP / symbol-tail correlation over every complete symbol.
inline CfoEstimate cp_estimate(std::span<const cplx> rx, const FrameConfig& cfg) {
  const std::size_t nsym = detail::full_symbols(rx, cfg);
  if (nsym == 0) throw std::invalid_argument("stream shorter than one OFDM symbol");
  if (cfg.cp_length() == 0) throw std::invalid_argument("cp_estimate needs a cyclic prefix");
  const std::size_t ns = cfg.symbol_length();
  cplx acc{};
  for (std::size_t l = 0; l < nsym; ++l)
    for (std::size_t n = 0; n < cfg.cp_length(); ++n)
      acc += std::conj(rx[l * ns + n]) * rx[l * ns + n + cfg.n_sub];
  return {wrap_half(std::arg(acc) / kTwoPi), EstimateKind::fractional, nsym};
}

/// Imaginary-part discriminator over the first l_av CP samples of the stream.
inline double cp_error_increment(std::span<const cplx> rx, const FrameConfig& cfg, std::size_t l_av) {
  if (l_av == 0) throw std::invalid_argument("l_av must be at least 1");
  const std::size_t ncp = cfg.cp_length();
  const std::size_t nsym = detail::full_symbols(rx, cfg);
  if (ncp == 0 || nsym * ncp < l_av) throw std::invalid_argument("not enough CP samples for l_av");
  double acc = 0.0;
  for (std::size_t i = 0; i < l_av; ++i) {
    const std::size_t n = (i / ncp) * cfg.symbol_length() + i % ncp;
    acc += (std::conj(rx[n]) * rx[n + cfg.n_sub]).imag();
  }
  return acc / static_cast<double>(l_av);
}

// ---------------------------------------------------------------------------
// Moose: two identical symbols back to back

inline CfoEstimate moose_estimate(std::span<const cplx> rx, std::size_t n_sub) {
  if (rx.size() != 2 * n_sub) throw std::invalid_argument("moose needs exactly two N-sample blocks");
  const cvec y1 = dft(rx.first(n_sub));
  const cvec y2 = dft(rx.subspan(n_sub, n_sub));
  double im = 0.0, re = 0.0;
  for (std::size_t k = 0; k < n_sub; ++k) {
    const cplx p = y2[k] * std::conj(y1[k]);
    im += p.imag();
    re += p.real();
  }
  return {wrap_half(std::atan2(im, re) / kTwoPi), EstimateKind::fractional, 2};
}

/// Random unit-energy QPSK on the used bins of one symbol (repeated by the caller).
inline cvec make_moose_training(const FrameConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<int> q(0, 3);
  cvec row(cfg.n_sub, cplx{});
  auto put = [&](std::size_t k) { row[k] = std::polar(1.0, kPi / 4 + kPi / 2 * q(rng)); };
  for (auto k : cfg.data_indices) put(k);
  for (auto k : cfg.pilot_indices) put(k);
  return row;
}

// ---------------------------------------------------------------------------
// Schmidl & Cox

struct SchmidlCoxTraining {
  cvec first;    // PN on even bins (scaled by sqrt 2), zeros on odd bins
  cvec second;   // PN1 on even bins, PN2 on odd bins
  cvec v;        // second[k] / (first[k] / sqrt 2) on even bins, zero elsewhere
};

/// PN sequences drawn as unit-magnitude QPSK from `rng`. All nonzero even bins
/// carry the first-symbol PN.
inline SchmidlCoxTraining make_schmidl_cox_training(std::size_t n_sub, Rng& rng) {
  if (n_sub < 4 || n_sub % 2 != 0) throw std::invalid_argument("n_sub must be even and >= 4");
  std::uniform_int_distribution<int> q(0, 3);
  auto pn = [&] { return std::polar(1.0, kPi / 4 + kPi / 2 * q(rng)); };
  SchmidlCoxTraining t{cvec(n_sub), cvec(n_sub), cvec(n_sub)};
  for (std::size_t k = 1; k < n_sub; ++k) {
    if (k % 2 == 0) {
      const cplx c1 = pn();
      const cplx c2 = pn();
      t.first[k] = std::sqrt(2.0) * c1;
      t.second[k] = c2;
      t.v[k] = c2 / c1;
    } else {
      t.second[k] = pn();
    }
  }
  return t;
}

struct SchmidlCoxFine {
  double phi_hat = 0.0;  // radians
  CfoEstimate estimate;  // phi_hat / pi, in [-1, 1)
};

/// Half-symbol correlation of the first training symbol (CP removed).
inline SchmidlCoxFine schmidl_cox_ffo(std::span<const cplx> rx, std::size_t n_sub) {
  if (rx.size() != n_sub || n_sub % 2 != 0)
    throw std::invalid_argument("schmidl_cox_ffo needs one even-length training symbol");
  const std::size_t h = n_sub / 2;
  cplx p{};
  for (std::size_t n = 0; n < h; ++n) p += std::conj(rx[n]) * rx[n + h];
  const double phi = wrap_phase(std::arg(p));
  return {phi, {phi / kPi, EstimateKind::fractional, 1}};
}

/// Normalized integer-search metric B(g) for an even-bin shift of 2g.
inline double schmidl_cox_metric(std::span<const cplx> f1, std::span<const cplx> f2,
                                 std::span<const cplx> v, long g) {
  const std::size_t n = f1.size();
  if (f2.size() != n || v.size() != n) throw std::invalid_argument("schmidl_cox_metric size mismatch");
  const long nn = static_cast<long>(n);
  cplx num{};
  double den = 0.0;
  for (std::size_t k = 2; k < n; k += 2) {
    const auto ks = static_cast<std::size_t>((((static_cast<long>(k) + 2 * g) % nn) + nn) % nn);
    num += std::conj(f1[ks]) * std::conj(v[k]) * f2[ks];
    den += std::norm(f2[ks]);
  }
  if (den == 0.0) return 0.0;
  return std::norm(num) / (2.0 * den * den);
}

struct SchmidlCoxInteger {
  double epsilon_i = 0.0;  // 2 * g_hat
  long g_hat = 0;
  double metric = 0.0;
};

/// Integer stage on the FFTs of both training symbols after fractional correction.
inline SchmidlCoxInteger schmidl_cox_ifo(std::span<const cplx> f1, std::span<const cplx> f2,
                                         std::span<const cplx> v, std::span<const long> candidates) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate set");
  SchmidlCoxInteger best{0.0, candidates.front(), -1.0};
  for (long g : candidates) {
    const double b = schmidl_cox_metric(f1, f2, v, g);
    if (b > best.metric) best = {2.0 * static_cast<double>(g), g, b};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Morelli & Mengali: one symbol of Q identical parts

/// PN on bins that are multiples of Q (DC excluded).
inline cvec make_mm_training(std::size_t n_sub, std::size_t q_parts, Rng& rng) {
  if (q_parts == 0 || n_sub % q_parts != 0) throw std::invalid_argument("n_sub must be divisible by Q");
  std::uniform_int_distribution<int> q(0, 3);
  cvec row(n_sub, cplx{});
  for (std::size_t k = q_parts; k < n_sub; k += q_parts)
    row[k] = std::sqrt(static_cast<double>(q_parts)) * std::polar(1.0, kPi / 4 + kPi / 2 * q(rng));
  return row;
}

/// BLUE weights w(q), q = 1..P. They do not depend on the channel and sum to one.
inline std::vector<double> mm_weights(std::size_t q_parts, std::size_t p_design) {
  if (p_design < 1 || p_design + 1 > q_parts) throw std::invalid_argument("P must lie in [1, Q-1]");
  const double Q = static_cast<double>(q_parts);
  const double P = static_cast<double>(p_design);
  const double den = P * (4 * P * P - 6 * Q * P + 3 * Q * Q - 1);
  std::vector<double> w;
  for (std::size_t i = 1; i <= p_design; ++i) {
    const double q = static_cast<double>(i);
    w.push_back(3.0 * ((Q - q) * (Q - q + 1) - P * (Q - P)) / den);
  }
  return w;
}

inline CfoEstimate morelli_mengali(std::span<const cplx> rx, std::size_t q_parts, std::size_t p_design) {
  const std::size_t n = rx.size();
  if (q_parts == 0 || n % q_parts != 0) throw std::invalid_argument("N must be divisible by Q");
  const auto w = mm_weights(q_parts, p_design);
  const std::size_t m = n / q_parts;
  std::vector<double> arg_psi(p_design + 1);
  for (std::size_t q = 0; q <= p_design; ++q) {
    cplx psi{};
    for (std::size_t i = q * m; i < n; ++i) psi += rx[i] * std::conj(rx[i - q * m]);
    psi /= static_cast<double>(n - q * m);
    arg_psi[q] = std::arg(psi);
  }
  double acc = 0.0;
  for (std::size_t q = 1; q <= p_design; ++q) acc += w[q - 1] * wrap_phase(arg_psi[q] - arg_psi[q - 1]);
  return {static_cast<double>(q_parts) / kTwoPi * acc, EstimateKind::total, 1};
}

// ---------------------------------------------------------------------------
// Classen: pilot phase drift across D symbols

namespace detail {

inline cplx classen_sum(std::span<const cplx> y_l, std::span<const cplx> y_ld,
                        std::span<const std::size_t> pilots, std::span<const cplx> z_l,
                        std::span<const cplx> z_ld) {
  cplx acc{};
  for (std::size_t j = 0; j < pilots.size(); ++j) {
    const auto p = pilots[j];
    acc += y_ld[p] * std::conj(y_l[p]) * std::conj(z_ld[j]) * z_l[j];
  }
  return acc;
}

}  // namespace detail

/// Fine offset from pilots of symbols l and l+D; normalized per symbol spacing
/// (1+G) N samples.
inline CfoEstimate classen_fine(std::span<const cplx> y_l, std::span<const cplx> y_ld,
                                std::span<const std::size_t> pilots, std::span<const cplx> z_l,
                                std::span<const cplx> z_ld, std::size_t d, double guard_ratio) {
  if (pilots.empty()) throw std::invalid_argument("empty pilot layout");
  if (d == 0) throw std::invalid_argument("D must be at least 1");
  const cplx s = detail::classen_sum(y_l, y_ld, pilots, z_l, z_ld);
  const double eps = std::arg(s) / (kTwoPi * static_cast<double>(d) * (1.0 + guard_ratio));
  return {eps, EstimateKind::fractional, 2};
}

struct ClassenCoarse {
  double epsilon_hat = 0.0;
  double metric = 0.0;
  double runner_up = 0.0;
};

/// Trial-and-error search: derotate by each trial offset, FFT symbols l and
/// l+D, keep the trial maximizing the magnitude of the known-tone correlation.
/// Reliable only with many known tones that differ between the two symbols.
inline ClassenCoarse classen_coarse(std::span<const cplx> rx, const FrameConfig& cfg, std::size_t l,
                                    std::size_t d, std::span<const std::size_t> tones,
                                    std::span<const cplx> z_l, std::span<const cplx> z_ld,
                                    double trial_step, double trial_range) {
  if (trial_step <= 0.0 || trial_range < 0.0) throw std::invalid_argument("bad trial grid");
  if (tones.empty() || z_l.size() != tones.size() || z_ld.size() != tones.size())
    throw std::invalid_argument("known tones and values differ in length");
  const std::size_t ns = cfg.symbol_length();
  if ((l + d + 1) * ns > rx.size()) throw std::invalid_argument("stream too short for l + D");
  const auto steps = static_cast<long>(std::floor(trial_range / trial_step + 1e-9));
  ClassenCoarse best{0.0, -1.0, -1.0};
  for (long i = -steps; i <= steps; ++i) {
    const double trial = static_cast<double>(i) * trial_step;
    auto fft_of = [&](std::size_t sym) {
      const std::size_t start = sym * ns + cfg.cp_length();
      return dft(apply_cfo(rx.subspan(start, cfg.n_sub), -trial, cfg.n_sub, start));
    };
    const double m = std::abs(detail::classen_sum(fft_of(l), fft_of(l + d), tones, z_l, z_ld));
    if (m > best.metric) {
      best.runner_up = best.metric;
      best.metric = m;
      best.epsilon_hat = trial;
    } else if (m > best.runner_up) {
      best.runner_up = m;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Pilot conjugate-product estimators

struct PhaseEstimate {
  double phi_hat = 0.0;  // radians per symbol
  CfoEstimate estimate;  // phi_hat / (2 pi (1 + G))
};

namespace detail {

inline cplx conj_product_sum(std::span<const cplx> series) {
  cplx acc{};
  for (std::size_t l = 1; l < series.size(); ++l) acc += std::conj(series[l - 1]) * series[l];
  return acc;
}

inline PhaseEstimate phase_from(cplx acc, double guard_ratio, std::size_t n_symbols) {
  const double phi = std::arg(acc);
  return {phi, {phi / (kTwoPi * (1.0 + guard_ratio)), EstimateKind::fractional, n_symbols}};
}

}  // namespace detail

/// Conjugate-product estimate from one tone's per-symbol values Y_{k,0..L}.
inline PhaseEstimate pilot_conj_estimate(std::span<const cplx> series, double guard_ratio) {
  if (series.size() < 2) throw std::invalid_argument("need at least two symbols");
  return detail::phase_from(detail::conj_product_sum(series), guard_ratio, series.size());
}

/// Several tones: conjugate products summed across tones before the angle.
inline PhaseEstimate pilot_conj_estimate(const std::vector<cvec>& per_tone, double guard_ratio) {
  if (per_tone.empty()) throw std::invalid_argument("no pilot tones");
  cplx acc{};
  for (const auto& s : per_tone) {
    if (s.size() < 2) throw std::invalid_argument("need at least two symbols");
    acc += detail::conj_product_sum(s);
  }
  return detail::phase_from(acc, guard_ratio, per_tone.front().size());
}

/// R = Y_k - Y_{k+1} for every cluster of the layout.
inline cvec clustered_combine(std::span<const cplx> row, const PilotLayout& layout) {
  if (layout.scheme != PilotScheme::clustered) throw std::invalid_argument("layout is not clustered");
  cvec r;
  r.reserve(layout.groups.size());
  for (auto k : layout.groups) r.push_back(row[k] - row[(k + 1) % row.size()]);
  return r;
}

/// Same conjugate-product form applied to the combined cluster values.
inline PhaseEstimate clustered_estimate(const std::vector<cvec>& per_cluster, double guard_ratio) {
  return pilot_conj_estimate(per_cluster, guard_ratio);
}

/// Analytic pilot SIR with every non-pilot subcarrier loaded at unit power.
/// Returns +infinity when eps_f == 0.
inline double sir_pilot(PilotScheme scheme, double eps_f, std::size_t n_sub) {
  if (eps_f == 0.0) return std::numeric_limits<double>::infinity();
  const long n = static_cast<long>(n_sub);
  auto lam = [&](long d) { return ici_coefficient(d, eps_f, n_sub); };
  if (scheme == PilotScheme::conventional) {
    double ici = 0.0;
    for (long d = 1; d < n; ++d) ici += std::norm(lam(d));
    return std::norm(lam(0)) / ici;
  }
  const double sig = std::norm(2.0 * lam(0) - lam(1) - lam(-1));
  double ici = 0.0;
  for (long d = 2; d < n; ++d) ici += std::norm(lam(d) - lam(d - 1));
  return sig / ici;
}

/// Predicted variance of the phase estimate from L symbols at a given SIR.
inline double phase_variance_prediction(double sir, std::size_t l_symbols) {
  if (l_symbols < 2) throw std::invalid_argument("L must be at least 2");
  const double lm1 = static_cast<double>(l_symbols - 1);
  return (1.0 / sir + lm1 / (2.0 * sir * sir)) / (lm1 * lm1);
}

}  // namespace ofdmsync
