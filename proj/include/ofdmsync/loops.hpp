#pragma once

// Discrete tracking loops: first-order (type-1) and PI (type-2) loops, the
// dual-bandwidth controller with a lock detector, the leaky phase detector and
// the NCO, plus the analytic loop quantities.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "core.hpp"

namespace ofdmsync {

struct LoopGains {
  double k_p = 0.0;
  double k_i = 0.0;
  double theta_n = 0.0;
  double zeta = 1.0;
  double alpha_leak = 0.5;
};

enum class LoopMode { wide, narrow };

inline std::string to_string(LoopMode m) { return m == LoopMode::wide ? "WIDE" : "NARROW"; }

struct LoopState {
  double theta_hat = 0.0;   // radians per symbol
  double integrator = 0.0;  // PI integral memory
  cplx leak_mem{};          // leaky-integrated conjugate products
  LoopMode mode = LoopMode::wide;
  int lock_counter = 0;
  long symbol_index = 0;
  double lock_metric = 0.0;
  bool metric_primed = false;
};

struct DualBwConfig {
  double theta_n_wide = 0.1;
  double theta_n_narrow = 0.022;
  double zeta = 1.0;
  double lock_threshold = 0.95;
  int lock_hold = 5;
  double unlock_threshold = 0.5;
  double lock_smoothing = 0.8;  // weight of the previous metric
  double alpha_leak = 0.3;

  void validate() const {
    if (!(theta_n_wide >= theta_n_narrow && theta_n_narrow > 0.0))
      throw std::invalid_argument("need theta_n_wide >= theta_n_narrow > 0");
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
    if (lock_hold < 1) throw std::invalid_argument("lock_hold must be at least 1");
    if (!(lock_smoothing >= 0.0 && lock_smoothing < 1.0))
      throw std::invalid_argument("lock_smoothing must lie in [0, 1)");
    if (!(alpha_leak >= 0.0 && alpha_leak < 1.0)) throw std::invalid_argument("alpha_leak must lie in [0, 1)");
    if (unlock_threshold > lock_threshold) throw std::invalid_argument("unlock_threshold above lock_threshold");
  }
};

// ---------------------------------------------------------------------------
// Gains and transfer functions

inline LoopGains type2_gains(double theta_n, double zeta, double alpha_leak = 0.5) {
  if (!(theta_n > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("theta_n and zeta must be positive");
  const double d = 1.0 + 4.0 * zeta * theta_n + theta_n * theta_n;
  return {4.0 * zeta * theta_n / d, 4.0 * theta_n * theta_n / d, theta_n, zeta, alpha_leak};
}

struct Transfer {
  cplx h;
  cplx h_e;
};

/// Closed-loop phase and error transfer functions at z.
///   D(z) = z^2 - (2 - kp - ki) z + (1 - kp)
///   H(z) = ((kp + ki) z - kp) / D(z),  He(z) = (z - 1)^2 / D(z)
inline Transfer transfer_eval(const LoopGains& g, cplx z) {
  const cplx den = z * z - (2.0 - g.k_p - g.k_i) * z + (1.0 - g.k_p);
  if (std::abs(den) < 1e-14) throw std::domain_error("transfer function evaluated at a pole");
  return {((g.k_p + g.k_i) * z - g.k_p) / den, (z - 1.0) * (z - 1.0) / den};
}

inline std::array<cplx, 2> closed_loop_poles(const LoopGains& g) {
  const double b = -(2.0 - g.k_p - g.k_i);
  const double c = 1.0 - g.k_p;
  const cplx s = std::sqrt(cplx(b * b - 4.0 * c, 0.0));
  return {(-b + s) / 2.0, (-b - s) / 2.0};
}

inline bool is_stable(const LoopGains& g) {
  for (const auto& p : closed_loop_poles(g))
    if (std::abs(p) >= 1.0) return false;
  return true;
}

/// B_L = (omega_n / 2)(zeta + 1 / (4 zeta)).
inline double noise_bandwidth(double omega_n, double zeta) {
  if (!(omega_n > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("omega_n and zeta must be positive");
  return omega_n / 2.0 * (zeta + 1.0 / (4.0 * zeta));
}

/// T_p = dw0^2 (zeta + 1/(4 zeta))^3 / (16 B_L^3).
inline double acquisition_time_pred(double delta_omega0, double zeta, double b_l) {
  if (!(b_l > 0.0)) throw std::invalid_argument("B_L must be positive");
  if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
  const double f = zeta + 1.0 / (4.0 * zeta);
  return delta_omega0 * delta_omega0 * f * f * f / (16.0 * b_l * b_l * b_l);
}

// ---------------------------------------------------------------------------
// Loop steps

inline LoopState type2_step(LoopState s, double phase_error, const LoopGains& g) {
  s.integrator += g.k_i * phase_error;
  s.theta_hat += g.k_p * phase_error + s.integrator;
  ++s.symbol_index;
  return s;
}

inline LoopState type1_step(LoopState s, double phase_error, double alpha_prime) {
  if (!(alpha_prime >= 0.0 && alpha_prime < 2.0)) throw std::invalid_argument("alpha' must lie in [0, 2)");
  s.theta_hat += alpha_prime * phase_error;
  ++s.symbol_index;
  return s;
}

/// Decision-directed error increment for one subcarrier.
inline double tfdfl_ped(cplx received, cplx decision) {
  const double a = received.real(), b = received.imag();
  const double e_i = a - decision.real();
  const double e_q = b - decision.imag();
  auto sgn = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  return e_q * sgn(a) - e_i * sgn(b);
}

/// Leaky phase detector: mem <- alpha * mem + p, returns arg(mem).
inline double leaky_pd(LoopState& s, cplx conj_product, double alpha_leak) {
  s.leak_mem = alpha_leak * s.leak_mem + conj_product;
  return std::arg(s.leak_mem);
}

struct LockResult {
  bool locked = false;
  LoopState state;
};

/// Smoothed cos(theta_e) lock indicator with hysteresis.
inline LockResult lock_detect(LoopState s, double phase_error, const DualBwConfig& cfg) {
  const double c = std::cos(phase_error);
  if (!s.metric_primed) {
    s.lock_metric = c;
    s.metric_primed = true;
  } else {
    s.lock_metric = cfg.lock_smoothing * s.lock_metric + (1.0 - cfg.lock_smoothing) * c;
  }
  if (s.mode == LoopMode::wide) {
    s.lock_counter = s.lock_metric > cfg.lock_threshold ? s.lock_counter + 1 : 0;
    if (s.lock_counter >= cfg.lock_hold) s.mode = LoopMode::narrow;
  } else if (s.lock_metric < cfg.unlock_threshold) {
    s.mode = LoopMode::wide;
    s.lock_counter = 0;
  }
  return {s.mode == LoopMode::narrow, s};
}

inline LoopGains gains_for(LoopMode m, const DualBwConfig& cfg) {
  return type2_gains(m == LoopMode::wide ? cfg.theta_n_wide : cfg.theta_n_narrow, cfg.zeta, cfg.alpha_leak);
}

/// One dual-bandwidth update: gains follow the current mode, then the lock
/// detector sees the same error. Integrator and leak memory carry over.
inline LoopState dual_bw_step(LoopState s, double phase_error, const DualBwConfig& cfg) {
  const LoopGains g = gains_for(s.mode, cfg);
  s = type2_step(s, phase_error, g);
  return lock_detect(s, phase_error, cfg).state;
}

// ---------------------------------------------------------------------------
// NCO

/// Phase-continuous derotator. Each sample advances the phase by the current
/// per-sample increment.
class Nco {
 public:
  double phase() const { return phase_; }
  void reset(double phase = 0.0) { phase_ = phase; }

  cvec rotate(std::span<const cplx> in, double increment_per_sample) {
    cvec out(in.size());
    for (std::size_t n = 0; n < in.size(); ++n) {
      out[n] = in[n] * std::polar(1.0, -phase_);
      phase_ = std::remainder(phase_ + increment_per_sample, kTwoPi);
    }
    return out;
  }

 private:
  double phase_ = 0.0;
};

/// Derotates a stream starting at phase zero with increment theta_hat / N_sym
/// per sample, theta_hat being radians per OFDM symbol.
inline cvec nco_rotate(std::span<const cplx> stream, double theta_hat, const FrameConfig& cfg) {
  Nco nco;
  return nco.rotate(stream, theta_hat / static_cast<double>(cfg.symbol_length()));
}

/// Normalized CFO implied by a per-symbol phase.
inline double theta_to_epsilon(double theta_hat, const FrameConfig& cfg) {
  return theta_hat / (kTwoPi * (1.0 + cfg.guard_ratio()));
}

}  // namespace ofdmsync
