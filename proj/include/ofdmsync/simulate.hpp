#pragma once

// One simulated frame: transmitter, channel, receiver for every scheme.

#include <optional>
#include <string>
#include <vector>

#include "channel.hpp"
#include "core.hpp"
#include "estimators.hpp"
#include "experiment.hpp"
#include "loops.hpp"
#include "rng.hpp"

namespace ofdmsync {

enum class Stage { pre_pll, post_pll, post_phase_correction };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::pre_pll: return "pre_pll";
    case Stage::post_pll: return "post_pll";
    default: return "post_phase_correction";
  }
}

inline Stage parse_stage(const std::string& s) {
  if (s == "pre_pll") return Stage::pre_pll;
  if (s == "post_pll") return Stage::post_pll;
  if (s == "post_phase_correction") return Stage::post_phase_correction;
  throw std::invalid_argument("unknown stage '" + s + "'");
}

struct TraceRow {
  std::size_t symbol = 0;
  double theta_hat = 0.0;  // rad per symbol after this symbol's update
  double theta_err = 0.0;  // phase detector output fed to the loop
  double eps_hat = 0.0;
  std::string mode;
};

struct ConstellationPoint {
  Stage stage = Stage::pre_pll;
  std::size_t symbol = 0;
  std::size_t subcarrier = 0;
  cplx value;
};

struct FrameResult {
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  double eps_hat = 0.0;  // frequency estimate applied at the end of the frame
  std::vector<TraceRow> trace;
  std::vector<ConstellationPoint> points;
};

struct FrameOptions {
  bool trace = false;
  bool constellation = false;
};

namespace detail {

inline ChannelRealization draw_channel(const ChannelSpec& c, Rng& rng) {
  if (c.kind == ChannelSpec::Kind::awgn) return {};
  return rayleigh_realize(c.tau_max, c.t_sample, c.profile, rng);
}

inline cvec random_qpsk_row(const FrameConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<int> q(0, 3);
  cvec row(cfg.n_sub, cplx{});
  for (auto k : cfg.data_indices) row[k] = std::polar(1.0, kPi / 4 + kPi / 2 * q(rng));
  for (auto k : cfg.pilot_indices) row[k] = std::polar(1.0, kPi / 4 + kPi / 2 * q(rng));
  return row;
}

inline void append_symbol(cvec& out, const cvec& row, std::size_t cp) {
  const cvec s = add_cp(idft(row), cp);
  out.insert(out.end(), s.begin(), s.end());
}

/// Known preamble for the one-shot data-aided estimators; empty otherwise.
struct Preamble {
  cvec samples;
  std::vector<cvec> rows;  // frequency-domain content, one per symbol
  SchmidlCoxTraining sc;
};

inline Preamble make_preamble(const ExperimentSpec& spec, const FrameConfig& cfg, Rng& rng) {
  Preamble p;
  const std::size_t cp = cfg.cp_length();
  switch (spec.scheme) {
    case Scheme::moose: {
      const cvec row = make_moose_training(cfg, rng);
      const cvec x = idft(row);
      cvec s = add_cp(x, cp);
      s.insert(s.end(), x.begin(), x.end());
      p.samples = std::move(s);
      p.rows = {row, row};
      break;
    }
    case Scheme::sc:
      p.sc = make_schmidl_cox_training(cfg.n_sub, rng);
      append_symbol(p.samples, p.sc.first, cp);
      append_symbol(p.samples, p.sc.second, cp);
      break;
    case Scheme::mm: {
      const cvec row = make_mm_training(cfg.n_sub, spec.rx.mm_q, rng);
      append_symbol(p.samples, row, cp);
      p.rows = {row};
      break;
    }
    case Scheme::classen:
      for (int i = 0; i < 2; ++i) {
        p.rows.push_back(random_qpsk_row(cfg, rng));
        append_symbol(p.samples, p.rows.back(), cp);
      }
      break;
    default: break;
  }
  return p;
}

/// Frequency estimate (normalized) from the received preamble or data.
inline double one_shot_estimate(const ExperimentSpec& spec, const FrameConfig& cfg, const Preamble& pre,
                                std::span<const cplx> rx_pre, std::span<const cplx> rx_data) {
  const std::size_t n = cfg.n_sub;
  const std::size_t cp = cfg.cp_length();
  switch (spec.scheme) {
    case Scheme::cp: {
      const std::size_t t = std::max<std::size_t>(1, spec.rx.training_symbols);
      return cp_estimate(rx_data.first(t * cfg.symbol_length()), cfg).epsilon_hat;
    }
    case Scheme::moose: return moose_estimate(rx_pre.subspan(cp, 2 * n), n).epsilon_hat;
    case Scheme::mm: return morelli_mengali(rx_pre.subspan(cp, n), spec.rx.mm_q, spec.rx.mm_p).epsilon_hat;
    case Scheme::sc: {
      const std::size_t ns = cfg.symbol_length();
      const double eps_f = schmidl_cox_ffo(rx_pre.subspan(cp, n), n).estimate.epsilon_hat;
      const cvec f1 = dft(apply_cfo(rx_pre.subspan(cp, n), -eps_f, n, cp));
      const cvec f2 = dft(apply_cfo(rx_pre.subspan(ns + cp, n), -eps_f, n, ns + cp));
      std::vector<long> cand;
      const long lim = static_cast<long>(n / 8);
      for (long g = -lim; g <= lim; ++g) cand.push_back(g);
      return eps_f + schmidl_cox_ifo(f1, f2, pre.sc.v, cand).epsilon_i;
    }
    case Scheme::classen: {
      std::vector<std::size_t> tones;
      cvec z0, z1;
      for (std::size_t k = 0; k < n; ++k)
        if (pre.rows[0][k] != cplx{}) {
          tones.push_back(k);
          z0.push_back(pre.rows[0][k]);
          z1.push_back(pre.rows[1][k]);
        }
      const double coarse = classen_coarse(rx_pre, cfg, 0, 1, tones, z0, z1, spec.rx.classen_step,
                                           spec.rx.classen_range)
                                .epsilon_hat;
      const cvec fixed = apply_cfo(rx_pre, -coarse, n, 0);
      const std::size_t ns = cfg.symbol_length();
      const cvec y0 = dft(std::span<const cplx>(fixed).subspan(cp, n));
      const cvec y1 = dft(std::span<const cplx>(fixed).subspan(ns + cp, n));
      return coarse + classen_fine(y0, y1, tones, z0, z1, 1, cfg.guard_ratio()).epsilon_hat;
    }
    default: return 0.0;
  }
}

/// Pilot observable per group: raw Y times conj(Z), clustered pairs combined.
inline cvec pilot_observables(const cvec& y, const PilotLayout& layout) {
  cvec c;
  c.reserve(layout.groups.size());
  const std::size_t n = y.size();
  for (std::size_t g = 0; g < layout.groups.size(); ++g) {
    const auto k = layout.groups[g];
    const cplx z = std::conj(layout.values[g]);
    if (layout.scheme == PilotScheme::clustered) c.push_back((y[k] - y[(k + 1) % n]) * z);
    else c.push_back(y[k] * z);
  }
  return c;
}

/// Expected pilot observable with no phase error, given the channel.
inline cvec pilot_references(const cvec& h, const PilotLayout& layout) {
  cvec r;
  const std::size_t n = h.size();
  for (std::size_t g = 0; g < layout.groups.size(); ++g) {
    const auto k = layout.groups[g];
    if (layout.scheme == PilotScheme::clustered) {
      // the right tone carries -value, so (Y_k - Y_{k+1}) conj(Z_k) -> H_k + H_{k+1}
      r.push_back(h[k] + h[(k + 1) % n]);
    } else {
      r.push_back(h[k]);
    }
  }
  return r;
}

inline double common_phase(const cvec& y, const cvec& h, const PilotLayout& layout) {
  const cvec c = pilot_observables(y, layout);
  const cvec r = pilot_references(h, layout);
  cplx acc{};
  for (std::size_t g = 0; g < c.size(); ++g) acc += c[g] * std::conj(r[g]);
  return std::arg(acc);
}

}  // namespace detail

/// Simulates frame `frame_index` of the experiment at one Eb/N0 point.
/// Draw order from the frame stream: payload bits, channel taps, data noise.
/// The preamble and its noise use a separate stream so that every scheme sees
/// the same payload, channel and data noise for a given frame index.
inline FrameResult simulate_frame(const ExperimentSpec& spec, double ebn0_db, std::uint64_t frame_index,
                                  const FrameOptions& opt = {}, double noise_var_override = -1.0) {
  const FrameConfig cfg = spec.frame_config();
  const std::size_t n = cfg.n_sub;
  const std::size_t ns = cfg.symbol_length();
  const std::size_t nsym = cfg.symbols_per_frame;

  Rng rng = trial_rng(spec.master_seed, frame_index);
  Rng prng = trial_rng(spec.master_seed, frame_index, 1);

  bitvec payload(cfg.bits_per_frame());
  {
    std::uniform_int_distribution<int> bit(0, 1);
    for (auto& b : payload) b = static_cast<std::uint8_t>(bit(rng));
  }
  const Frame frame = build_frame(cfg, payload);
  const ChannelRealization ch = detail::draw_channel(spec.channel, rng);
  const cvec h = ch.frequency_response(n);
  const detail::Preamble pre = detail::make_preamble(spec, cfg, prng);

  cvec stream = pre.samples;
  stream.insert(stream.end(), frame.samples.begin(), frame.samples.end());
  cvec rx = apply_cfo(apply_channel(stream, ch), spec.epsilon, n, 0);
  const double nv = noise_var_override >= 0.0 ? noise_var_override : sample_noise_var(ebn0_db, cfg);
  const std::size_t np = pre.samples.size();
  add_awgn(std::span<cplx>(rx).first(np), nv, prng);
  add_awgn(std::span<cplx>(rx).subspan(np), nv, rng);

  const std::span<const cplx> rx_pre = std::span<const cplx>(rx).first(np);
  const std::span<const cplx> rx_data = std::span<const cplx>(rx).subspan(np);

  const PilotLayout cpe_pilots = PilotLayout::from(cfg, spec.rx.cpe_groups);
  const PilotLayout pd_pilots = PilotLayout::from(cfg, spec.rx.pd_groups);
  const std::size_t t_train = spec.rx.training_symbols;
  const bool loop = is_loop_scheme(spec.scheme);
  const bool correct = spec.scheme != Scheme::none;
  const double cycles = kTwoPi * (1.0 + cfg.guard_ratio());

  double theta = 0.0;
  if (!loop && correct) theta = cycles * detail::one_shot_estimate(spec, cfg, pre, rx_pre, rx_data);

  // Frequency reference used only to resolve the phase detector's 2 pi ambiguity.
  double phi_ref_base = 0.0;
  if (loop) {
    const std::size_t t = std::min(nsym, std::max<std::size_t>(1, t_train));
    phi_ref_base = cycles * cp_estimate(rx_data.first(t * ns), cfg).epsilon_hat;
  }

  FrameResult out;
  LoopState st;
  cvec prev_c;
  double tl_phase = 0.0;
  Nco nco;
  const bool narrow_only = spec.scheme == Scheme::type2_fixed;
  const LoopGains narrow = gains_for(LoopMode::narrow, spec.rx.dual);

  for (std::size_t l = 0; l < nsym; ++l) {
    const auto sym = rx_data.subspan(l * ns, ns);
    const double applied = theta;
    const cvec corrected = correct ? nco.rotate(sym, applied / static_cast<double>(ns)) : cvec(sym.begin(), sym.end());
    const cvec y = dft(std::span<const cplx>(corrected).subspan(cfg.cp_length(), n));

    double err = 0.0;
    if (loop && spec.scheme != Scheme::type1) {
      const cvec c = detail::pilot_observables(y, pd_pilots);
      if (l >= 1) {
        cplx p{};
        for (std::size_t g = 0; g < c.size(); ++g) p += std::conj(prev_c[g]) * c[g];
        const double meas = leaky_pd(st, p, spec.rx.dual.alpha_leak);
        const double ref = phi_ref_base - applied;
        err = ref + wrap_phase(meas - ref);
        if (narrow_only) {
          st = type2_step(st, err, narrow);
        } else {
          st = dual_bw_step(st, err, spec.rx.dual);
        }
        theta = st.theta_hat;
      }
      prev_c = c;
    }

    // Per-symbol phase correction.
    double psi = 0.0;
    if (spec.scheme == Scheme::type1) psi = tl_phase;
    else if (correct) psi = detail::common_phase(y, h, cpe_pilots);
    const cplx rot = std::polar(1.0, -psi);

    cvec data(cfg.n_data());
    for (std::size_t i = 0; i < cfg.n_data(); ++i) {
      const auto k = cfg.data_indices[i];
      data[i] = y[k] * rot / h[k];
    }

    if (spec.scheme == Scheme::type1) {
      // Training symbols are known, so the loop runs data-aided until they end.
      const cvec known = l < t_train ? map_bits(std::span<const std::uint8_t>(payload).subspan(
                                                    l * cfg.bits_per_symbol(), cfg.bits_per_symbol()),
                                                cfg.mod_order)
                                     : cvec{};
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const cplx v = data[i];
        const cplx d = known.empty() ? slice(v, cfg.mod_order) : known[i];
        num += tfdfl_ped(v, d);
        den += std::abs(d.real()) + std::abs(d.imag());
      }
      err = den > 0.0 ? num / den : 0.0;
      tl_phase = wrap_phase(tl_phase + spec.rx.tfdfl_alpha_t * err);
      st = type1_step(st, err, spec.rx.tfdfl_alpha_f);
      theta = st.theta_hat;
    }

    if (opt.trace) {
      std::string mode = "NONE";
      if (spec.scheme == Scheme::type2_dual || spec.scheme == Scheme::type2_dual_clustered) mode = to_string(st.mode);
      else if (loop) mode = "FIXED";
      out.trace.push_back({l, theta, err, theta / cycles, mode});
    }

    if (l < t_train) continue;

    if (opt.constellation) {
      const cvec raw = dft(sym.subspan(cfg.cp_length(), n));
      for (std::size_t i = 0; i < cfg.n_data(); ++i) {
        const auto k = cfg.data_indices[i];
        out.points.push_back({Stage::pre_pll, l, k, raw[k] / h[k]});
        out.points.push_back({Stage::post_pll, l, k, y[k] / h[k]});
        out.points.push_back({Stage::post_phase_correction, l, k, data[i]});
      }
    }

    const bitvec rx_bits = demap_symbols(data, cfg.mod_order);
    const std::size_t off = l * cfg.bits_per_symbol();
    for (std::size_t b = 0; b < rx_bits.size(); ++b) out.errors += rx_bits[b] != payload[off + b];
    out.bits += rx_bits.size();
  }
  out.eps_hat = theta / cycles;
  return out;
}

}  // namespace ofdmsync
