#pragma once

// Experiment description shared by the harness, config loader and CLI.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "channel.hpp"
#include "core.hpp"
#include "loops.hpp"

namespace ofdmsync {

enum class Scheme { none, cp, moose, sc, mm, classen, type1, type2_fixed, type2_dual, type2_dual_clustered };

inline const std::vector<std::pair<Scheme, std::string>>& scheme_names() {
  static const std::vector<std::pair<Scheme, std::string>> names{
      {Scheme::none, "none"},
      {Scheme::cp, "cp"},
      {Scheme::moose, "moose"},
      {Scheme::sc, "sc"},
      {Scheme::mm, "mm"},
      {Scheme::classen, "classen"},
      {Scheme::type1, "type1"},
      {Scheme::type2_fixed, "type2_fixed"},
      {Scheme::type2_dual, "type2_dual"},
      {Scheme::type2_dual_clustered, "type2_dual_clustered"},
  };
  return names;
}

inline std::string to_string(Scheme s) {
  for (const auto& [k, v] : scheme_names())
    if (k == s) return v;
  return "?";
}

inline Scheme parse_scheme(const std::string& name) {
  for (const auto& [k, v] : scheme_names())
    if (v == name) return k;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

inline bool is_loop_scheme(Scheme s) {
  return s == Scheme::type1 || s == Scheme::type2_fixed || s == Scheme::type2_dual ||
         s == Scheme::type2_dual_clustered;
}

struct ChannelSpec {
  enum class Kind { awgn, rayleigh };
  Kind kind = Kind::awgn;
  double tau_max = 0.0;  // seconds
  DelayProfile profile = DelayProfile::exponential;
  double t_sample = 50e-9;

  static ChannelSpec awgn() { return {}; }
  static ChannelSpec rayleigh(double tau_max, DelayProfile p = DelayProfile::exponential) {
    return {Kind::rayleigh, tau_max, p, 50e-9};
  }
};

/// "awgn" or "rayleigh:<tau>[us|ns|s][:exponential|uniform]".
inline ChannelSpec parse_channel(const std::string& text) {
  if (text == "awgn") return ChannelSpec::awgn();
  const std::string prefix = "rayleigh:";
  if (text.rfind(prefix, 0) != 0) throw std::invalid_argument("bad channel '" + text + "'");
  std::string rest = text.substr(prefix.size());
  DelayProfile prof = DelayProfile::exponential;
  if (auto c = rest.find(':'); c != std::string::npos) {
    const std::string p = rest.substr(c + 1);
    if (p == "uniform") prof = DelayProfile::uniform;
    else if (p != "exponential") throw std::invalid_argument("bad delay profile '" + p + "'");
    rest = rest.substr(0, c);
  }
  double scale = 1e-6;
  for (const auto& [suffix, s] : {std::pair<std::string, double>{"us", 1e-6}, {"ns", 1e-9}, {"s", 1.0}}) {
    if (rest.size() > suffix.size() && rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
      scale = s;
      rest.resize(rest.size() - suffix.size());
      break;
    }
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(rest, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad delay spread in '" + text + "'");
  }
  if (used != rest.size() || v < 0.0) throw std::invalid_argument("bad delay spread in '" + text + "'");
  return ChannelSpec::rayleigh(v * scale, prof);
}

inline std::string to_string(const ChannelSpec& c) {
  if (c.kind == ChannelSpec::Kind::awgn) return "awgn";
  char buf[64];
  std::snprintf(buf, sizeof buf, "rayleigh:%gus:%s", c.tau_max * 1e6, to_string(c.profile).c_str());
  return buf;
}

/// Receiver knobs that are not part of the frame numerology.
struct ReceiverParams {
  DualBwConfig dual;
  std::size_t training_symbols = 4;  // leading symbols excluded from BER
  std::size_t pd_groups = 0;         // pilot groups feeding the phase detector, 0 = all
  std::size_t cpe_groups = 1;        // pilot groups feeding the per-symbol phase correction, 0 = all
  double tfdfl_alpha_f = 0.1;
  double tfdfl_alpha_t = 0.5;
  std::size_t mm_q = 4;
  std::size_t mm_p = 2;
  double classen_step = 0.1;
  double classen_range = 16.0;
};

struct ExperimentSpec {
  std::string preset = "custom";
  FrameConfig cfg = FrameConfig::wlan(64, 4, 280);
  ChannelSpec channel = ChannelSpec::rayleigh(0.5e-6);
  double epsilon = 0.4;
  Scheme scheme = Scheme::type2_dual;
  std::vector<double> ebn0_grid{0, 5, 10, 15, 20, 25, 30};
  std::uint64_t min_bits = 1000000;
  std::uint64_t min_errors = 100;
  std::uint64_t max_bits = 20000000;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  std::size_t batch_frames = 8;
  ReceiverParams rx;

  /// Frame layout actually simulated: the clustered scheme needs clustered pilots.
  FrameConfig frame_config() const {
    if (scheme == Scheme::type2_dual_clustered && cfg.pilot_scheme != PilotScheme::clustered)
      return FrameConfig::wlan(cfg.n_sub, cfg.mod_order, cfg.symbols_per_frame, cfg.cp_fraction, PilotScheme::clustered);
    return cfg;
  }

  void validate() const {
    frame_config().validate();
    rx.dual.validate();
    if (ebn0_grid.empty()) throw std::invalid_argument("Eb/N0 grid is empty");
    if (batch_frames == 0) throw std::invalid_argument("batch_frames must be positive");
    if (max_bits < min_bits) throw std::invalid_argument("max_bits below min_bits");
    if (rx.training_symbols >= cfg.symbols_per_frame)
      throw std::invalid_argument("training_symbols must be fewer than symbols_per_frame");
    if (is_loop_scheme(scheme) && cfg.symbols_per_frame < 2)
      throw std::invalid_argument("tracking schemes need at least two symbols per frame");
  }
};

}  // namespace ofdmsync
