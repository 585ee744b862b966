#pragma once

// Line-oriented key=value experiment files. Keys match the CLI flags.

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "experiment.hpp"
#include "tables.hpp"

namespace ofdmsync {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x))
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return x;
}

/// Accepts plain integers and integral scientific notation such as 1e6.
inline std::uint64_t to_count(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec == std::errc{} && p == v.data() + v.size()) return x;
  double d = 0.0;
  try {
    d = to_double(key, v);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
  }
  if (d < 0.0 || d != std::floor(d) || d > 1.8e19)
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(d);
}

/// "a/b" or a plain number.
inline double to_fraction(const std::string& key, const std::string& v) {
  if (auto s = v.find('/'); s != std::string::npos) {
    const double den = to_double(key, v.substr(s + 1));
    if (den == 0.0) throw std::invalid_argument(key + ": zero denominator");
    return to_double(key, v.substr(0, s)) / den;
  }
  return to_double(key, v);
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace detail

inline int parse_mod(const std::string& v) {
  std::string s;
  for (char c : v) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "bpsk" || s == "2") return 2;
  if (s == "qpsk" || s == "4") return 4;
  if (s == "16qam" || s == "16") return 16;
  if (s == "64qam" || s == "64") return 64;
  throw std::invalid_argument("mod: expected bpsk, qpsk, 16qam or 64qam, got '" + v + "'");
}

/// "a:step:b" (inclusive) or a comma-separated list of dB values.
inline std::vector<double> parse_grid(const std::string& v) {
  std::vector<double> g;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(detail::trim(p));
    if (parts.size() != 3) throw std::invalid_argument("ebn0: expected a:step:b, got '" + v + "'");
    const double a = detail::to_double("ebn0", parts[0]);
    const double st = detail::to_double("ebn0", parts[1]);
    const double b = detail::to_double("ebn0", parts[2]);
    if (!(st > 0.0) || b < a) throw std::invalid_argument("ebn0: empty or reversed range '" + v + "'");
    return grid_range(a, st, b);
  }
  std::stringstream ss(v);
  for (std::string p; std::getline(ss, p, ',');) g.push_back(detail::to_double("ebn0", detail::trim(p)));
  if (g.empty()) throw std::invalid_argument("ebn0: empty grid");
  return g;
}

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(ExperimentSpec&, const std::string&)> set;
  std::function<std::string(const ExperimentSpec&)> get;
};

namespace detail {

inline void set_frame(ExperimentSpec& s, std::size_t n, int m, std::size_t sym, double cp, PilotScheme p) {
  s.cfg = FrameConfig::wlan(n, m, sym, cp, p);
}

inline std::string pilot_name(PilotScheme p) { return to_string(p); }

}  // namespace detail

/// Every accepted key, in the order used when the resolved spec is written.
inline const std::vector<ConfigKey>& config_keys() {
  using S = ExperimentSpec;
  using detail::fmt;
  using detail::to_count;
  using detail::to_double;
  static const std::vector<ConfigKey> keys{
      {"preset", "table id (5-2 ... 5-13) or custom; applied before every other key",
       [](S& s, const std::string& v) {
         if (v != "custom") {
           const S p = preset_spec(v);
           s.preset = p.preset;
           s.cfg = p.cfg;
           s.channel = p.channel;
           s.epsilon = p.epsilon;
           s.scheme = p.scheme;
           s.ebn0_grid = p.ebn0_grid;
           s.rx.training_symbols = p.rx.training_symbols;
         } else {
           s.preset = v;
         }
       },
       [](const S& s) { return s.preset; }},
      {"nsub", "FFT size N",
       [](S& s, const std::string& v) {
         const auto n = to_count("nsub", v);
         if (n < 8) throw std::invalid_argument("nsub: must be at least 8");
         detail::set_frame(s, n, s.cfg.mod_order, s.cfg.symbols_per_frame, s.cfg.cp_fraction, s.cfg.pilot_scheme);
       },
       [](const S& s) { return std::to_string(s.cfg.n_sub); }},
      {"cp", "guard fraction G, e.g. 0.25 or 1/4",
       [](S& s, const std::string& v) {
         const double g = detail::to_fraction("cp", v);
         if (g < 0.0 || g > 1.0) throw std::invalid_argument("cp: must lie in [0, 1]");
         detail::set_frame(s, s.cfg.n_sub, s.cfg.mod_order, s.cfg.symbols_per_frame, g, s.cfg.pilot_scheme);
       },
       [](const S& s) { return fmt(s.cfg.cp_fraction); }},
      {"mod", "bpsk, qpsk, 16qam or 64qam",
       [](S& s, const std::string& v) {
         detail::set_frame(s, s.cfg.n_sub, parse_mod(v), s.cfg.symbols_per_frame, s.cfg.cp_fraction,
                           s.cfg.pilot_scheme);
       },
       [](const S& s) { return mod_name(s.cfg.mod_order); }},
      {"symbols", "OFDM symbols per frame",
       [](S& s, const std::string& v) {
         const auto n = to_count("symbols", v);
         if (n == 0) throw std::invalid_argument("symbols: must be positive");
         detail::set_frame(s, s.cfg.n_sub, s.cfg.mod_order, n, s.cfg.cp_fraction, s.cfg.pilot_scheme);
       },
       [](const S& s) { return std::to_string(s.cfg.symbols_per_frame); }},
      {"pilots", "conventional or clustered (the clustered scheme forces clustered)",
       [](S& s, const std::string& v) {
         PilotScheme p;
         if (v == "conventional") p = PilotScheme::conventional;
         else if (v == "clustered") p = PilotScheme::clustered;
         else throw std::invalid_argument("pilots: expected conventional or clustered, got '" + v + "'");
         detail::set_frame(s, s.cfg.n_sub, s.cfg.mod_order, s.cfg.symbols_per_frame, s.cfg.cp_fraction, p);
       },
       [](const S& s) { return detail::pilot_name(s.cfg.pilot_scheme); }},
      {"channel", "awgn or rayleigh:<tau>[us|ns][:exponential|uniform]",
       [](S& s, const std::string& v) { s.channel = parse_channel(v); },
       [](const S& s) { return to_string(s.channel); }},
      {"epsilon", "normalized carrier frequency offset",
       [](S& s, const std::string& v) { s.epsilon = to_double("epsilon", v); },
       [](const S& s) { return fmt(s.epsilon); }},
      {"scheme", "none, cp, moose, sc, mm, classen, type1, type2_fixed, type2_dual, type2_dual_clustered",
       [](S& s, const std::string& v) { s.scheme = parse_scheme(v); },
       [](const S& s) { return to_string(s.scheme); }},
      {"ebn0", "Eb/N0 grid in dB: a:step:b or a,b,c",
       [](S& s, const std::string& v) { s.ebn0_grid = parse_grid(v); },
       [](const S& s) {
         std::string out;
         for (double e : s.ebn0_grid) out += (out.empty() ? "" : ",") + fmt(e);
         return out;
       }},
      {"min_bits", "stop a point only after this many bits",
       [](S& s, const std::string& v) { s.min_bits = to_count("min_bits", v); },
       [](const S& s) { return std::to_string(s.min_bits); }},
      {"min_errors", "stop a point only after this many errors",
       [](S& s, const std::string& v) { s.min_errors = to_count("min_errors", v); },
       [](const S& s) { return std::to_string(s.min_errors); }},
      {"max_bits", "bit budget per point; points that hit it are flagged low-confidence",
       [](S& s, const std::string& v) { s.max_bits = to_count("max_bits", v); },
       [](const S& s) { return std::to_string(s.max_bits); }},
      {"seed", "master seed",
       [](S& s, const std::string& v) { s.master_seed = to_count("seed", v); },
       [](const S& s) { return std::to_string(s.master_seed); }},
      {"workers", "worker threads",
       [](S& s, const std::string& v) {
         const auto w = to_count("workers", v);
         if (w == 0 || w > 1024) throw std::invalid_argument("workers: must lie in [1, 1024]");
         s.workers = static_cast<unsigned>(w);
       },
       [](const S& s) { return std::to_string(s.workers); }},
      {"batch_frames", "frames simulated between stopping-rule checks",
       [](S& s, const std::string& v) { s.batch_frames = to_count("batch_frames", v); },
       [](const S& s) { return std::to_string(s.batch_frames); }},
      {"training_symbols", "leading symbols excluded from BER (loop schemes: CP reference window)",
       [](S& s, const std::string& v) { s.rx.training_symbols = to_count("training_symbols", v); },
       [](const S& s) { return std::to_string(s.rx.training_symbols); }},
      {"pd_groups", "pilot groups in the loop phase detector, 0 = all",
       [](S& s, const std::string& v) { s.rx.pd_groups = to_count("pd_groups", v); },
       [](const S& s) { return std::to_string(s.rx.pd_groups); }},
      {"cpe_groups", "pilot groups in the per-symbol phase correction, 0 = all",
       [](S& s, const std::string& v) { s.rx.cpe_groups = to_count("cpe_groups", v); },
       [](const S& s) { return std::to_string(s.rx.cpe_groups); }},
      {"theta_n_wide", "wide natural frequency (rad/symbol)",
       [](S& s, const std::string& v) { s.rx.dual.theta_n_wide = to_double("theta_n_wide", v); },
       [](const S& s) { return fmt(s.rx.dual.theta_n_wide); }},
      {"theta_n_narrow", "narrow natural frequency (rad/symbol)",
       [](S& s, const std::string& v) { s.rx.dual.theta_n_narrow = to_double("theta_n_narrow", v); },
       [](const S& s) { return fmt(s.rx.dual.theta_n_narrow); }},
      {"zeta", "loop damping",
       [](S& s, const std::string& v) { s.rx.dual.zeta = to_double("zeta", v); },
       [](const S& s) { return fmt(s.rx.dual.zeta); }},
      {"alpha_leak", "leaky phase-detector memory",
       [](S& s, const std::string& v) { s.rx.dual.alpha_leak = to_double("alpha_leak", v); },
       [](const S& s) { return fmt(s.rx.dual.alpha_leak); }},
      {"lock_threshold", "lock metric needed to switch to narrow",
       [](S& s, const std::string& v) { s.rx.dual.lock_threshold = to_double("lock_threshold", v); },
       [](const S& s) { return fmt(s.rx.dual.lock_threshold); }},
      {"lock_hold", "consecutive symbols above threshold before switching",
       [](S& s, const std::string& v) { s.rx.dual.lock_hold = static_cast<int>(to_count("lock_hold", v)); },
       [](const S& s) { return std::to_string(s.rx.dual.lock_hold); }},
      {"unlock_threshold", "lock metric below which the loop returns to wide",
       [](S& s, const std::string& v) { s.rx.dual.unlock_threshold = to_double("unlock_threshold", v); },
       [](const S& s) { return fmt(s.rx.dual.unlock_threshold); }},
      {"lock_smoothing", "weight of the previous lock metric",
       [](S& s, const std::string& v) { s.rx.dual.lock_smoothing = to_double("lock_smoothing", v); },
       [](const S& s) { return fmt(s.rx.dual.lock_smoothing); }},
      {"tfdfl_alpha_f", "type1 frequency-loop gain",
       [](S& s, const std::string& v) { s.rx.tfdfl_alpha_f = to_double("tfdfl_alpha_f", v); },
       [](const S& s) { return fmt(s.rx.tfdfl_alpha_f); }},
      {"tfdfl_alpha_t", "type1 phase-loop gain",
       [](S& s, const std::string& v) { s.rx.tfdfl_alpha_t = to_double("tfdfl_alpha_t", v); },
       [](const S& s) { return fmt(s.rx.tfdfl_alpha_t); }},
      {"mm_q", "identical parts in the M&M training symbol",
       [](S& s, const std::string& v) { s.rx.mm_q = to_count("mm_q", v); },
       [](const S& s) { return std::to_string(s.rx.mm_q); }},
      {"mm_p", "M&M design parameter P",
       [](S& s, const std::string& v) { s.rx.mm_p = to_count("mm_p", v); },
       [](const S& s) { return std::to_string(s.rx.mm_p); }},
      {"classen_step", "coarse search step",
       [](S& s, const std::string& v) { s.rx.classen_step = to_double("classen_step", v); },
       [](const S& s) { return fmt(s.rx.classen_step); }},
      {"classen_range", "coarse search half-width",
       [](S& s, const std::string& v) { s.rx.classen_range = to_double("classen_range", v); },
       [](const S& s) { return fmt(s.rx.classen_range); }},
  };
  return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

/// Applies one setting; `line` only decorates error messages.
inline void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value,
                          std::size_t line = 0) {
  const ConfigKey* k = find_key(key);
  if (!k) throw ConfigError("unknown key '" + key + "'", line);
  try {
    k->set(spec, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), line);
  }
}

/// Splits "key=value"; throws on a missing '='.
inline std::pair<std::string, std::string> split_setting(const std::string& text, std::size_t line = 0) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'", line);
  const std::string key = detail::trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("empty key", line);
  return {key, detail::trim(text.substr(eq + 1))};
}

/// Applies settings in order, except that `preset` is applied first.
inline void apply_settings(ExperimentSpec& spec, const std::vector<std::tuple<std::string, std::string, std::size_t>>& kv) {
  for (const auto& [k, v, line] : kv)
    if (k == "preset") apply_setting(spec, k, v, line);
  for (const auto& [k, v, line] : kv)
    if (k != "preset") apply_setting(spec, k, v, line);
}

inline ExperimentSpec parse_config(std::istream& in, ExperimentSpec spec = {}) {
  std::vector<std::tuple<std::string, std::string, std::size_t>> kv;
  std::string raw;
  for (std::size_t line = 1; std::getline(in, raw); ++line) {
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    const std::string t = detail::trim(raw);
    if (t.empty()) continue;
    auto [k, v] = split_setting(t, line);
    if (!find_key(k)) throw ConfigError("unknown key '" + k + "'", line);
    kv.emplace_back(k, v, line);
  }
  apply_settings(spec, kv);
  return spec;
}

inline ExperimentSpec parse_config_text(const std::string& text, ExperimentSpec spec = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(spec));
}

inline ExperimentSpec load_config(const std::string& path, ExperimentSpec spec = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in, std::move(spec));
}

/// Resolved spec as key=value pairs, loadable again by parse_config.
inline std::vector<std::pair<std::string, std::string>> describe(const ExperimentSpec& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_keys()) out.emplace_back(k.name, k.get(spec));
  return out;
}

}  // namespace ofdmsync
