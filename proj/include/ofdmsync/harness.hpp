#pragma once

// Monte-Carlo engine: BER points and sweeps, acquisition time, constellation
// capture.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "experiment.hpp"
#include "simulate.hpp"

namespace ofdmsync {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to per-index slots; scheduling never affects them.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

struct BerPoint {
  double ebn0_db = 0.0;
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  bool low_confidence = false;

  double ber() const { return bits == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(bits); }
};

/// Frames in batches of spec.batch_frames until both min_bits and min_errors
/// are met or max_bits is reached. Frame indices restart at zero for every
/// point, so points of a sweep share payloads and channels.
inline BerPoint run_ber_point(const ExperimentSpec& spec, double ebn0_db) {
  spec.validate();
  BerPoint p{ebn0_db, 0, 0, false};
  std::uint64_t next_frame = 0;
  std::vector<FrameResult> batch(spec.batch_frames);
  while (!(p.bits >= spec.min_bits && p.errors >= spec.min_errors) && p.bits < spec.max_bits) {
    parallel_for(batch.size(), spec.workers, [&](std::size_t i) {
      batch[i] = simulate_frame(spec, ebn0_db, next_frame + i);
    });
    for (const auto& r : batch) {
      p.bits += r.bits;
      p.errors += r.errors;
    }
    next_frame += batch.size();
  }
  p.low_confidence = p.errors < spec.min_errors;
  return p;
}

inline std::vector<BerPoint> run_ber_sweep(const ExperimentSpec& spec) {
  if (spec.ebn0_grid.empty()) throw std::invalid_argument("Eb/N0 grid is empty");
  std::vector<BerPoint> out;
  for (double e : spec.ebn0_grid) out.push_back(run_ber_point(spec, e));
  return out;
}

/// Eb/N0 where the curve crosses `target`, interpolating log10(BER) linearly
/// between the bracketing points. Empty if the curve never crosses.
inline std::optional<double> crossing_db(const std::vector<BerPoint>& pts, double target) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double a = pts[i - 1].ber();
    const double b = pts[i].ber();
    if (a >= target && b <= target) {
      if (b <= 0.0) return pts[i].ebn0_db;
      if (a == b) return pts[i - 1].ebn0_db;
      const double t = (std::log10(a) - std::log10(target)) / (std::log10(a) - std::log10(b));
      return pts[i - 1].ebn0_db + t * (pts[i].ebn0_db - pts[i - 1].ebn0_db);
    }
  }
  return std::nullopt;
}

/// Walks the grid upward and stops at the first point at or below `target`.
inline std::optional<double> threshold_db(const ExperimentSpec& spec, double target,
                                          std::vector<BerPoint>* points = nullptr) {
  std::vector<BerPoint> pts;
  for (double e : spec.ebn0_grid) {
    pts.push_back(run_ber_point(spec, e));
    if (pts.back().ber() <= target) break;
  }
  if (points) *points = pts;
  return crossing_db(pts, target);
}

/// Loop trace of one frame.
inline std::vector<TraceRow> run_trace(const ExperimentSpec& spec, double ebn0_db, std::uint64_t frame_index = 0) {
  spec.validate();
  return simulate_frame(spec, ebn0_db, frame_index, {.trace = true}).trace;
}

struct Acquisition {
  std::size_t symbols = 0;  // l*
  double seconds = 0.0;     // l* T_sym
  double theta_final = 0.0;
};

inline constexpr double kAcquisitionEbN0 = 25.0;

/// First symbol after which theta_hat stays within 5% of its final value (mean
/// of the last tenth of the frame), with an absolute floor of 0.05 rad so a
/// zero offset still settles. Empty when the frame ends unsettled.
inline std::optional<Acquisition> settle_index(const std::vector<TraceRow>& trace, double t_sym) {
  if (trace.size() < 10) return std::nullopt;
  const std::size_t tail = std::max<std::size_t>(1, trace.size() / 10);
  double fin = 0.0;
  for (std::size_t i = trace.size() - tail; i < trace.size(); ++i) fin += trace[i].theta_hat;
  fin /= static_cast<double>(tail);
  const double tol = std::max(0.05 * std::abs(fin), 0.05);
  std::size_t l = trace.size();
  while (l > 0 && std::abs(trace[l - 1].theta_hat - fin) < tol) --l;
  if (l + tail >= trace.size()) return std::nullopt;
  return Acquisition{l, static_cast<double>(l) * t_sym, fin};
}

inline std::optional<Acquisition> measure_acquisition(const ExperimentSpec& spec, std::uint64_t frame_index = 0,
                                                      double ebn0_db = kAcquisitionEbN0) {
  if (!is_loop_scheme(spec.scheme)) throw std::invalid_argument("acquisition needs a tracking scheme");
  const FrameConfig cfg = spec.frame_config();
  const double t_sym = static_cast<double>(cfg.symbol_length()) * spec.channel.t_sample;
  return settle_index(run_trace(spec, ebn0_db, frame_index), t_sym);
}

inline std::vector<ConstellationPoint> capture_constellation(const ExperimentSpec& spec, Stage stage, double ebn0_db,
                                                             std::uint64_t frame_index = 0) {
  spec.validate();
  auto pts = simulate_frame(spec, ebn0_db, frame_index, {.constellation = true}).points;
  std::erase_if(pts, [&](const ConstellationPoint& p) { return p.stage != stage; });
  return pts;
}

/// RMS distance of a cloud from the nearest ideal constellation points.
inline double cloud_rms(const std::vector<ConstellationPoint>& pts, int mod_order) {
  if (pts.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& p : pts) acc += std::norm(p.value - slice(p.value, mod_order));
  return std::sqrt(acc / static_cast<double>(pts.size()));
}

}  // namespace ofdmsync
