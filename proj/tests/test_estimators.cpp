#include <gtest/gtest.h>

#include "ofdmsync/estimators.hpp"

using namespace ofdmsync;

namespace {

bitvec random_bits(std::size_t n, Rng& rng) {
  std::bernoulli_distribution b;
  bitvec v(n);
  for (auto& x : v) x = b(rng);
  return v;
}

// Frame whose symbols all carry the same payload, so consecutive received
// symbols differ only by the common CFO rotation.
Frame repeated_frame(FrameConfig cfg, Rng& rng) {
  const auto one = random_bits(cfg.bits_per_symbol(), rng);
  bitvec all;
  for (std::size_t l = 0; l < cfg.symbols_per_frame; ++l) all.insert(all.end(), one.begin(), one.end());
  return build_frame(cfg, all);
}

Frame random_frame(const FrameConfig& cfg, Rng& rng) { return build_frame(cfg, random_bits(cfg.bits_per_frame(), rng)); }

std::vector<cvec> received_rows(const cvec& rx, const FrameConfig& cfg) {
  std::vector<cvec> rows;
  for (std::size_t l = 0; l < cfg.symbols_per_frame; ++l) rows.push_back(dft(strip_symbol(rx, cfg, l)));
  return rows;
}

cvec tone_series(const std::vector<cvec>& rows, std::size_t k) {
  cvec s;
  for (const auto& r : rows) s.push_back(r[k]);
  return s;
}

double variance(const std::vector<double>& v) {
  double m = 0.0, q = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  for (double x : v) q += (x - m) * (x - m);
  return q / double(v.size() - 1);
}

}  // namespace

TEST(CpEstimate, NoiselessSweepAndWrap) {
  Rng r(1);
  const auto cfg = FrameConfig::wlan(64, 4, 4);
  const auto f = random_frame(cfg, r);
  EXPECT_NEAR(cp_estimate(f.samples, cfg).epsilon_hat, 0.0, 1e-12);
  EXPECT_NEAR(cp_estimate(apply_cfo(f.samples, 0.25, 64), cfg).epsilon_hat, 0.25, 1e-9);
  EXPECT_NEAR(cp_estimate(apply_cfo(f.samples, 0.6, 64), cfg).epsilon_hat, -0.4, 1e-9);
  for (int i = 0; i < 21; ++i) {
    const double eps = -0.49 + 0.049 * i;
    const auto e = cp_estimate(apply_cfo(f.samples, eps, 64), cfg);
    EXPECT_NEAR(e.epsilon_hat, eps, 1e-6);
    EXPECT_EQ(e.n_symbols_used, 4u);
    EXPECT_GE(e.epsilon_hat, -0.5);
    EXPECT_LT(e.epsilon_hat, 0.5);
  }
  EXPECT_THROW(cp_estimate(cvec(79), cfg), std::invalid_argument);
}

TEST(CpEstimate, ErrorIncrement) {
  Rng r(2);
  const auto cfg = FrameConfig::wlan(64, 4, 2);
  const auto f = random_frame(cfg, r);
  EXPECT_NEAR(cp_error_increment(f.samples, cfg, 32), 0.0, 1e-12);
  for (double eps : {0.1, 0.2, -0.1, -0.2}) {
    const double e = cp_error_increment(apply_cfo(f.samples, eps, 64), cfg, 32);
    EXPECT_EQ(e > 0, eps > 0);
  }
  // A single-tone symbol has constant envelope 1/N.
  cvec row(64);
  row[3] = 1.0;
  const cvec s = add_cp(idft(row), 16);
  for (double eps : {0.05, 0.15, -0.3}) {
    const double e = cp_error_increment(apply_cfo(s, eps, 64), cfg, 16);
    EXPECT_NEAR(e, std::sin(kTwoPi * eps) / (64.0 * 64.0), 1e-15);
  }
  EXPECT_THROW(cp_error_increment(s, cfg, 0), std::invalid_argument);
  EXPECT_THROW(cp_error_increment(s, cfg, 17), std::invalid_argument);
}

namespace {

// CP followed by two identical N-sample blocks, through channel and CFO; returns the pair.
cvec moose_pair(const cvec& row, const ChannelRealization& ch, double eps) {
  const cvec x = idft(row);
  cvec s = add_cp(x, 16);
  s.insert(s.end(), x.begin(), x.end());
  const cvec rx = apply_cfo(apply_channel(s, ch), eps, 64);
  return cvec(rx.begin() + 16, rx.end());
}

}  // namespace

TEST(Moose, NoiselessAndMultipathInvariant) {
  Rng r(3);
  const auto cfg = FrameConfig::wlan();
  const cvec row = make_moose_training(cfg, r);
  ChannelRealization flat;
  EXPECT_NEAR(moose_estimate(moose_pair(row, flat, 0.0), 64).epsilon_hat, 0.0, 1e-12);
  for (int i = 0; i < 10; ++i) {
    const auto ch = rayleigh_realize(0.5e-6, 50e-9, DelayProfile::exponential, r);
    EXPECT_NEAR(moose_estimate(moose_pair(row, ch, 0.3), 64).epsilon_hat, 0.3, 1e-9);
  }
  for (int i = 0; i < 21; ++i) {
    const double eps = -0.49 + 0.049 * i;
    EXPECT_NEAR(moose_estimate(moose_pair(row, flat, eps), 64).epsilon_hat, eps, 1e-6);
  }
  EXPECT_NEAR(moose_estimate(moose_pair(row, flat, 0.7), 64).epsilon_hat, -0.3, 1e-9);
  EXPECT_THROW(moose_estimate(cvec(100), 64), std::invalid_argument);
}

TEST(Moose, VarianceScaling) {
  Rng r(4);
  const auto cfg = FrameConfig::wlan();
  const cvec row = make_moose_training(cfg, r);
  ChannelRealization flat;
  const cvec clean = moose_pair(row, flat, 0.1);
  double energy = 0.0;
  for (std::size_t n = 0; n < 64; ++n) energy += std::norm(clean[n]);
  for (double snr_db : {10.0, 20.0}) {
    const double sigma2 = energy / 64.0 / std::pow(10.0, snr_db / 10.0);
    std::vector<double> est;
    for (int t = 0; t < 4000; ++t) est.push_back(moose_estimate(awgn(clean, sigma2, r), 64).epsilon_hat);
    const double predicted = sigma2 / (4 * kPi * kPi * energy);
    const double ratio = variance(est) / predicted;
    EXPECT_GT(ratio, 0.5) << snr_db;
    EXPECT_LT(ratio, 2.0) << snr_db;
  }
}

namespace {

struct ScRx {
  cvec stream;
  SchmidlCoxTraining t;
};

ScRx sc_received(double eps, Rng& r) {
  ScRx out{{}, make_schmidl_cox_training(64, r)};
  for (const cvec* row : {&out.t.first, &out.t.second}) {
    const cvec s = add_cp(idft(*row), 16);
    out.stream.insert(out.stream.end(), s.begin(), s.end());
  }
  out.stream = apply_cfo(out.stream, eps, 64);
  return out;
}

}  // namespace

TEST(SchmidlCox, FineStage) {
  Rng r(5);
  const auto cfg = FrameConfig::wlan();
  {
    const auto rx = sc_received(0.0, r);
    EXPECT_NEAR(schmidl_cox_ffo(strip_symbol(rx.stream, cfg, 0), 64).phi_hat, 0.0, 1e-12);
  }
  {
    const auto rx = sc_received(0.8, r);
    const auto f = schmidl_cox_ffo(strip_symbol(rx.stream, cfg, 0), 64);
    EXPECT_NEAR(f.phi_hat, 0.8 * kPi, 1e-9);
    EXPECT_NEAR(f.estimate.epsilon_hat, 0.8, 1e-9);
  }
  {
    const auto rx = sc_received(2.4, r);
    const auto f = schmidl_cox_ffo(strip_symbol(rx.stream, cfg, 0), 64);
    EXPECT_NEAR(f.estimate.epsilon_hat, 0.4, 1e-9);
  }
  for (int i = 0; i < 21; ++i) {
    const double eps = -0.98 + 0.098 * i;
    const auto rx = sc_received(eps, r);
    EXPECT_NEAR(schmidl_cox_ffo(strip_symbol(rx.stream, cfg, 0), 64).estimate.epsilon_hat, eps, 1e-6);
  }
  EXPECT_THROW(schmidl_cox_ffo(cvec(63), 64), std::invalid_argument);
}

TEST(SchmidlCox, IntegerStage) {
  Rng r(6);
  const auto cfg = FrameConfig::wlan();
  const std::vector<long> cands{-4, -3, -2, -1, 0, 1, 2, 3, 4};
  for (double eps : {0.0, 2.4, 2.0, -3.7, 6.1}) {
    const auto rx = sc_received(eps, r);
    const double ef = schmidl_cox_ffo(strip_symbol(rx.stream, cfg, 0), 64).estimate.epsilon_hat;
    const cvec corrected = apply_cfo(rx.stream, -ef, 64);
    const cvec f1 = dft(strip_symbol(corrected, cfg, 0));
    const cvec f2 = dft(strip_symbol(corrected, cfg, 1));
    const auto i = schmidl_cox_ifo(f1, f2, rx.t.v, cands);
    EXPECT_NEAR(i.epsilon_i + ef, eps, 1e-9) << eps;
    EXPECT_NEAR(i.metric, 1.0, 1e-9);
  }
  const std::vector<long> none;
  const cvec z(64);
  EXPECT_THROW(schmidl_cox_ifo(z, z, z, none), std::invalid_argument);
}

TEST(MorelliMengali, WeightsAndRange) {
  for (std::size_t q : {4u, 8u, 16u})
    for (std::size_t p = 1; p < q; ++p) {
      const auto w = mm_weights(q, p);
      double s = 0.0;
      for (double x : w) s += x;
      EXPECT_NEAR(s, 1.0, 1e-12) << q << " " << p;
    }
  EXPECT_THROW(mm_weights(4, 4), std::invalid_argument);
  EXPECT_THROW(mm_weights(4, 0), std::invalid_argument);
  Rng r(7);
  const cvec x = idft(make_mm_training(64, 4, r));
  for (std::size_t n = 0; n < 48; ++n) ASSERT_NEAR(std::abs(x[n] - x[n + 16]), 0.0, 1e-12);
  EXPECT_NEAR(morelli_mengali(x, 4, 3).epsilon_hat, 0.0, 1e-12);
  EXPECT_NEAR(morelli_mengali(apply_cfo(x, 1.7, 64), 4, 3).epsilon_hat, 1.7, 1e-6);
  for (int i = 0; i < 21; ++i) {
    const double eps = -1.95 + 0.195 * i;
    for (std::size_t p : {1u, 2u, 3u})
      EXPECT_NEAR(morelli_mengali(apply_cfo(x, eps, 64), 4, p).epsilon_hat, eps, 1e-6) << eps << " " << p;
  }
  EXPECT_THROW(morelli_mengali(cvec(60), 8, 3), std::invalid_argument);
}

TEST(Classen, Fine) {
  Rng r(8);
  const auto cfg = FrameConfig::wlan(64, 4, 4);
  const auto f = repeated_frame(cfg, r);
  auto est = [&](double eps, std::size_t d) {
    const auto rows = received_rows(apply_cfo(f.samples, eps, 64), cfg);
    return classen_fine(rows[0], rows[d], cfg.pilot_indices, cfg.pilot_values, cfg.pilot_values, d, 0.25)
        .epsilon_hat;
  };
  EXPECT_NEAR(est(0.0, 1), 0.0, 1e-12);
  EXPECT_NEAR(est(0.1, 1), 0.1, 1e-9);
  EXPECT_NEAR(est(0.15, 2), 0.15, 1e-9);
  EXPECT_NEAR(est(0.3, 2), 0.3 - 0.4, 1e-9);
  const auto g = random_frame(cfg, r);
  const auto rows = received_rows(apply_cfo(g.samples, 0.1, 64), cfg);
  EXPECT_NEAR(
      classen_fine(rows[0], rows[1], cfg.pilot_indices, cfg.pilot_values, cfg.pilot_values, 1, 0.25).epsilon_hat,
      0.1, 0.01);
  const std::vector<std::size_t> none;
  EXPECT_THROW(classen_fine(rows[0], rows[1], none, cfg.pilot_values, cfg.pilot_values, 1, 0.25),
               std::invalid_argument);
}

TEST(Classen, Coarse) {
  Rng r(9);
  auto cfg = FrameConfig::wlan(64, 4, 2);
  std::vector<std::size_t> tones(cfg.data_indices);
  tones.insert(tones.end(), cfg.pilot_indices.begin(), cfg.pilot_indices.end());
  cfg.data_indices = tones;
  cfg.pilot_indices.clear();
  cfg.pilot_values.clear();
  cfg.pilot_groups.clear();
  const auto f = random_frame(cfg, r);
  cvec z0, z1;
  for (auto k : tones) {
    z0.push_back(f.grid.symbols[0][k]);
    z1.push_back(f.grid.symbols[1][k]);
  }
  auto run = [&](double eps) { return classen_coarse(apply_cfo(f.samples, eps, 64), cfg, 0, 1, tones, z0, z1, 0.1, 4.0); };
  EXPECT_NEAR(run(0.0).epsilon_hat, 0.0, 1e-12);
  const auto c2 = run(2.0);
  EXPECT_NEAR(c2.epsilon_hat, 2.0, 0.1 + 1e-9);
  EXPECT_GT(c2.metric - c2.runner_up, 0.0);
  for (double eps : {-2.83, 0.4, 3.55, -0.07}) EXPECT_NEAR(run(eps).epsilon_hat, eps, 0.05 + 1e-9) << eps;
  EXPECT_THROW(classen_coarse(f.samples, cfg, 0, 1, tones, z0, z1, 0.0, 4.0), std::invalid_argument);
}

TEST(PilotConj, Noiseless) {
  Rng r(10);
  const auto cfg = FrameConfig::wlan(64, 4, 6);
  const auto f = repeated_frame(cfg, r);
  const auto rows0 = received_rows(f.samples, cfg);
  EXPECT_NEAR(pilot_conj_estimate(tone_series(rows0, 7), 0.25).estimate.epsilon_hat, 0.0, 1e-12);
  const auto rows = received_rows(apply_cfo(f.samples, 0.1, 64), cfg);
  const auto e = pilot_conj_estimate(tone_series(rows, 7), 0.25);
  EXPECT_NEAR(e.phi_hat, 0.7853981633974483, 1e-9);
  EXPECT_NEAR(e.estimate.epsilon_hat, 0.1, 1e-9);
  std::vector<cvec> tones;
  for (auto k : cfg.pilot_indices) tones.push_back(tone_series(rows, k));
  EXPECT_NEAR(pilot_conj_estimate(tones, 0.25).estimate.epsilon_hat, 0.1, 1e-9);
  for (int i = 0; i < 21; ++i) {
    const double eps = -0.39 + 0.039 * i;
    const auto rr = received_rows(apply_cfo(f.samples, eps, 64), cfg);
    EXPECT_NEAR(pilot_conj_estimate(tone_series(rr, 21), 0.25).estimate.epsilon_hat, eps, 1e-6);
  }
  EXPECT_THROW(pilot_conj_estimate(cvec{cplx(1)}, 0.25), std::invalid_argument);
}

TEST(PilotConj, ProductVarianceShrinksWithOffset) {
  Rng r(11);
  const auto cfg = FrameConfig::wlan(64, 16, 400);
  const auto f = random_frame(cfg, r);
  double prev = 1e9;
  for (double eps : {0.4, 0.2, 0.05}) {
    const auto rows = received_rows(apply_cfo(f.samples, eps, 64), cfg);
    const cvec s = tone_series(rows, 7);
    std::vector<double> re;
    cplx mean{};
    std::vector<cplx> prods;
    for (std::size_t l = 1; l < s.size(); ++l) prods.push_back(std::conj(s[l - 1]) * s[l]);
    for (auto p : prods) mean += p;
    mean /= double(prods.size());
    double v = 0.0;
    for (auto p : prods) v += std::norm(p - mean);
    v /= double(prods.size());
    EXPECT_LT(v, prev) << eps;
    prev = v;
  }
}

TEST(PilotConj, VarianceFallsWithBlockLength) {
  Rng r(12);
  auto run = [&](std::size_t len) {
    const double sir = 20.0;
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 / sir));
    std::vector<double> est;
    for (int t = 0; t < 20000; ++t) {
      cvec s(len);
      for (std::size_t l = 0; l < len; ++l) s[l] = std::polar(1.0, 0.3 * double(l)) + cplx(g(r), g(r));
      est.push_back(pilot_conj_estimate(s, 0.25).phi_hat);
    }
    return variance(est);
  };
  const double v10 = run(10), v40 = run(40);
  const double predicted = phase_variance_prediction(20.0, 10) / phase_variance_prediction(20.0, 40);
  EXPECT_NEAR(v10 / v40 / predicted, 1.0, 0.25);
}

TEST(Sir, VariancePredictionMatchesMonteCarlo) {
  Rng r(13);
  for (double sir : {10.0, 30.0, 100.0})
    for (std::size_t len : {4u, 16u}) {
      std::normal_distribution<double> g(0.0, std::sqrt(0.5 / sir));
      std::vector<double> est;
      for (int t = 0; t < 20000; ++t) {
        cvec s(len);
        for (std::size_t l = 0; l < len; ++l) s[l] = std::polar(1.0, -0.2 * double(l)) + cplx(g(r), g(r));
        est.push_back(pilot_conj_estimate(s, 0.0).phi_hat);
      }
      const double ratio = variance(est) / phase_variance_prediction(sir, len);
      EXPECT_GT(ratio, 0.5) << sir << " " << len;
      EXPECT_LT(ratio, 2.0) << sir << " " << len;
    }
  EXPECT_THROW(phase_variance_prediction(10.0, 1), std::invalid_argument);
}

TEST(Sir, ClusteredDominates) {
  EXPECT_TRUE(std::isinf(sir_pilot(PilotScheme::conventional, 0.0, 64)));
  EXPECT_TRUE(std::isinf(sir_pilot(PilotScheme::clustered, 0.0, 64)));
  for (int i = 1; i <= 49; ++i) {
    const double eps = 0.01 * i;
    EXPECT_GT(sir_pilot(PilotScheme::clustered, eps, 64), sir_pilot(PilotScheme::conventional, eps, 64)) << eps;
  }
  // Conventional SIR from its definition.
  const double eps = 0.4;
  double ici = 0.0;
  for (long d = 1; d < 64; ++d) ici += std::norm(ici_coefficient(d, eps, 64));
  EXPECT_NEAR(sir_pilot(PilotScheme::conventional, eps, 64), std::norm(ici_coefficient(0, eps, 64)) / ici, 1e-12);
}

TEST(Clustered, Combine) {
  const auto cfg = FrameConfig::wlan(64, 4, 1, 0.25, PilotScheme::clustered);
  const auto layout = PilotLayout::from(cfg);
  ASSERT_EQ(layout.groups.size(), 2u);
  cvec row(64);
  for (std::size_t i = 0; i < cfg.pilot_indices.size(); ++i) row[cfg.pilot_indices[i]] = cfg.pilot_values[i];
  for (auto v : clustered_combine(row, layout)) EXPECT_NEAR(std::abs(v - cplx(2.0)), 0.0, 1e-15);
  const double eps = 0.4;
  const cvec y = dft(apply_cfo(idft(row), eps, 64));
  const cvec rc = clustered_combine(y, layout);
  // Every pilot tone carries a pair, so the second pair leaks into the first only through far Lambdas;
  // isolate a single pair to compare with the closed form.
  cvec single(64);
  const auto k = layout.groups[0];
  single[k] = 1.0;
  single[k + 1] = -1.0;
  const cvec ys = dft(apply_cfo(idft(single), eps, 64));
  const cplx rs = ys[k] - ys[k + 1];
  const cplx expect = 2.0 * ici_coefficient(0, eps, 64) - ici_coefficient(1, eps, 64) - ici_coefficient(-1, eps, 64);
  EXPECT_NEAR(std::abs(rs - expect), 0.0, 1e-12);
  EXPECT_EQ(rc.size(), 2u);
  const auto conv = PilotLayout::from(FrameConfig::wlan());
  EXPECT_THROW(clustered_combine(row, conv), std::invalid_argument);
}

TEST(Clustered, EstimateNoiselessAndVariance) {
  Rng r(14);
  auto ccfg = FrameConfig::wlan(64, 4, 8, 0.25, PilotScheme::clustered);
  const auto layout = PilotLayout::from(ccfg);
  {
    const auto f = repeated_frame(ccfg, r);
    for (double eps : {0.0, 0.1}) {
      const auto rows = received_rows(apply_cfo(f.samples, eps, 64), ccfg);
      std::vector<cvec> per(layout.groups.size());
      for (const auto& row : rows) {
        const cvec c = clustered_combine(row, layout);
        for (std::size_t i = 0; i < c.size(); ++i) per[i].push_back(c[i]);
      }
      EXPECT_NEAR(clustered_estimate(per, 0.25).estimate.epsilon_hat, eps, 1e-9);
    }
  }
  // One cluster against one isolated tone at Eb/N0 = 10 dB, eps = 0.05.
  auto conv_cfg = FrameConfig::wlan(64, 4, 8);
  std::vector<double> ec, ek;
  for (std::uint64_t t = 0; t < 10000; ++t) {
    Rng tr = trial_rng(99, t);
    {
      const auto f = random_frame(ccfg, tr);
      const auto rows = received_rows(awgn(apply_cfo(f.samples, 0.05, 64), sample_noise_var(10, ccfg), tr), ccfg);
      std::vector<cvec> per(1);
      for (const auto& row : rows) per[0].push_back(clustered_combine(row, layout)[0]);
      ec.push_back(clustered_estimate(per, 0.25).estimate.epsilon_hat);
    }
    {
      const auto f = random_frame(conv_cfg, tr);
      const auto rows = received_rows(awgn(apply_cfo(f.samples, 0.05, 64), sample_noise_var(10, conv_cfg), tr), conv_cfg);
      ek.push_back(pilot_conj_estimate(tone_series(rows, conv_cfg.pilot_groups[0]), 0.25).estimate.epsilon_hat);
    }
  }
  EXPECT_LT(variance(ec), variance(ek));
}
