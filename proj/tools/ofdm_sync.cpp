#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ofdmsync/ofdmsync.hpp"

using namespace ofdmsync;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> scheme, mod, channel, ebn0, cp, preset;
  std::optional<double> epsilon;
  std::optional<std::size_t> nsub, symbols;
  std::optional<std::string> min_bits, min_errors, max_bits;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value experiment file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override one key, key=value (repeatable, applied last)");
  app->add_option("--out", c.out, "output CSV path (default: stdout)");
  app->add_option("--seed", c.seed, "master seed (fallback: $OFDM_SYNC_SEED, then config, then 1)");
  app->add_option("--workers", c.workers, "worker threads")->check(CLI::Range(1u, 1024u));
  app->add_option("--preset", c.preset, "table preset (5-2 ... 5-13) or custom");
  app->add_option("--scheme", c.scheme,
                  "none|cp|moose|sc|mm|classen|type1|type2_fixed|type2_dual|type2_dual_clustered");
  app->add_option("--epsilon", c.epsilon, "normalized CFO");
  app->add_option("--mod", c.mod, "bpsk|qpsk|16qam|64qam");
  app->add_option("--channel", c.channel, "awgn | rayleigh:<tau>[us|ns][:exponential|uniform]");
  app->add_option("--ebn0", c.ebn0, "Eb/N0 grid in dB, a:step:b or a,b,c");
  app->add_option("--nsub", c.nsub, "FFT size");
  app->add_option("--cp", c.cp, "guard fraction, e.g. 0.25 or 1/4");
  app->add_option("--symbols", c.symbols, "OFDM symbols per frame");
  app->add_option("--min-bits", c.min_bits, "minimum simulated bits per point (1e6 notation accepted)");
  app->add_option("--min-errors", c.min_errors, "minimum bit errors per point");
  app->add_option("--max-bits", c.max_bits, "bit budget per point");
}

template <class T>
std::string str(const T& v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

/// Defaults, then $OFDM_SYNC_SEED, then the config file, then flags, then --set.
ExperimentSpec resolve(const Common& c) {
  ExperimentSpec spec;
  if (const char* env = std::getenv("OFDM_SYNC_SEED"); env && *env) {
    try {
      apply_setting(spec, "seed", env);
    } catch (const ConfigError& e) {
      throw UsageError(std::string("OFDM_SYNC_SEED: ") + e.what());
    }
  }
  if (!c.config.empty()) spec = load_config(c.config, spec);
  std::vector<std::tuple<std::string, std::string, std::size_t>> kv;
  auto put = [&](const char* key, const auto& opt) {
    if (opt) kv.emplace_back(key, str(*opt), 0);
  };
  put("preset", c.preset);
  put("nsub", c.nsub);
  put("cp", c.cp);
  put("mod", c.mod);
  put("symbols", c.symbols);
  put("channel", c.channel);
  put("epsilon", c.epsilon);
  put("scheme", c.scheme);
  put("ebn0", c.ebn0);
  put("min_bits", c.min_bits);
  put("min_errors", c.min_errors);
  put("max_bits", c.max_bits);
  put("seed", c.seed);
  put("workers", c.workers);
  for (const auto& s : c.sets) {
    auto [k, v] = split_setting(s);
    kv.emplace_back(k, v, 0);
  }
  apply_settings(spec, kv);
  if (spec.min_bits > spec.max_bits) spec.max_bits = spec.min_bits;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const double exact = spec.cfg.cp_fraction * static_cast<double>(spec.cfg.n_sub);
  if (std::abs(exact - std::round(exact)) > 1e-9)
    std::fprintf(stderr, "warning: cp %g x %zu = %g samples, rounded to %zu (G = %g)\n", spec.cfg.cp_fraction,
                 spec.cfg.n_sub, exact, spec.cfg.cp_length(), spec.cfg.guard_ratio());
  return spec;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }
  void header(const std::string& verb, const ExperimentSpec& spec) {
    os() << "# verb=" << verb << "\n";
    for (const auto& [k, v] : describe(spec))
      if (k != "workers") os() << "# " << k << "=" << v << "\n";
  }
  void finish() {
    os().flush();
    if (!os()) throw std::runtime_error("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string num(double x, const char* f = "%.10g") {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int ber_sweep(const Common& c) {
  const ExperimentSpec spec = resolve(c);
  Output out(c.out);
  out.header("ber-sweep", spec);
  auto& os = out.os();
  os << "ebn0_db,bits,errors,ber,scheme,channel,epsilon,seed\n";
  for (double e : spec.ebn0_grid) {
    const BerPoint p = run_ber_point(spec, e);
    os << num(e) << ',' << p.bits << ',' << p.errors << ',' << num(p.ber(), "%.6e") << ','
       << to_string(spec.scheme) << ',' << to_string(spec.channel) << ',' << num(spec.epsilon) << ','
       << spec.master_seed << '\n';
    if (p.low_confidence)
      std::fprintf(stderr, "warning: %g dB stopped at the bit budget with %llu errors (low confidence)\n", e,
                   static_cast<unsigned long long>(p.errors));
  }
  out.finish();
  return 0;
}

int cfo_trace(const Common& c, double point, std::uint64_t frame) {
  const ExperimentSpec spec = resolve(c);
  Output out(c.out);
  out.header("cfo-trace", spec);
  auto& os = out.os();
  os << "# ebn0_db=" << num(point) << "\n# frame=" << frame << "\n";
  os << "symbol,theta_hat,theta_err,eps_hat,mode\n";
  for (const auto& r : run_trace(spec, point, frame))
    os << r.symbol << ',' << num(r.theta_hat) << ',' << num(r.theta_err) << ',' << num(r.eps_hat) << ',' << r.mode
       << '\n';
  out.finish();
  return 0;
}

int constellation(const Common& c, double point, const std::string& stage, std::uint64_t frame) {
  const ExperimentSpec spec = resolve(c);
  std::vector<Stage> stages;
  if (stage == "all") {
    stages = {Stage::pre_pll, Stage::post_pll, Stage::post_phase_correction};
  } else {
    try {
      stages = {parse_stage(stage)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  Output out(c.out);
  out.header("constellation", spec);
  auto& os = out.os();
  os << "# ebn0_db=" << num(point) << "\n# frame=" << frame << "\n";
  os << "stage,symbol,subcarrier,re,im\n";
  for (Stage st : stages) {
    const auto pts = capture_constellation(spec, st, point, frame);
    std::fprintf(stderr, "%s: rms distance to ideal points %.4f\n", to_string(st).c_str(),
                 cloud_rms(pts, spec.cfg.mod_order));
    for (const auto& p : pts)
      os << to_string(p.stage) << ',' << p.symbol << ',' << p.subcarrier << ',' << num(p.value.real(), "%.6f") << ','
         << num(p.value.imag(), "%.6f") << '\n';
  }
  out.finish();
  return 0;
}

int acquire(const Common& c, double point, int runs) {
  const ExperimentSpec spec = resolve(c);
  if (!is_loop_scheme(spec.scheme)) throw UsageError("acquire needs a tracking scheme (type1, type2_*)");
  Output out(c.out);
  out.header("acquire", spec);
  auto& os = out.os();
  os << "# ebn0_db=" << num(point) << "\n";
  os << "run,seed,scheme,lock_symbols,lock_time_us,theta_final\n";
  std::vector<std::optional<Acquisition>> res(static_cast<std::size_t>(runs));
  parallel_for(res.size(), spec.workers, [&](std::size_t i) {
    ExperimentSpec s = spec;
    s.workers = 1;
    s.master_seed = spec.master_seed + i;
    res[i] = measure_acquisition(s, 0, point);
  });
  for (std::size_t i = 0; i < res.size(); ++i) {
    os << i << ',' << spec.master_seed + i << ',' << to_string(spec.scheme) << ',';
    if (res[i]) os << res[i]->symbols << ',' << num(res[i]->seconds * 1e6) << ',' << num(res[i]->theta_final) << '\n';
    else os << "no-lock,no-lock,nan\n";
  }
  out.finish();
  return 0;
}

int table(const Common& c, const std::string& id, int acq_seeds) {
  const auto& ids = table_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw UsageError("unknown table '" + id + "'");
  const ExperimentSpec spec = resolve(c);
  TableOptions o;
  o.seed = spec.master_seed;
  o.workers = spec.workers;
  o.min_bits = spec.min_bits;
  o.min_errors = spec.min_errors;
  o.max_bits = spec.max_bits;
  o.acquisition_seeds = acq_seeds;
  const auto rows = reproduce_table(id, o);
  Output out(c.out);
  auto& os = out.os();
  os << "# verb=table\n# table=" << id << "\n# seed=" << o.seed << "\n# min_bits=" << o.min_bits
     << "\n# min_errors=" << o.min_errors << "\n# max_bits=" << o.max_bits << "\n";
  os << "table,row,column,measured,paper,tolerance,verdict\n";
  int pass = 0, fail = 0;
  for (const auto& r : rows) {
    os << r.table << ',' << r.row << ',' << r.column << ',' << num(r.measured, "%.6g") << ',' << num(r.reference, "%.6g")
       << ',' << r.tolerance << ',' << r.verdict << '\n';
    pass += r.verdict == "PASS";
    fail += r.verdict == "FAIL";
  }
  out.finish();
  std::fprintf(stderr, "table %s: %d PASS, %d FAIL, %zu rows\n", id.c_str(), pass, fail, rows.size());
  return 0;
}

int estimator_bench(const Common& c, const std::string& names, const std::string& eps_grid, int trials,
                    double point) {
  const ExperimentSpec base = resolve(c);
  std::vector<Scheme> schemes;
  std::vector<double> eps;
  try {
    std::stringstream ss(names);
    for (std::string n; std::getline(ss, n, ',');) schemes.push_back(parse_scheme(n));
    eps = parse_grid(eps_grid);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Output out(c.out);
  out.header("estimator-bench", base);
  auto& os = out.os();
  os << "# ebn0_db=" << num(point) << "\n# trials=" << trials << "\n";
  os << "estimator,epsilon,ebn0_db,trials,mean_eps_hat,bias,rmse\n";
  for (Scheme sc : schemes) {
    for (double e : eps) {
      ExperimentSpec s = base;
      s.scheme = sc;
      s.epsilon = e;
      std::vector<double> est(static_cast<std::size_t>(trials));
      parallel_for(est.size(), s.workers, [&](std::size_t i) { est[i] = simulate_frame(s, point, i).eps_hat; });
      double mean = 0.0, mse = 0.0;
      for (double x : est) {
        mean += x;
        mse += (x - e) * (x - e);
      }
      mean /= static_cast<double>(trials);
      mse /= static_cast<double>(trials);
      os << to_string(sc) << ',' << num(e) << ',' << num(point) << ',' << trials << ',' << num(mean, "%.8g") << ','
         << num(mean - e, "%.3e") << ',' << num(std::sqrt(mse), "%.3e") << '\n';
    }
  }
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OFDM carrier frequency offset synchronization simulator"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Common sweep_c, trace_c, const_c, acq_c, table_c, bench_c;
  double trace_point = kAcquisitionEbN0, const_point = 15.0, acq_point = kAcquisitionEbN0, bench_point = 20.0;
  std::uint64_t trace_frame = 0, const_frame = 0;
  std::string stage = "all";
  int runs = 1, acq_seeds = 20, trials = 50;
  std::string table_id, estimators = "cp,moose,sc,mm,classen", eps_grid = "-0.45:0.15:0.45";

  auto* sweep = app.add_subcommand("ber-sweep", "BER over the Eb/N0 grid");
  add_common(sweep, sweep_c);

  auto* trace = app.add_subcommand("cfo-trace", "per-symbol loop trace of one frame");
  add_common(trace, trace_c);
  trace->add_option("--point", trace_point, "Eb/N0 of the frame in dB")->capture_default_str();
  trace->add_option("--frame", trace_frame, "frame index")->capture_default_str();

  auto* cons = app.add_subcommand("constellation", "equalized data-subcarrier values of one frame");
  add_common(cons, const_c);
  cons->add_option("--point", const_point, "Eb/N0 of the frame in dB")->capture_default_str();
  cons->add_option("--stage", stage, "pre_pll|post_pll|post_phase_correction|all")->capture_default_str();
  cons->add_option("--frame", const_frame, "frame index")->capture_default_str();

  auto* acq = app.add_subcommand("acquire", "symbols until the loop estimate settles");
  add_common(acq, acq_c);
  acq->add_option("--point", acq_point, "Eb/N0 in dB")->capture_default_str();
  acq->add_option("--runs", runs, "independent seeds, seed .. seed+runs-1")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();

  auto* tab = app.add_subcommand("table", "reproduce one results table with verdicts");
  add_common(tab, table_c);
  tab->add_option("id", table_id, "5-2 ... 5-13")->required();
  tab->add_option("--acq-seeds", acq_seeds, "seeds per scheme for 5-8/5-9")
      ->check(CLI::Range(1, 10000))
      ->capture_default_str();

  auto* bench = app.add_subcommand("estimator-bench", "bias and RMSE of the one-shot estimators");
  add_common(bench, bench_c);
  bench->add_option("--estimators", estimators, "comma-separated scheme names")->capture_default_str();
  bench->add_option("--eps-grid", eps_grid, "offsets, a:step:b or a,b,c")->capture_default_str();
  bench->add_option("--trials", trials, "frames per offset")->check(CLI::Range(1, 1000000))->capture_default_str();
  bench->add_option("--point", bench_point, "Eb/N0 in dB")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*sweep) return ber_sweep(sweep_c);
    if (*trace) return cfo_trace(trace_c, trace_point, trace_frame);
    if (*cons) return constellation(const_c, const_point, stage, const_frame);
    if (*acq) return acquire(acq_c, acq_point, runs);
    if (*tab) return table(table_c, table_id, acq_seeds);
    if (*bench) return estimator_bench(bench_c, estimators, eps_grid, trials, bench_point);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
