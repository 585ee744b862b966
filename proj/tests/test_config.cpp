#include <gtest/gtest.h>

#include <sstream>

#include "ofdmsync/config.hpp"

using namespace ofdmsync;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyGivesDefaults) {
  const auto s = parse_config_text("# nothing here\n\n   \n");
  EXPECT_EQ(s.cfg.n_sub, 64u);
  EXPECT_DOUBLE_EQ(s.cfg.cp_fraction, 0.25);
  EXPECT_DOUBLE_EQ(s.epsilon, 0.4);
  EXPECT_EQ(s.scheme, Scheme::type2_dual);
  EXPECT_EQ(s.preset, "custom");
  EXPECT_NO_THROW(s.validate());
}

TEST(Config, ValuesAndComments) {
  const auto s = parse_config_text(
      "epsilon = 0.0   # offset-free\n"
      "mod=16\n"
      "cp=1/8\n"
      "min_bits=2e5\n"
      "scheme=moose\n"
      "channel=awgn\n");
  EXPECT_DOUBLE_EQ(s.epsilon, 0.0);
  EXPECT_EQ(s.cfg.mod_order, 16);
  EXPECT_DOUBLE_EQ(s.cfg.cp_fraction, 0.125);
  EXPECT_EQ(s.min_bits, 200000u);
  EXPECT_EQ(s.scheme, Scheme::moose);
  EXPECT_EQ(s.channel.kind, ChannelSpec::Kind::awgn);
}

TEST(Config, ErrorsCiteLineAndKey) {
  EXPECT_EQ(error_of("epsilon=abc\n"), "line 1: epsilon: expected a number, got 'abc'");
  EXPECT_EQ(error_of("# c\nfoo=1\n"), "line 2: unknown key 'foo'");
  EXPECT_NE(error_of("epsilon\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("seed=1\nmin_bits=-3\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("scheme=magic\n").find("magic"), std::string::npos);
  EXPECT_NE(error_of("mod=8\n").find("line 1"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/x.cfg"), ConfigError);
}

TEST(Config, Grid) {
  EXPECT_EQ(parse_grid("0:5:30"), (std::vector<double>{0, 5, 10, 15, 20, 25, 30}));
  EXPECT_EQ(parse_grid("7, 3,11"), (std::vector<double>{7, 3, 11}));
  EXPECT_EQ(parse_grid("12"), (std::vector<double>{12}));
  EXPECT_EQ(parse_grid("0:0.25:1").size(), 5u);
  EXPECT_THROW(parse_grid("0:0:3"), std::invalid_argument);
  EXPECT_THROW(parse_grid("a,b"), std::invalid_argument);
}

TEST(Config, Channel) {
  const auto r = parse_channel("rayleigh:1.5us");
  EXPECT_EQ(r.kind, ChannelSpec::Kind::rayleigh);
  EXPECT_NEAR(r.tau_max, 1.5e-6, 1e-15);
  EXPECT_EQ(to_string(r), "rayleigh:1.5us:exponential");
  EXPECT_NEAR(parse_channel("rayleigh:500ns:uniform").tau_max, 0.5e-6, 1e-15);
  EXPECT_EQ(to_string(parse_channel("awgn")), "awgn");
  EXPECT_THROW(parse_channel("rician:1us"), std::invalid_argument);
  EXPECT_THROW(parse_channel("rayleigh:-1us"), std::invalid_argument);
}

TEST(Config, DescribeRoundTrip) {
  auto s = parse_config_text("preset=5-11\nseed=99\nalpha_leak=0.25\nebn0=3,9\n");
  std::ostringstream text;
  for (const auto& [k, v] : describe(s)) text << k << "=" << v << "\n";
  const auto back = parse_config_text(text.str());
  EXPECT_EQ(describe(back), describe(s));
  EXPECT_EQ(back.master_seed, 99u);
  EXPECT_EQ(back.cfg.mod_order, 16);
  EXPECT_DOUBLE_EQ(back.rx.dual.alpha_leak, 0.25);
}

TEST(Config, PresetAppliesBeforeOtherKeys) {
  const auto s = parse_config_text("epsilon=0.1\npreset=5-10\n");
  EXPECT_EQ(s.preset, "5-10");
  EXPECT_DOUBLE_EQ(s.epsilon, 0.1);
  EXPECT_EQ(s.cfg.symbols_per_frame, 280u);
  EXPECT_NE(error_of("preset=5-99\n").find("5-99"), std::string::npos);
}

TEST(Config, EveryKeyRoundTripsItsOwnValue) {
  const ExperimentSpec base = preset_spec("5-12");
  for (const auto& k : config_keys()) {
    ExperimentSpec s = base;
    apply_setting(s, k.name, k.get(base));
    EXPECT_EQ(k.get(s), k.get(base)) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
  }
}
