// Run configuration: key table, file parsing, overrides and round trips.

#include <gtest/gtest.h>

#include <fstream>

#include "sfoc/config.hpp"
#include "test_util.hpp"

namespace sfoc {
namespace {

TEST(Config, DefaultsMatchMatchConfig) {
  const RunConfig c;
  EXPECT_EQ(c.match.template_size, 100);
  EXPECT_EQ(c.match.search_size, 200);
  EXPECT_NO_THROW(c.match.validate());
  EXPECT_TRUE(c.paths.empty());
}

TEST(Config, OverridesParseTypedValues) {
  RunConfig c;
  apply_override(c, "template_size=64");
  apply_override(c, " model = poly2 ");
  apply_override(c, "sigmas_first=1.5, 2.5");
  apply_override(c, "dilation_rates=1,2,4");
  apply_override(c, "first_order_only=yes");
  apply_override(c, "seed=42");
  apply_override(c, "rpc=/tmp/x.rpb");
  EXPECT_EQ(c.match.template_size, 64);
  EXPECT_EQ(c.match.model, RegistrationModel::kPoly2);
  EXPECT_EQ(c.match.sfoc.sigmas_first, (std::vector<double>{1.5, 2.5}));
  EXPECT_EQ(c.match.sfoc.dilation_rates, (std::vector<int>{1, 2, 4}));
  EXPECT_TRUE(c.match.sfoc.first_order_only);
  EXPECT_EQ(c.match.ransac.seed, 42u);
  EXPECT_EQ(c.paths.at("rpc"), "/tmp/x.rpb");
  apply_override(c, "rpc=");
  EXPECT_EQ(c.paths.count("rpc"), 0u);
}

TEST(Config, RejectsBadInput) {
  RunConfig c;
  EXPECT_THROW(apply_override(c, "no_such_key=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "template_size"), ConfigError);
  EXPECT_THROW(apply_override(c, "template_size=12.5"), ConfigError);
  EXPECT_THROW(apply_override(c, "min_score=high"), ConfigError);
  EXPECT_THROW(apply_override(c, "subpixel=maybe"), ConfigError);
  EXPECT_THROW(apply_override(c, "seed=-1"), ConfigError);
  EXPECT_THROW(apply_override(c, "workers=99999999999"), ConfigError);
  EXPECT_THROW(apply_override(c, "descriptor=hog"), ConfigError);
}

TEST(Config, FileThenOverride) {
  const auto dir = testing::scratch_dir("config_file");
  std::ofstream(dir / "run.cfg") << "# comment line\n"
                                    "template_size = 80   # trailing comment\n"
                                    "\n"
                                    "search_size = 160\n"
                                    "ransac_threshold = 2.5\n";
  RunConfig c;
  load_run_config(c, dir / "run.cfg");
  EXPECT_EQ(c.match.template_size, 80);
  EXPECT_EQ(c.match.search_size, 160);
  EXPECT_EQ(c.match.ransac.inlier_threshold, 2.5);
  apply_override(c, "search_size=200");
  EXPECT_EQ(c.match.search_size, 200);
}

TEST(Config, FileErrorsNameTheLine) {
  const auto dir = testing::scratch_dir("config_errors");
  std::ofstream(dir / "bad.cfg") << "template_size = 80\n\nbogus = 3\n";
  RunConfig c;
  try {
    load_run_config(c, dir / "bad.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg:3"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "noeq.cfg") << "template_size 80\n";
  EXPECT_THROW(load_run_config(c, dir / "noeq.cfg"), ConfigError);
  EXPECT_THROW(load_run_config(c, dir / "missing.cfg"), IoError);
}

TEST(Config, FormatRoundTrips) {
  RunConfig c;
  apply_override(c, "min_score=0.123456789012345");
  apply_override(c, "sigmas_second=1.1,3.3");
  apply_override(c, "model=rfm_affine");
  apply_override(c, "out_dir=/tmp/out");
  const auto dir = testing::scratch_dir("config_round_trip");
  std::ofstream(dir / "dump.cfg") << format_run_config(c);
  RunConfig back;
  load_run_config(back, dir / "dump.cfg");
  EXPECT_EQ(format_run_config(back), format_run_config(c));
  EXPECT_EQ(back.match.min_score, 0.123456789012345);
  EXPECT_EQ(back.match.model, RegistrationModel::kRfmAffine);
  EXPECT_EQ(back.paths.at("out_dir"), "/tmp/out");
  // Every documented key appears exactly once in the dump.
  const std::string text = format_run_config(c);
  for (const auto& key : config_keys()) EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
}

}  // namespace
}  // namespace sfoc
