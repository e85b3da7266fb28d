#include "rta/config.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

namespace rta {
namespace {

GTEST_TEST(Config, DefaultsRoundTrip) {
  const RunConfig d;
  const std::string text = dump_config(d);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(dump_config(back), text);
  // A second pass is a fixed point as well.
  EXPECT_EQ(dump_config(parse_config(dump_config(back))), text);
}

GTEST_TEST(Config, EditedValuesRoundTrip) {
  RunConfig c;
  c.episode.seed = 1234567890123ull;
  c.episode.rta_enabled = false;
  c.episode.constraints.a_max = 0.0123456789;
  c.episode.constraints.fov = 0.1 + 0.2;
  c.episode.specs[3].slack_weight.reset();
  c.episode.specs[7].alpha = {{0.3, 1e-7}, {0.7, 0.0}};
  c.lqr.Q(2, 4) = 1.0 / 3.0;
  c.lqr.Q(4, 2) = 1.0 / 3.0;
  c.pd.target_q = Quaternion::from_axis_angle(Vec3(1, -2, 0.5), 1.3);
  c.pd.sun_axis = Vec3(0, 0, 1);
  c.batch.jobs = 4;
  const std::string text = dump_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.episode.seed, c.episode.seed);
  EXPECT_EQ(*back.episode.constraints.a_max, *c.episode.constraints.a_max);
  EXPECT_EQ(back.episode.constraints.fov, c.episode.constraints.fov);
  EXPECT_FALSE(back.episode.specs[3].slack_weight.has_value());
  EXPECT_EQ(back.episode.specs[7].alpha[0].c3, 1e-7);
  EXPECT_EQ(back.lqr.Q, c.lqr.Q);
  EXPECT_EQ(back.pd.target_q.v, c.pd.target_q.v);
  EXPECT_EQ(back.pd.target_q.s, c.pd.target_q.s);
  ASSERT_TRUE(back.pd.sun_axis.has_value());
  EXPECT_EQ(*back.pd.sun_axis, Vec3(0, 0, 1));
}

GTEST_TEST(Config, PartialFileOverridesDefaults) {
  const RunConfig c = parse_config(R"({"episode": {"seed": 9, "max_time": 500},
                                       "barriers": {"speed": {"slack_weight": 5.0}},
                                       "bridge_timeout": 2})");
  EXPECT_EQ(c.episode.seed, 9u);
  EXPECT_EQ(c.episode.max_time, 500.0);
  EXPECT_EQ(*c.episode.specs[1].slack_weight, 5.0);
  EXPECT_EQ(c.bridge_timeout, 2.0);
  const RunConfig d;
  EXPECT_EQ(c.episode.policy_period, d.episode.policy_period);
  EXPECT_EQ(c.episode.specs[1].alpha[0].c1, d.episode.specs[1].alpha[0].c1);
}

std::string ErrorOf(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

GTEST_TEST(Config, UnknownKeysRejectedWithPath) {
  EXPECT_NE(ErrorOf(R"({"episod": {}})").find("episod: unknown key"), std::string::npos);
  EXPECT_NE(ErrorOf(R"({"episode": {"sed": 1}})").find("episode.sed: unknown key"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"({"barriers": {"warp_drive": {}}})").find("barriers.warp_drive"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"({"barriers": {"psm": {"gain": 1}}})").find("barriers.psm.gain"),
            std::string::npos);
}

GTEST_TEST(Config, TypeAndShapeErrors) {
  EXPECT_NE(ErrorOf(R"({"episode": {"seed": -1}})"), "");
  EXPECT_NE(ErrorOf(R"({"episode": {"seed": 1.5}})"), "");
  EXPECT_NE(ErrorOf(R"({"episode": {"rta_enabled": 1}})"), "");
  EXPECT_NE(ErrorOf(R"({"episode": {"max_time": "long"}})").find("episode.max_time"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"({"vehicle": {"inertia": [1, 2]}})"), "");
  EXPECT_NE(ErrorOf(R"({"lqr": {"R": [[1, 0, 0], [0, 1, 0]]}})"), "");
  EXPECT_NE(ErrorOf(R"({"pd": {"target_q": [0, 0, 0, 2]}})"), "");
  EXPECT_NE(ErrorOf(R"({"barriers": {"temperature": {"alpha": [[1, 2, 3]]}}})"), "");
  EXPECT_NE(ErrorOf(R"({"episode": 5})").find("expected a table"), std::string::npos);
  EXPECT_NE(ErrorOf("[1, 2]"), "");
}

GTEST_TEST(Config, MalformedTextAndSemanticErrors) {
  EXPECT_NE(ErrorOf("{\"episode\": {").find("parse error"), std::string::npos);
  EXPECT_NE(ErrorOf(""), "");
  // Safe separation never takes a slack variable.
  EXPECT_NE(ErrorOf(R"({"barriers": {"collision": {"slack_weight": 1e12}}})"), "");
  EXPECT_NE(ErrorOf(R"({"barriers": {"temperature": {"relative_degree": 2, "alpha": [[0.1, 0]]}}})"),
            "");
  EXPECT_NE(ErrorOf(R"({"episode": {"policy_period": 2.5}})"), "");
  EXPECT_NE(ErrorOf(R"({"batch": {"episodes": 0}})"), "");
  EXPECT_NE(ErrorOf(R"({"check_filter": {"min_optimal_fraction": 1.5}})"), "");
}

GTEST_TEST(Config, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "/rta_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"batch": {"episodes": 7}})";
  }
  EXPECT_EQ(load_config(path).batch.episodes, 7);
  std::remove(path.c_str());
  EXPECT_THROW(load_config(path), ConfigError);
}

}  // namespace
}  // namespace rta
