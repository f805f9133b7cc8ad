#include <gtest/gtest.h>

#include <filesystem>

#include "sblem/config.hpp"
#include "sblem/error.hpp"

using namespace sblem;

namespace {

std::filesystem::path configs_dir() { return std::filesystem::path(SBLEM_SOURCE_DIR) / "configs"; }

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ConfigText, ScalarsArraysAndComments) {
  const ConfigTable t = parse_config_text(
      "a = 1\nb = -2.5e-3 # trailing\nc = true\nd = \"x y\"\n[s]\ne = [[1, 2], [3.5, 4]]\n");
  EXPECT_EQ(t.at("").at("a").as_int("a"), 1);
  EXPECT_DOUBLE_EQ(t.at("").at("b").as_double("b"), -2.5e-3);
  EXPECT_TRUE(t.at("").at("c").as_bool("c"));
  EXPECT_EQ(t.at("").at("d").as_string("d"), "x y");
  const auto& e = t.at("s").at("e").as_array("e");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_DOUBLE_EQ(e[1].as_array("e")[0].as_double("e"), 3.5);
}

TEST(ConfigText, MalformedInputReportsLine) {
  for (const char* bad : {"a = \n", "a = [1, 2\n", "a = 1\na = 2\n", "[unterminated\n",
                          "a = 1 2\n", "= 3\n"}) {
    try {
      parse_config_text(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const InvalidArgument& e) {
      EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << bad;
    }
  }
}

TEST(RunConfig, ShippedConfigsParse) {
  for (const char* name : {"default.toml", "scalar.toml", "sweep.toml"}) {
    EXPECT_NO_THROW(load_run_config(configs_dir() / name)) << name;
  }
  const RunConfig cfg = load_run_config(configs_dir() / "default.toml");
  EXPECT_EQ(cfg.seed, 19u);
  ASSERT_TRUE(cfg.model);
  EXPECT_TRUE(cfg.model->random);
  EXPECT_EQ(cfg.model->random_spec.n, 4);
  EXPECT_EQ(cfg.em.max_iters, 2000);
  ASSERT_TRUE(cfg.sim);
  EXPECT_EQ(cfg.sim->sparsity, 4);
  EXPECT_FALSE(cfg.source_text.empty());
}

TEST(RunConfig, ExplicitModel) {
  const RunConfig cfg = load_run_config(configs_dir() / "scalar.toml");
  const SystemModel m = resolve_model(*cfg.model);
  EXPECT_EQ(m.n, 1);
  EXPECT_EQ(m.K, 1);
  EXPECT_DOUBLE_EQ(m.A(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.pi1, 1.0);
}

TEST(RunConfig, RejectsUnknownKeysAndSections) {
  EXPECT_NE(error_of("seed = 1\n[em]\nmax_iter = 3\n").find("max_iter"), std::string::npos);
  EXPECT_NE(error_of("[emm]\nmax_iters = 3\n").find("emm"), std::string::npos);
  EXPECT_NE(error_of("bogus = 1\n").find("bogus"), std::string::npos);
}

TEST(RunConfig, RejectsWrongTypes) {
  EXPECT_FALSE(error_of("[em]\nmax_iters = \"ten\"\n").empty());
  EXPECT_FALSE(error_of("[diagnostics]\nchecks = [\"nope\"]\n").empty());
}

TEST(RunConfig, SeedPropagatesAndCanBeOverridden) {
  const std::string text = "seed = 5\n[model]\nn = 2\nm = 1\nK = 4\n[sim]\nsparsity = 1\n";
  const RunConfig a = parse_run_config(text);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_EQ(resolve_sim(a).seed, 5u);
  const RunConfig b = parse_run_config(text, 42);
  EXPECT_EQ(b.seed, 42u);
  EXPECT_EQ(resolve_sim(b).seed, 42u);
  EXPECT_EQ(b.model->random_spec.seed, 42u);
}

TEST(RunConfig, InitialTheta) {
  const RunConfig cfg = parse_run_config(
      "[model]\nn = 3\nm = 1\nK = 4\n[em]\ninit_gamma = 0.5\ninit_z = \"zeros\"\n");
  const SystemModel m = resolve_model(*cfg.model);
  const Theta th = resolve_initial_theta(cfg.init, m);
  EXPECT_EQ(th.gamma, Vector::Constant(3, 0.5));
  EXPECT_EQ(th.z, Indicator(4, 0));
  const Theta def = resolve_initial_theta(InitSpec{}, m);
  EXPECT_EQ(def.gamma, Vector::Ones(3));
  EXPECT_EQ(def.z, Indicator(4, 1));
}

TEST(RunConfig, MissingFileIsIoError) {
  EXPECT_THROW(load_run_config("/nonexistent/cfg.toml"), IoError);
}
