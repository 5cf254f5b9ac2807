#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "htgnn/checkpoint.hpp"
#include "htgnn/errors.hpp"

namespace htgnn::cli {
namespace {

namespace fs = std::filesystem;

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Workspace : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("htgnn_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  // Small feature-evolving run that trains in well under a second per seed.
  Options quick(const std::string& out) const {
    Options o;
    o.flavor = "feature_evolving";
    o.out = root / out;
    o.data = root / "data";
    o.seeds = "0,1";
    o.overrides = {"synth.num_slices=24", "train.max_epochs=3", "train.patience=1",
                   "train.hidden_dim=4", "train.window=3"};
    return o;
  }

  void generate_data() {
    Options g = quick("");
    g.out = root / "data";
    ASSERT_EQ(cmd_generate(g), 0);
  }

  fs::path root;
};

TEST(ParseList, AcceptsAndRejects) {
  EXPECT_EQ(parse_list("1,2,3", "seeds"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(parse_list("4", "seeds"), (std::vector<std::uint64_t>{4}));
  EXPECT_THROW(parse_list("1,,2", "seeds"), ConfigError);
  EXPECT_THROW(parse_list("x", "seeds"), ConfigError);
  EXPECT_THROW(parse_list("", "seeds"), ConfigError);
}

TEST_F(Workspace, ResolveAppliesOverridesAndSeeds) {
  const RunConfig c = resolve_config(quick("x"));
  EXPECT_EQ(c.train.max_epochs, 3u);
  EXPECT_EQ(c.train.model.window, 3u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1}));
  ASSERT_TRUE(c.synth.has_value());
  EXPECT_EQ(c.synth->num_slices, 24u);

  Options bad = quick("x");
  bad.overrides.push_back("train.learning_rate=\"fast\"");
  EXPECT_THROW(resolve_config(bad), ConfigError);
  Options missing = quick("x");
  missing.config = root / "nope.json";
  EXPECT_THROW(resolve_config(missing), ConfigError);
}

TEST_F(Workspace, TrainWritesLayoutDeterministically) {
  generate_data();
  ASSERT_EQ(cmd_train(quick("a")), 0);
  ASSERT_EQ(cmd_train(quick("b")), 0);
  for (const char* seed : {"seed_0", "seed_1"}) {
    for (const char* file : {"history.csv", "checkpoint.htgnn"}) {
      const fs::path a = root / "a" / seed / file;
      ASSERT_TRUE(fs::exists(a)) << a;
      EXPECT_EQ(read(a), read(root / "b" / seed / file)) << a;
    }
  }
  const auto report = nlohmann::json::parse(read(root / "a" / "report.json"));
  EXPECT_EQ(report["task"], "regression");
  EXPECT_EQ(report["seeds"], nlohmann::json::array({0, 1}));
  EXPECT_TRUE(report["metrics"].contains("mae"));
  EXPECT_TRUE(report["metrics"].contains("rmse"));
  EXPECT_TRUE(fs::exists(root / "a" / "config.json"));
  EXPECT_FALSE(fs::exists(root / "a.partial"));
}

TEST_F(Workspace, RefusesNonEmptyOutputWithoutForce) {
  generate_data();
  ASSERT_EQ(cmd_train(quick("a")), 0);
  EXPECT_THROW(cmd_train(quick("a")), ConfigError);
  Options forced = quick("a");
  forced.force = true;
  EXPECT_EQ(cmd_train(forced), 0);
}

TEST_F(Workspace, EvaluateReproducesTrainReport) {
  generate_data();
  ASSERT_EQ(cmd_train(quick("run")), 0);
  Options e = quick("eval");
  e.checkpoint = root / "run";
  ASSERT_EQ(cmd_evaluate(e), 0);
  const auto trained = nlohmann::json::parse(read(root / "run" / "report.json"));
  const auto evaluated = nlohmann::json::parse(read(root / "eval" / "report.json"));
  EXPECT_EQ(trained["metrics"], evaluated["metrics"]);
}

TEST_F(Workspace, EvaluateRejectsSchemaMismatch) {
  generate_data();
  ASSERT_EQ(cmd_train(quick("run")), 0);
  Options other = quick("");
  other.flavor = "structure_evolving";
  other.overrides = {"synth.num_slices=4"};
  other.out = root / "other";
  ASSERT_EQ(cmd_generate(other), 0);

  Options e = quick("eval");
  e.checkpoint = root / "run" / "seed_0" / "checkpoint.htgnn";
  e.data = root / "other";
  try {
    cmd_evaluate(e);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("only in"), std::string::npos) << err.what();
  }
  EXPECT_FALSE(fs::exists(root / "eval"));
}

TEST_F(Workspace, DefaultsMatchShippedConfigs) {
  for (const char* flavor : {"structure_evolving", "feature_evolving"}) {
    Options o;
    o.flavor = flavor;
    ::testing::internal::CaptureStdout();
    ASSERT_EQ(cmd_defaults(o), 0);
    std::fflush(stdout);
    const std::string printed = ::testing::internal::GetCapturedStdout();
    const fs::path shipped = fs::path(HTGNN_TEST_DATA_DIR) / ".." / ".." / "configs" /
                             (std::string(flavor) + ".json");
    ASSERT_TRUE(fs::exists(shipped)) << shipped;
    EXPECT_EQ(nlohmann::json::parse(read(shipped)),
              nlohmann::json::parse(printed))
        << flavor;
  }
}

}  // namespace
}  // namespace htgnn::cli
