#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "htgnn/data.hpp"
#include "htgnn/errors.hpp"
#include "htgnn/eval.hpp"

namespace htgnn {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("htgnn_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

SynthSpec small_structure(std::uint64_t seed) {
  SynthSpec s = SynthSpec::defaults(Flavor::kStructureEvolving);
  s.num_slices = 4;
  s.node_counts = {{"author", 20}, {"paper", 10}, {"field", 4}, {"institution", 4}};
  s.signal = {{"communities", 4}};
  s.seed = seed;
  return s;
}

TEST_F(TempDir, SaveLoadRoundTrip) {
  const auto g = generate(small_structure(1));
  save_htg(g, dir);
  EXPECT_EQ(load_htg(dir), g);
  SynthSpec fe = SynthSpec::defaults(Flavor::kFeatureEvolving);
  fe.num_slices = 5;
  fe.feature_dim = 3;
  const auto h = generate(fe);
  fs::remove_all(dir);
  save_htg(h, dir);
  EXPECT_EQ(load_htg(dir), h);
}

TEST_F(TempDir, MissingMetaIsParseError) {
  fs::create_directories(dir);
  try {
    load_htg(dir);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("meta.json"), std::string::npos) << e.what();
  }
}

TEST_F(TempDir, ShortFeatureRowNamesTypeAndWidth) {
  const auto g = generate(small_structure(2));
  save_htg(g, dir);
  const fs::path file = dir / "slices" / "t1" / "features_field.csv";
  std::ifstream in(file);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  in.close();
  row = row.substr(0, row.rfind(','));
  std::ofstream(file) << header << "\n" << row << "\n";
  try {
    load_htg(dir);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("field"), std::string::npos) << msg;
    EXPECT_NE(msg.find("8"), std::string::npos) << msg;
  }
}

TEST_F(TempDir, MalformedRowNamesFileAndLine) {
  const auto g = generate(small_structure(3));
  save_htg(g, dir);
  const fs::path file = dir / "slices" / "t2" / "edges_author__writes__paper.csv";
  std::size_t lines = 0;
  {
    std::ifstream in(file);
    for (std::string line; std::getline(in, line);) ++lines;
  }
  std::ofstream(file, std::ios::app) << "12,notanumber\n";
  try {
    load_htg(dir);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("edges_author__writes__paper.csv"), std::string::npos) << msg;
    EXPECT_NE(msg.find(".csv:" + std::to_string(lines + 1)), std::string::npos) << msg;
  }
}

TEST(Split, TenSlices) {
  const SplitSpec s = split(10, {}, 1);
  EXPECT_EQ(s.train_begin, 0u);
  EXPECT_EQ(s.train_end, 8u);
  EXPECT_EQ(s.val_begin, 8u);
  EXPECT_EQ(s.val_end, 9u);
  EXPECT_EQ(s.test_begin, 9u);
  EXPECT_EQ(s.test_end, 10u);
  EXPECT_EQ(s.supervised_begin(s.train_begin), 1u);
}

TEST(Split, EpidemicLayout) {
  const SplitSpec s = split(304, {}, 7);
  EXPECT_EQ(s.train_end - s.train_begin, 244u);
  EXPECT_EQ(s.val_end - s.val_begin, 30u);
  EXPECT_EQ(s.test_end - s.test_begin, 30u);
  // The first seven days only serve as lookback.
  EXPECT_EQ(s.train_end - s.supervised_begin(s.train_begin), 237u);
  EXPECT_EQ(s.supervised_begin(s.val_begin), s.val_begin);
}

TEST(Split, DisjointOrderedTargets) {
  for (std::size_t t = 5; t < 60; ++t) {
    for (std::size_t w = 1; w < 5; ++w) {
      SplitSpec s;
      try {
        s = split(t, {}, w);
      } catch (const ConfigError&) {
        continue;
      }
      EXPECT_LT(s.supervised_begin(s.train_begin), s.train_end);
      EXPECT_EQ(s.train_end, s.val_begin);
      EXPECT_EQ(s.val_end, s.test_begin);
      EXPECT_EQ(s.test_end, t);
      EXPECT_LT(s.val_begin, s.val_end);
      EXPECT_LT(s.test_begin, s.test_end);
    }
  }
}

TEST(Split, TooShortStatesMinimum) {
  try {
    split(3, {}, 3);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("at least"), std::string::npos) << e.what();
  }
}

TEST(SynthSpec, RejectsBadValues) {
  SynthSpec s = SynthSpec::defaults(Flavor::kStructureEvolving);
  s.densities["activity"] = 0.0;
  EXPECT_THROW(s.resolved(), ConfigError);
  s = SynthSpec::defaults(Flavor::kStructureEvolving);
  s.node_counts["paper"] = 0;
  EXPECT_THROW(s.resolved(), ConfigError);
  s = SynthSpec::defaults(Flavor::kStructureEvolving);
  s.signal["bogus"] = 1.0;
  EXPECT_THROW(s.resolved(), ConfigError);
  s = SynthSpec::defaults(Flavor::kFeatureEvolving);
  s.signal["persistence"] = 1.0;
  EXPECT_THROW(s.resolved(), ConfigError);
}

TEST(StructureEvolving, DeterministicAndValid) {
  const auto a = generate(small_structure(7));
  const auto b = generate(small_structure(7));
  const auto c = generate(small_structure(8));
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  EXPECT_TRUE(validate(a).empty());
  EXPECT_EQ(a.meta.node_types.size(), 4u);
  EXPECT_TRUE(validate_schema(a.meta).empty());
}

TEST(StructureEvolving, FreshPapersEverySlice) {
  const auto g = generate(small_structure(9));
  const std::size_t paper = g.meta.node_type_index("paper");
  std::set<NodeId> seen;
  for (const auto& s : g.slices) {
    EXPECT_FALSE(s.nodes[paper].empty());
    for (NodeId id : s.nodes[paper]) EXPECT_TRUE(seen.insert(id).second) << id;
  }
}

// Shared-community heuristic: authors who shared an institution, a paper
// field or a coauthor in the observed slices are likely to collaborate next.
TEST(StructureEvolving, PlantedSignalVisibleToHeuristic) {
  SynthSpec spec = SynthSpec::defaults(Flavor::kStructureEvolving);
  spec.seed = 3;
  const auto g = generate(spec);
  const SchemaMeta& m = g.meta;
  const std::size_t writes = m.relation_index("author__writes__paper");
  const std::size_t topic = m.relation_index("paper__has_topic__field");
  const std::size_t affiliated = m.relation_index("author__affiliated_with__institution");
  const std::size_t coauthor = m.relation_index("author__coauthor__author");

  std::vector<double> scores;
  std::vector<double> labels;
  std::mt19937_64 rng(1);
  for (std::size_t t = 2; t + 1 < g.num_slices(); ++t) {
    // Per author: counts of institutions, fields and coauthors in slices t-2..t.
    std::map<NodeId, std::map<NodeId, double>> profile;
    for (std::size_t k = t - 2; k <= t; ++k) {
      const GraphSlice& s = g.slices[k];
      std::map<NodeId, std::vector<NodeId>> fields_of_paper;
      for (const auto& [p, f] : s.edges[topic]) fields_of_paper[p].push_back(f);
      for (const auto& [a, p] : s.edges[writes]) {
        for (NodeId f : fields_of_paper[p]) profile[a][f] += 1.0;
      }
      for (const auto& [a, i] : s.edges[affiliated]) profile[a][i] += 1.0;
      for (const auto& [a, b] : s.edges[coauthor]) profile[a][b] += 1.0;
    }
    const auto samples = sample_links(new_links(g, "author__coauthor__author", t), g,
                                      "author__coauthor__author", t, 1.0, rng);
    for (const LinkSample& ls : samples) {
      const auto& pu = profile[ls.pair.first];
      const auto& pv = profile[ls.pair.second];
      double score = 0.0;
      for (const auto& [key, x] : pu) {
        const auto it = pv.find(key);
        if (it != pv.end()) score += std::min(x, it->second);
      }
      scores.push_back(score);
      labels.push_back(ls.label);
    }
  }
  ASSERT_GT(scores.size(), 20u);
  EXPECT_GT(auc(scores, labels), 0.6);
}

TEST(FeatureEvolving, StaticStructureAndDeterminism) {
  SynthSpec s = SynthSpec::defaults(Flavor::kFeatureEvolving);
  s.seed = 4;
  const auto a = generate(s);
  const auto b = generate(s);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(validate(a).empty());
  EXPECT_EQ(a.num_slices(), 60u);
  EXPECT_EQ(a.slices.front().nodes, a.slices.back().nodes);
  EXPECT_EQ(a.slices.front().edges, a.slices.back().edges);
  EXPECT_NE(a.slices.front().features, a.slices.back().features);
}

// Weekday means estimated from the past plus persistence of the deviation,
// against "tomorrow equals today".
TEST(FeatureEvolving, SeasonalPredictorBeatsPersistence) {
  SynthSpec spec = SynthSpec::defaults(Flavor::kFeatureEvolving);
  spec.seed = 5;
  const auto g = generate(spec);
  const std::size_t state = g.meta.node_type_index("state");
  const double rho = spec.resolved().param("persistence");
  std::vector<double> naive, seasonal, truth;
  for (NodeId v : g.slices[0].nodes[state]) {
    std::vector<double> x;
    for (const auto& s : g.slices) x.push_back(s.features[state].at(v)[0]);
    for (std::size_t t = 28; t + 1 < x.size(); ++t) {
      std::array<double, 7> mean{};
      std::array<double, 7> count{};
      for (std::size_t k = 0; k <= t; ++k) {
        mean[k % 7] += x[k];
        count[k % 7] += 1.0;
      }
      for (std::size_t d = 0; d < 7; ++d) mean[d] /= count[d];
      naive.push_back(x[t]);
      seasonal.push_back(mean[(t + 1) % 7] + rho * (x[t] - mean[t % 7]));
      truth.push_back(x[t + 1]);
    }
  }
  const double naive_mae = mae(naive, truth);
  const double seasonal_mae = mae(seasonal, truth);
  EXPECT_TRUE(std::isfinite(naive_mae));
  EXPECT_LT(seasonal_mae, naive_mae);
}

}  // namespace
}  // namespace htgnn
