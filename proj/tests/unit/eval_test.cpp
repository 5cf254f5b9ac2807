#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "htgnn/errors.hpp"
#include "htgnn/eval.hpp"
#include "htgnn/random.hpp"
#include "metric_oracle.hpp"

namespace htgnn {
namespace {

// One type "a" with a symmetric relation a__knows__a.
HeterogeneousTemporalGraph two_slices(std::vector<Edge> first, std::vector<Edge> second,
                                      NodeId nodes = 4) {
  HeterogeneousTemporalGraph g;
  g.meta.node_types = {"a", "b"};
  g.meta.relation_types = {{"a", "knows", "a"}, {"a", "has", "b"}};
  g.meta.feature_dim = {{"a", 1}, {"b", 1}};
  for (int t = 0; t < 2; ++t) {
    GraphSlice s = GraphSlice::empty_for(g.meta, t + 1);
    for (NodeId id = 0; id < nodes; ++id) {
      s.nodes[0].insert(id);
      s.features[0][id] = {0.0};
    }
    s.edges[0] = t == 0 ? first : second;
    g.slices.push_back(std::move(s));
  }
  return g;
}

TEST(NewLinks, OnlyEdgesAddedInNextSlice) {
  const auto g = two_slices({{0, 1}}, {{0, 1}, {0, 2}});
  EXPECT_EQ(new_links(g, "a__knows__a", 0), (std::vector<Edge>{{0, 2}}));
}

TEST(NewLinks, IdenticalSlicesGiveNothing) {
  const auto g = two_slices({{0, 1}, {2, 3}}, {{2, 3}, {0, 1}});
  EXPECT_TRUE(new_links(g, "a__knows__a", 0).empty());
}

TEST(NewLinks, CollapsesDirectedDuplicates) {
  const auto g = two_slices({{1, 0}}, {{0, 1}, {3, 2}, {2, 3}});
  EXPECT_EQ(new_links(g, "a__knows__a", 0), (std::vector<Edge>{{2, 3}}));
}

TEST(NewLinks, LastSliceHasNoSuccessor) {
  const auto g = two_slices({}, {});
  EXPECT_THROW(new_links(g, "a__knows__a", 1), DataError);
}

TEST(NewLinks, MatchesSetDifferenceOnRandomGraphs) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Edge> e1, e2;
    for (NodeId u = 0; u < 8; ++u) {
      for (NodeId v = 0; v < 8; ++v) {
        if (u == v) continue;
        if (uniform01(rng) < 0.15) e1.push_back({u, v});
        if (uniform01(rng) < 0.15) e2.push_back({u, v});
      }
    }
    const auto g = two_slices(e1, e2, 8);
    std::set<Edge> expected;
    for (NodeId u = 0; u < 8; ++u) {
      for (NodeId v = u + 1; v < 8; ++v) {
        auto has = [&](const std::vector<Edge>& es) {
          return std::find(es.begin(), es.end(), Edge{u, v}) != es.end() ||
                 std::find(es.begin(), es.end(), Edge{v, u}) != es.end();
        };
        if (has(e2) && !has(e1)) expected.insert({u, v});
      }
    }
    const auto got = new_links(g, "a__knows__a", 0);
    EXPECT_EQ(std::set<Edge>(got.begin(), got.end()), expected);
    EXPECT_EQ(got.size(), expected.size());
  }
}

TEST(SampleLinks, CountsAndDisjointNegatives) {
  const auto g = two_slices({{0, 1}}, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}}, 12);
  const auto positives = new_links(g, "a__knows__a", 0);
  ASSERT_EQ(positives.size(), 4u);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto samples = sample_links(positives, g, "a__knows__a", 0, 1.0, rng);
    ASSERT_EQ(samples.size(), 8u);
    std::size_t pos = 0;
    for (const LinkSample& s : samples) {
      EXPECT_EQ(s.timestamp, 1u);
      const auto [u, v] = s.pair;
      EXPECT_LT(u, v);
      if (s.label == 1.0) {
        ++pos;
        continue;
      }
      for (const auto& es : {g.slices[0].edges[0], g.slices[1].edges[0]}) {
        EXPECT_EQ(std::count(es.begin(), es.end(), Edge{u, v}), 0);
        EXPECT_EQ(std::count(es.begin(), es.end(), Edge{v, u}), 0);
      }
    }
    EXPECT_EQ(pos, 4u);
  }
}

TEST(SampleLinks, FractionRoundsUp) {
  const auto g = two_slices({}, {{0, 1}, {0, 2}, {1, 2}}, 10);
  std::mt19937_64 rng(1);
  const auto samples = sample_links(new_links(g, "a__knows__a", 0), g, "a__knows__a", 0, 0.1, rng);
  EXPECT_EQ(samples.size(), 2u);
}

TEST(SampleLinks, FixedSeedIsReproducible) {
  const auto g = two_slices({{0, 1}}, {{0, 1}, {0, 2}, {1, 2}, {2, 3}}, 10);
  const auto positives = new_links(g, "a__knows__a", 0);
  std::mt19937_64 a(42);
  std::mt19937_64 b(42);
  EXPECT_EQ(sample_links(positives, g, "a__knows__a", 0, 1.0, a),
            sample_links(positives, g, "a__knows__a", 0, 1.0, b));
}

TEST(SampleLinks, TooFewNonEdgesIsDataError) {
  // Three nodes, every pair linked at t+1: nothing left to sample.
  const auto g = two_slices({}, {{0, 1}, {0, 2}, {1, 2}}, 3);
  std::mt19937_64 rng(1);
  EXPECT_THROW(
      sample_links(new_links(g, "a__knows__a", 0), g, "a__knows__a", 0, 1.0, rng), DataError);
}

TEST(Auc, WorkedExamples) {
  const std::vector<double> labels = {1, 0, 1, 0};
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, labels), 0.75);
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.3, 0.2}, std::vector<double>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, labels), 0.5);
}

TEST(Auc, SingleClassIsDomainError) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 1}), DomainError);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<double>{1, 0}), ShapeError);
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(10), y(10), t(10);
    for (std::size_t i = 0; i < 10; ++i) {
      s[i] = standard_normal(rng);
      y[i] = i % 3 == 0 ? 1.0 : 0.0;
      t[i] = std::exp(3.0 * s[i]) - 7.0;
    }
    EXPECT_DOUBLE_EQ(auc(s, y), auc(t, y));
  }
}

TEST(AveragePrecision, WorkedExamples) {
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.9, 0.8, 0.7, 0.1},
                                     std::vector<double>{1, 0, 1, 0}),
                   (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_EQ(average_precision(std::vector<double>{0.9, 0.8, 0.2, 0.1},
                              std::vector<double>{1, 1, 0, 0}),
            1.0);
  EXPECT_EQ(average_precision(std::vector<double>{0.3}, std::vector<double>{1}), 1.0);
  EXPECT_THROW(average_precision(std::vector<double>{0.3}, std::vector<double>{0}), DomainError);
}

TEST(AveragePrecision, TiesKeepInputOrder) {
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 1}),
                   0.5);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}),
                   1.0);
}

TEST(Metrics, MatchBruteForceUpToLengthSix) {
  for (std::size_t n = 1; n <= 6; ++n) {
    oracle::for_each_labeled(n, 3, [](const std::vector<double>& s, const std::vector<double>& y) {
      const auto positives = std::count(y.begin(), y.end(), 1.0);
      if (positives > 0) {
        ASSERT_NEAR(average_precision(s, y), oracle::average_precision(s, y), 1e-15);
      }
      if (positives > 0 && positives < static_cast<long>(y.size())) {
        ASSERT_NEAR(auc(s, y), oracle::auc(s, y), 1e-15);
      }
    });
  }
}

TEST(Regression, WorkedExamples) {
  const std::vector<double> p = {2, 4};
  const std::vector<double> t = {1, 6};
  EXPECT_DOUBLE_EQ(mae(p, t), 1.5);
  EXPECT_DOUBLE_EQ(rmse(p, t), std::sqrt(2.5));
  EXPECT_EQ(mae(p, p), 0.0);
  EXPECT_EQ(rmse(p, p), 0.0);
  EXPECT_THROW(mae(p, std::vector<double>{1}), ShapeError);
}

TEST(Regression, RmseAtLeastMaeAndShiftInvariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(7), t(7), ps(7), ts(7);
    const double c = 100.0 * standard_normal(rng);
    for (std::size_t i = 0; i < 7; ++i) {
      p[i] = standard_normal(rng);
      t[i] = standard_normal(rng);
      ps[i] = p[i] + c;
      ts[i] = t[i] + c;
    }
    EXPECT_GE(rmse(p, t) + 1e-15, mae(p, t));
    EXPECT_NEAR(mae(ps, ts), mae(p, t), 1e-12);
    EXPECT_NEAR(rmse(ps, ts), rmse(p, t), 1e-12);
  }
}

TEST(Summary, SdOnlyWithTwoRuns) {
  EXPECT_FALSE(summarize({0.5}).sd.has_value());
  const MetricSummary s = summarize({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  ASSERT_TRUE(s.sd.has_value());
  EXPECT_DOUBLE_EQ(*s.sd, 1.0);
}

TEST(Report, JsonLayoutAndRounding) {
  const MetricsReport r = aggregate(Task::kLink, {{{"auc", 0.123456789}}, {{"auc", 0.2}}},
                                    {0, 1}, {2}, "abc");
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["task"], "link");
  EXPECT_EQ(j["config_hash"], "abc");
  EXPECT_EQ(j["seeds"], nlohmann::json::array({0, 1}));
  EXPECT_EQ(j["failed_seeds"], nlohmann::json::array({2}));
  EXPECT_EQ(j["metrics"]["auc"]["runs"][0].get<double>(), 0.123457);
  EXPECT_TRUE(j["metrics"]["auc"].contains("sd"));
  EXPECT_EQ(round_significant(1234567.0), 1234570.0);
  EXPECT_EQ(round_significant(0.0), 0.0);
}

}  // namespace
}  // namespace htgnn
