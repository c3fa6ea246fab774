#include <gtest/gtest.h>

#include <random>

#include "../oracles/graph_oracle.hpp"
#include "grrail/metrics.hpp"

using namespace grrail;

namespace {

WeightedGraph convert(const oracle::SmallGraph& s) {
    WeightedGraph g{static_cast<std::size_t>(s.n), {}};
    for (int i = 0; i < s.n; ++i)
        for (int j = i + 1; j < s.n; ++j)
            if (s.adj(i, j)) g.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), s.w[i * s.n + j]});
    return g;
}

bool integer_metric(std::size_t k) {
    switch (static_cast<Metric>(k)) {
        case Metric::size:
        case Metric::connected_components:
        case Metric::num_hubs: return true;
        default: return false;
    }
}

void expect_matches_oracle(const oracle::SmallGraph& s, const std::string& what) {
    const auto got = graph_features(convert(s));
    const auto want = oracle::metrics(s);
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        if (integer_metric(k))
            EXPECT_EQ(got[k], want[k]) << what << " " << kMetricNames[k];
        else
            EXPECT_NEAR(got[k], want[k], 1e-9) << what << " " << kMetricNames[k];
    }
}

oracle::SmallGraph random_graph(std::mt19937_64& rng, int n, double p, bool weighted) {
    std::bernoulli_distribution edge(p);
    std::uniform_real_distribution<double> w(0.1, 5.0);
    oracle::SmallGraph g(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (edge(rng)) g.connect(i, j, weighted ? w(rng) : 1.0);
    return g;
}

double metric(const GraphFeatureVector& v, Metric m) { return v[static_cast<int>(m)]; }

}  // namespace

TEST(Metrics, NamesInOrder) {
    EXPECT_EQ(kMetricNames.front(), "size");
    EXPECT_EQ(kMetricNames[static_cast<int>(Metric::modularity)], "modularity");
    EXPECT_EQ(kMetricNames.back(), "resilience");
}

TEST(Metrics, SingleNodeRow) {
    EXPECT_EQ(graph_features(WeightedGraph{1, {}}), kSingleNodeRow);
    EXPECT_THROW(graph_features(WeightedGraph{0, {}}), Error);
}

TEST(Metrics, TriangleClosedForm) {
    const auto q = graph_features(WeightedGraph{3, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}}});
    const GraphFeatureVector want{3, 1, 1, 1, 1, 0, std::log(3.0) / std::log(2.0), 1, 0, 1, 1, 0, 0, 1, 1};
    for (std::size_t k = 0; k < kMetricCount; ++k) EXPECT_NEAR(q[k], want[k], 1e-12) << kMetricNames[k];
}

TEST(Metrics, PathClosedForm) {
    const auto q = graph_features(WeightedGraph{4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}}});
    const double eff = 2.0 * (1 + 0.5 + 1.0 / 3 + 1 + 0.5 + 1) / 12.0;
    const GraphFeatureVector want{4, 0.5, 3, 10.0 / 6, 0, 1.0 / 6, 0, 1, -0.5, 2, eff, 1, 0, 10, 2.0 / 3};
    for (std::size_t k = 0; k < kMetricCount; ++k) EXPECT_NEAR(q[k], want[k], 1e-12) << kMetricNames[k];
}

TEST(Metrics, AllSmallUnlabelledGraphsMatchOracle) {
    const std::size_t expected_classes[] = {1, 2, 4, 11, 34};
    std::size_t total = 0;
    for (int n = 1; n <= 5; ++n) {
        const auto graphs = oracle::nonisomorphic_graphs(n);
        ASSERT_EQ(graphs.size(), expected_classes[n - 1]);
        for (std::size_t k = 0; k < graphs.size(); ++k) expect_matches_oracle(graphs[k], "n=" + std::to_string(n) + " #" + std::to_string(k));
        total += graphs.size();
    }
    EXPECT_EQ(total, 52u);
}

TEST(Metrics, RandomWeightedGraphsMatchOracle) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 6;
        expect_matches_oracle(random_graph(rng, n, 0.5, true), "trial " + std::to_string(trial));
    }
}

TEST(Metrics, InvariantUnderRelabelling) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + trial % 6;
        const auto g = random_graph(rng, n, 0.45, true);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        oracle::SmallGraph h(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (g.adj(i, j)) h.connect(perm[i], perm[j], g.w[i * n + j]);
        const auto a = graph_features(convert(g)), b = graph_features(convert(h));
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            // resilience picks the lowest-index hub, which relabelling can move
            if (static_cast<Metric>(k) == Metric::resilience) continue;
            ASSERT_NEAR(a[k], b[k], 1e-9) << "trial " << trial << " " << kMetricNames[k];
        }
    }
}

TEST(Metrics, WeightScalingActsOnDistancesOnly) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = convert(random_graph(rng, 6, 0.5, true));
        const auto a = graph_features(g);
        for (auto& e : g.edges) e.weight *= 2.5;
        const auto b = graph_features(g);
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            const auto m = static_cast<Metric>(k);
            double factor = 1.0;
            if (m == Metric::diameter || m == Metric::avg_path_length || m == Metric::radius) factor = 2.5;
            if (m == Metric::global_efficiency) factor = 1.0 / 2.5;
            ASSERT_NEAR(b[k], a[k] * factor, 1e-9) << kMetricNames[k];
        }
    }
}

TEST(Metrics, AddingAnEdgeIsMonotone) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 8;
        auto s = random_graph(rng, n, 0.3, false);
        std::vector<std::pair<int, int>> missing;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (!s.adj(i, j)) missing.emplace_back(i, j);
        if (missing.empty()) continue;
        const auto before = graph_features(convert(s));
        const auto [i, j] = missing[rng() % missing.size()];
        s.connect(i, j);
        const auto after = graph_features(convert(s));
        EXPECT_GT(metric(after, Metric::density), metric(before, Metric::density));
        EXPECT_LE(metric(after, Metric::connected_components), metric(before, Metric::connected_components));
    }
}

TEST(Modularity, ExhaustiveMatchesBruteForce) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + trial % 6;
        const auto s = random_graph(rng, n, 0.4, true);
        EXPECT_NEAR(modularity(convert(s)), oracle::brute_modularity(s), 1e-12);
    }
}

TEST(Modularity, CompleteGraphIsZero) {
    for (int n = 2; n <= 9; ++n) {
        oracle::SmallGraph s(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s.connect(i, j);
        EXPECT_NEAR(modularity(convert(s)), 0.0, 1e-12) << n;
    }
}

TEST(Modularity, DisjointCliquesArePositive) {
    oracle::SmallGraph s(6);
    for (int base : {0, 3})
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) s.connect(base + i, base + j);
    EXPECT_NEAR(modularity(convert(s)), 0.5, 1e-12);
}

TEST(Modularity, GreedyFindsBridgedCliques) {
    // ten nodes: above the exhaustive limit
    oracle::SmallGraph s(10);
    for (int base : {0, 5})
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) s.connect(base + i, base + j);
    s.connect(4, 5);
    const double q = 2.0 * (10.0 / 21.0 - 0.25);
    EXPECT_NEAR(modularity(convert(s)), q, 1e-12);
}
