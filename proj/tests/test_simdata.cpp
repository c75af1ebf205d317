#include <ggmsi/simdata.hpp>

#include <gtest/gtest.h>

#include "support/oracles.hpp"

#include <map>

using namespace ggmsi;

TEST(GeneratePrecision, RejectsSingleNode) { EXPECT_THROW(generate_precision(1, 1, 0.5, 1), std::invalid_argument); }

TEST(GeneratePrecision, NoEdgeGivesIdentity) {
    // Find a seed where the single pair is not connected; the edge probability is below 0.4.
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto g = generate_precision(2, 1, 0.7, seed);
        if (!g.true_edges.empty()) continue;
        EXPECT_EQ(g.theta, Matrix::Identity(2, 2));
        return;
    }
    FAIL() << "no edge-free draw found";
}

TEST(GeneratePrecision, SettingOneDegreeAndMagnitude) {
    const auto g = generate_precision(20, 2, 0.6, 7);
    for (int i = 0; i < 20; ++i) {
        int deg = 0;
        for (int j = 0; j < 20; ++j) {
            if (j == i || g.theta(i, j) == 0.0) continue;
            ++deg;
            EXPECT_GT(g.theta(i, j), 0.0);
            EXPECT_LT(g.theta(i, j), 0.3);
        }
        EXPECT_LE(deg, 2);
    }
}

TEST(GeneratePrecision, SymmetricAndPositiveDefinite) {
    const auto g = generate_precision(5, 4, 0.8, 1);
    EXPECT_EQ(g.theta, g.theta.transpose());
    EXPECT_GT(oracle::min_eigenvalue(g.theta), 0.0);
}

TEST(GeneratePrecision, TypeInvariantsOverSeeds) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const int m = 1 + static_cast<int>(seed % 5);
        const double c = 0.2 + 0.2 * static_cast<double>(seed % 5);
        const auto g = generate_precision(12, m, c, seed);
        EXPECT_LT((g.sigma * g.theta - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-8);
        std::vector<Edge> support;
        for (int i = 0; i < 12; ++i) {
            EXPECT_EQ(g.theta(i, i), 1.0);
            int deg = 0;
            for (int j = 0; j < 12; ++j) {
                if (i == j || g.theta(i, j) == 0.0) continue;
                ++deg;
                EXPECT_LT(g.theta(i, j), c / m);
                if (i < j) support.emplace_back(i, j);
            }
            EXPECT_LE(deg, m);
        }
        EXPECT_EQ(support, g.true_edges);
    }
}

TEST(GeneratePrecision, Deterministic) {
    const auto a = generate_precision(10, 2, 0.6, 42);
    const auto b = generate_precision(10, 2, 0.6, 42);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.true_edges, b.true_edges);
}

// Exchangeable labels: the degree histogram of the first node matches that
// of the last node across seeds.
TEST(GeneratePrecision, DegreeHistogramLabelInvariant) {
    const int seeds = 600, p = 8;
    std::map<int, int> first, last;
    for (int s = 0; s < seeds; ++s) {
        const auto g = generate_precision(p, 2, 0.6, s);
        int d0 = 0, d1 = 0;
        for (const auto& e : g.true_edges) {
            d0 += (e.j == 0 || e.k == 0);
            d1 += (e.j == p - 1 || e.k == p - 1);
        }
        ++first[d0];
        ++last[d1];
    }
    for (int k = 0; k <= 2; ++k) {
        const double pbar = 0.5 * (first[k] + last[k]) / seeds;
        const double sd = std::sqrt(2.0 * pbar * (1 - pbar) / seeds);
        EXPECT_LE(std::abs(static_cast<double>(first[k] - last[k]) / seeds), 3.0 * sd + 1e-12) << "degree " << k;
    }
}

TEST(SampleData, RejectsSmallN) {
    const auto g = generate_precision(4, 1, 0.5, 3);
    EXPECT_THROW(sample_data(g, 5, 1), std::invalid_argument);
}

TEST(SampleData, IdentityCovarianceSanity) {
    GraphSpec g;
    g.p = 2;
    g.theta = g.sigma = Matrix::Identity(2, 2);
    EXPECT_EQ(sample_data(g, 4, 1).rows(), 4);
    const Dataset x = sample_data(g, 20000, 5);
    const Matrix cov = x.transpose() * x / 20000.0;
    EXPECT_NEAR(x.col(0).mean(), 0.0, 0.05);
    EXPECT_NEAR(cov(0, 0), 1.0, 0.05);
    EXPECT_NEAR(cov(0, 1), 0.0, 0.05);
}

TEST(SampleData, SettingOneDimensions) {
    const auto g = generate_precision(20, 2, 0.6, 1);
    const Dataset x = sample_data(g, 400, 2);
    EXPECT_EQ(x.rows(), 400);
    EXPECT_EQ(x.cols(), 20);
}

TEST(SampleData, Deterministic) {
    const auto g = generate_precision(6, 2, 0.6, 1);
    EXPECT_EQ(sample_data(g, 50, 9), sample_data(g, 50, 9));
}

TEST(SampleData, EmpiricalCovarianceMatchesSigma) {
    const auto g = generate_precision(5, 2, 0.8, 11);
    const int n = 50 * 5 * 20;
    const Dataset x = sample_data(g, n, 12);
    const Matrix cov = x.transpose() * x / static_cast<double>(n);
    for (int j = 0; j < 5; ++j) {
        for (int k = 0; k < 5; ++k) {
            const double tol = 5.0 * std::sqrt(2.0 / n) *
                               std::sqrt(g.sigma(j, j) * g.sigma(k, k) + g.sigma(j, k) * g.sigma(j, k));
            EXPECT_NEAR(cov(j, k), g.sigma(j, k), tol);
        }
    }
}
