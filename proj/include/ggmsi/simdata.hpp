#pragma once

#include "core.hpp"
#include "random.hpp"

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <set>

namespace ggmsi {

/// Sparse precision matrix drawn from the random geometric-graph design,
/// with its covariance and true edge set.
struct GraphSpec {
    int p = 0;
    int m = 0;
    double c = 0.0;
    Matrix theta;
    Matrix sigma;
    std::vector<Edge> true_edges;  // sorted, j < k
    Matrix positions;              // p x 2, node locations in the unit square
    int repair_rounds = 0;

    bool is_edge(int a, int b) const {
        return std::binary_search(true_edges.begin(), true_edges.end(), Edge(a, b));
    }
};

namespace detail {

inline double smallest_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace detail

/// Draws a GraphSpec.
///
/// Draw order for a given seed: node positions (x then y per node), one
/// uniform per pair (i < j, row-major) deciding the edge, pruning draws,
/// then one uniform per retained edge (sorted order) for its magnitude.
/// Pruning removes, uniformly at random, one edge incident to some node
/// whose degree exceeds m, until no such node remains. If the smallest
/// eigenvalue of theta is <= 1e-6, off-diagonals are shrunk by 0.9 (at
/// most 20 rounds).
inline GraphSpec generate_precision(int p, int m, double c, std::uint64_t seed) {
    require(p >= 2, "generate_precision: p must be >= 2");
    require(m >= 1, "generate_precision: m must be a positive integer");
    require(c > 0.0 && c <= 1.0, "generate_precision: c must lie in (0, 1]");

    Rng rng(seed);
    GraphSpec g;
    g.p = p;
    g.m = m;
    g.c = c;
    g.positions.resize(p, 2);
    for (int i = 0; i < p; ++i) {
        g.positions(i, 0) = rng.uniform();
        g.positions(i, 1) = rng.uniform();
    }

    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double scale = std::sqrt(static_cast<double>(p));
    std::set<Edge> edges;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            const double d = (g.positions.row(i) - g.positions.row(j)).norm() / scale;
            const double prob = inv_sqrt_2pi * std::exp(-0.5 * d * d);
            if (rng.uniform() < prob) edges.insert(Edge(i, j));
        }
    }

    std::vector<int> degree(p, 0);
    for (const auto& e : edges) {
        ++degree[e.j];
        ++degree[e.k];
    }
    for (;;) {
        std::vector<Edge> candidates;
        for (const auto& e : edges) {
            if (degree[e.j] > m || degree[e.k] > m) candidates.push_back(e);
        }
        if (candidates.empty()) break;
        const Edge drop = candidates[rng.below(candidates.size())];
        edges.erase(drop);
        --degree[drop.j];
        --degree[drop.k];
    }

    g.theta = Matrix::Identity(p, p);
    const double upper = c / static_cast<double>(m);
    for (const auto& e : edges) {
        const double v = upper * rng.uniform();
        g.theta(e.j, e.k) = v;
        g.theta(e.k, e.j) = v;
    }
    g.true_edges.assign(edges.begin(), edges.end());

    while (detail::smallest_eigenvalue(g.theta) <= 1e-6) {
        if (g.repair_rounds == 20) {
            throw NumericalError("generate_precision: theta not positive definite after repair");
        }
        Matrix diag = g.theta.diagonal().asDiagonal();
        g.theta = diag + 0.9 * (g.theta - diag);
        ++g.repair_rounds;
    }

    Eigen::LLT<Matrix> llt(g.theta);
    g.sigma = llt.solve(Matrix::Identity(p, p));
    g.sigma = 0.5 * (g.sigma + g.sigma.transpose()).eval();
    return g;
}

/// n i.i.d. rows from N_p(0, sigma): row = L z with sigma = L L^T, z standard normal.
inline Dataset sample_data(const GraphSpec& spec, int n, std::uint64_t seed) {
    require(n > spec.p + 1, "sample_data: need n > p + 1");
    Eigen::LLT<Matrix> llt(spec.sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("sample_data: sigma not positive definite");
    const Matrix l = llt.matrixL();
    Rng rng(seed);
    Matrix z(n, spec.p);
    for (int r = 0; r < n; ++r) {
        for (int j = 0; j < spec.p; ++j) z(r, j) = rng.normal();
    }
    return z * l.transpose();
}

}  // namespace ggmsi
