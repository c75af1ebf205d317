#pragma once

#include "core.hpp"
#include "random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string_view>

namespace ggmsi {

/// Cross-product matrix S = X^T X, the Wishart sufficient statistic.
struct SuffStat {
    Matrix s;
    int n = 0;
    int p = 0;

    bool is_pd() const { return pd_check(s); }
};

inline SuffStat suff_stat(const Dataset& data) {
    const auto n = static_cast<int>(data.rows());
    const auto p = static_cast<int>(data.cols());
    require(p >= 1, "suff_stat: empty design");
    require(n > p + 1, "suff_stat: need n > p + 1 (got n=" + std::to_string(n) +
                           ", p=" + std::to_string(p) + ")");
    require(data.allFinite(), "suff_stat: data contains non-finite entries");
    SuffStat out;
    out.n = n;
    out.p = p;
    out.s = data.transpose() * data;
    out.s = 0.5 * (out.s + out.s.transpose()).eval();
    return out;
}

/// Standard normal upper quantile: x with P(Z > x) = q.
inline double normal_upper_quantile(double q) {
    require(q > 0.0 && q < 1.0, "normal_upper_quantile: q must lie in (0, 1)");
    boost::math::normal_distribution<double> z;
    return boost::math::quantile(boost::math::complement(z, q));
}

struct PenaltyWeights {
    Vector lambda;
    std::vector<int> degenerate;  // columns with zero sample variance (lambda = 0)
};

/// lambda_i = kappa_i * 2 sqrt(n) sigma_i * Q(alpha / (2 p^2)), Q the upper
/// normal quantile and sigma_i^2 = |X_i|^2 / n.
inline PenaltyWeights penalty_weights(const Dataset& data, double alpha, const Vector& kappa) {
    require(alpha > 0.0 && alpha < 1.0, "penalty_weights: alpha must lie in (0, 1)");
    const auto n = static_cast<double>(data.rows());
    const auto p = static_cast<int>(data.cols());
    require(kappa.size() == p, "penalty_weights: kappa must have one entry per column");
    require((kappa.array() > 0.0).all(), "penalty_weights: kappa entries must be positive");
    const double z = normal_upper_quantile(alpha / (2.0 * p * p));
    PenaltyWeights out;
    out.lambda.resize(p);
    for (int i = 0; i < p; ++i) {
        const double sigma_hat = std::sqrt(data.col(i).squaredNorm() / n);
        out.lambda(i) = kappa(i) * 2.0 * std::sqrt(n) * sigma_hat * z;
        if (sigma_hat == 0.0) out.degenerate.push_back(i);
    }
    return out;
}

inline PenaltyWeights penalty_weights(const Dataset& data, double alpha, double kappa = 1.0) {
    return penalty_weights(data, alpha, Vector::Constant(data.cols(), kappa));
}

/// Node ids other than i, ascending. This is the coordinate order of the
/// predictor vector b and of the randomization draw omega for node i.
inline std::vector<int> predictors(int i, int p) {
    std::vector<int> out;
    out.reserve(p - 1);
    for (int j = 0; j < p; ++j) {
        if (j != i) out.push_back(j);
    }
    return out;
}

/// Position of node j inside predictors(i, p).
inline int predictor_slot(int i, int j) { return j < i ? j : j - 1; }

/// Per-node Gaussian randomization covariances and the seed their draws use.
struct RandomizationSpec {
    std::vector<Matrix> cov;  // cov[i] is (p-1) x (p-1), predictor order
    std::uint64_t seed = 0;

    static RandomizationSpec isotropic(int p, double tau, std::uint64_t seed) {
        require(p >= 2, "RandomizationSpec: p must be >= 2");
        require(tau > 0.0, "RandomizationSpec: scale must be positive");
        RandomizationSpec r;
        r.cov.assign(p, tau * tau * Matrix::Identity(p - 1, p - 1));
        r.seed = seed;
        return r;
    }

    /// Omega^[i] = gamma^2 n sigma_i^2 diag(sigma_k^2, k != i), sigma^2 = |X_col|^2 / n.
    /// This matches the scale of the gradient noise X_{-i}' e, so the draw
    /// rescales with the data.
    static RandomizationSpec data_scaled(const Dataset& data, double gamma, std::uint64_t seed) {
        const auto n = static_cast<double>(data.rows());
        const auto p = static_cast<int>(data.cols());
        require(p >= 2, "RandomizationSpec: p must be >= 2");
        require(gamma > 0.0, "RandomizationSpec: scale must be positive");
        Vector var(p);
        for (int i = 0; i < p; ++i) var(i) = data.col(i).squaredNorm() / n;
        require((var.array() > 0.0).all(), "RandomizationSpec: degenerate column");
        RandomizationSpec r;
        r.seed = seed;
        r.cov.resize(p);
        for (int i = 0; i < p; ++i) {
            const auto others = predictors(i, p);
            Vector d(p - 1);
            for (int a = 0; a < p - 1; ++a) d(a) = gamma * gamma * n * var(i) * var(others[a]);
            r.cov[i] = d.asDiagonal();
        }
        return r;
    }

    int p() const { return static_cast<int>(cov.size()); }

    /// omega for node i; node streams are independent.
    Vector draw(int i) const {
        const Matrix& om = cov.at(i);
        Eigen::LLT<Matrix> llt(om);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("RandomizationSpec: covariance for node " +
                                        std::to_string(i) + " is not positive definite");
        }
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        Vector z(om.rows());
        for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
        return llt.matrixL() * z;
    }

    std::vector<Vector> draw_all() const {
        std::vector<Vector> out;
        out.reserve(cov.size());
        for (int i = 0; i < p(); ++i) out.push_back(draw(i));
        return out;
    }
};

/// Outcome of one randomized nodewise Lasso. Index sets are original node ids.
struct NodewiseSolution {
    int node = 0;
    int p = 0;
    double lambda = 0.0;
    double ridge = 0.0;
    Vector omega;                  // predictor order
    std::vector<int> active_set;   // E_i, ascending
    Vector signs;                  // aligned with active_set
    Vector active_coef;            // aligned with active_set
    std::vector<int> inactive_set; // complement of E_i and {i}, ascending
    Vector inactive_subgrad;       // aligned with inactive_set
    double objective = 0.0;
    int sweeps = 0;

    int q() const { return static_cast<int>(active_set.size()); }
    int qbar() const { return static_cast<int>(inactive_set.size()); }

    bool selects(int j) const {
        return std::binary_search(active_set.begin(), active_set.end(), j);
    }

    /// Active ids followed by inactive ids: the stacked coordinate order of
    /// the KKT map.
    std::vector<int> stacked_order() const {
        std::vector<int> order(active_set);
        order.insert(order.end(), inactive_set.begin(), inactive_set.end());
        return order;
    }

    /// omega permuted into stacked order.
    Vector omega_stacked() const {
        const auto order = stacked_order();
        Vector out(order.size());
        for (std::size_t r = 0; r < order.size(); ++r) out(r) = omega(predictor_slot(node, order[r]));
        return out;
    }
};

struct SolverOptions {
    double tol = 1e-10;
    int max_sweeps = 50000;
};

/// Per-sweep objective values, for diagnostics.
struct SolverTrace {
    std::vector<double> objective;
};

namespace detail {

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace detail

/// Randomized objective 0.5|X_i - X_{-i} b|^2 + lambda|b|_1 + eps/2 |b|^2 - b'omega,
/// written through S only. b is in predictor order.
inline double nodewise_objective(const SuffStat& suff, int i, double lambda, double eps,
                                 const Vector& omega, const Vector& b) {
    const auto others = predictors(i, suff.p);
    const int d = static_cast<int>(others.size());
    double quad = suff.s(i, i);
    for (int a = 0; a < d; ++a) {
        if (b(a) == 0.0) continue;
        quad -= 2.0 * b(a) * suff.s(others[a], i);
        for (int c = 0; c < d; ++c) quad += b(a) * b(c) * suff.s(others[a], others[c]);
    }
    return 0.5 * quad + lambda * b.lpNorm<1>() + 0.5 * eps * b.squaredNorm() - b.dot(omega);
}

namespace detail {

/// Builds the solution record from a converged coefficient vector; z is
/// recovered from the KKT map so that stationarity holds on the inactive block.
inline NodewiseSolution make_solution(const SuffStat& suff, int i, double lambda, double eps,
                                      const Vector& omega, const Vector& b) {
    const auto others = predictors(i, suff.p);
    NodewiseSolution sol;
    sol.node = i;
    sol.p = suff.p;
    sol.lambda = lambda;
    sol.ridge = eps;
    sol.omega = omega;
    for (std::size_t a = 0; a < others.size(); ++a) {
        if (b(a) != 0.0) {
            sol.active_set.push_back(others[a]);
        } else {
            sol.inactive_set.push_back(others[a]);
        }
    }
    sol.signs.resize(sol.q());
    sol.active_coef.resize(sol.q());
    for (int a = 0; a < sol.q(); ++a) {
        const double v = b(predictor_slot(i, sol.active_set[a]));
        sol.active_coef(a) = v;
        sol.signs(a) = v > 0.0 ? 1.0 : -1.0;
    }
    sol.inactive_subgrad.resize(sol.qbar());
    for (int a = 0; a < sol.qbar(); ++a) {
        const int k = sol.inactive_set[a];
        double g = suff.s(k, i) + omega(predictor_slot(i, k));
        for (int e = 0; e < sol.q(); ++e) g -= suff.s(k, sol.active_set[e]) * sol.active_coef(e);
        sol.inactive_subgrad(a) = std::clamp(g / lambda, -1.0, 1.0);
    }
    sol.objective = nodewise_objective(suff, i, lambda, eps, omega, b);
    return sol;
}

/// Exact re-solve on the support of b. Returns the polished vector when the
/// signs and the inactive subgradient bound both survive.
inline std::optional<Vector> polish_support(const SuffStat& suff, int i, double lambda, double eps,
                                            const Vector& omega, const Vector& b) {
    const auto others = predictors(i, suff.p);
    const int d = static_cast<int>(others.size());
    std::vector<int> act;
    for (int a = 0; a < d; ++a) {
        if (b(a) != 0.0) act.push_back(a);
    }
    const int q = static_cast<int>(act.size());
    Vector out = Vector::Zero(d);
    if (q > 0) {
        Matrix h(q, q);
        Vector rhs(q);
        for (int r = 0; r < q; ++r) {
            const double sg = b(act[r]) > 0.0 ? 1.0 : -1.0;
            rhs(r) = suff.s(others[act[r]], i) + omega(act[r]) - lambda * sg;
            for (int c = 0; c < q; ++c) h(r, c) = suff.s(others[act[r]], others[act[c]]);
            h(r, r) += eps;
        }
        Eigen::LLT<Matrix> llt(h);
        if (llt.info() != Eigen::Success) return std::nullopt;
        const Vector sol = llt.solve(rhs);
        for (int r = 0; r < q; ++r) {
            if (sol(r) * b(act[r]) <= 0.0) return std::nullopt;
            out(act[r]) = sol(r);
        }
    }
    for (int a = 0; a < d; ++a) {
        if (b(a) != 0.0) continue;
        double g = suff.s(others[a], i) + omega(a);
        for (int r = 0; r < q; ++r) g -= suff.s(others[a], others[act[r]]) * out(act[r]);
        if (std::abs(g) > lambda * (1.0 + 1e-12)) return std::nullopt;
    }
    return out;
}

}  // namespace detail

/// Cyclic coordinate descent on the randomized nodewise objective for node i.
///
/// Each coordinate takes the closed-form soft-threshold update with
/// curvature s_jj + eps. Sweeps stop once the largest coefficient change is
/// <= tol * max(1, |b|_inf); the support is then re-solved exactly so the
/// stationarity identity holds to rounding. Throws NumericalError when the
/// sweep cap is reached.
inline NodewiseSolution solve_node(const SuffStat& suff, int i, double lambda, double eps,
                                   const Vector& omega, const SolverOptions& opts = {},
                                   SolverTrace* trace = nullptr) {
    require(i >= 0 && i < suff.p, "solve_node: node index out of range");
    require(lambda > 0.0, "solve_node: lambda must be positive");
    require(eps > 0.0, "solve_node: ridge must be positive");
    require(omega.size() == suff.p - 1, "solve_node: omega must have p - 1 entries");

    const auto others = predictors(i, suff.p);
    const int d = static_cast<int>(others.size());
    Matrix q(d, d);
    Vector r(d);
    for (int a = 0; a < d; ++a) {
        r(a) = suff.s(others[a], i) + omega(a);
        for (int c = 0; c < d; ++c) q(a, c) = suff.s(others[a], others[c]);
        q(a, a) += eps;
    }
    for (int a = 0; a < d; ++a) {
        if (!(q(a, a) > 0.0)) throw NumericalError("solve_node: non-positive curvature");
    }

    Vector b = Vector::Zero(d);
    Vector qb = Vector::Zero(d);
    if (trace) trace->objective.push_back(nodewise_objective(suff, i, lambda, eps, omega, b));

    int sweep = 0;
    for (;;) {
        if (sweep == opts.max_sweeps) {
            throw NumericalError("solve_node: coordinate descent did not converge for node " +
                                 std::to_string(i));
        }
        ++sweep;
        double max_change = 0.0;
        for (int a = 0; a < d; ++a) {
            const double old = b(a);
            const double t = r(a) - qb(a) + q(a, a) * old;
            const double nb = detail::soft_threshold(t, lambda) / q(a, a);
            const double delta = nb - old;
            if (delta != 0.0) {
                b(a) = nb;
                qb += delta * q.col(a);
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (trace) trace->objective.push_back(nodewise_objective(suff, i, lambda, eps, omega, b));
        if (max_change <= opts.tol * std::max(1.0, b.lpNorm<Eigen::Infinity>())) {
            if (auto polished = detail::polish_support(suff, i, lambda, eps, omega, b)) {
                b = *polished;
                break;
            }
            if (max_change == 0.0) break;
        }
    }
    NodewiseSolution sol = detail::make_solution(suff, i, lambda, eps, omega, b);
    sol.sweeps = sweep;
    return sol;
}

/// ||omega - (T + U (b; z) + V)||_inf in stacked coordinates.
inline double verify_kkt(const NodewiseSolution& sol, const SuffStat& suff) {
    const int i = sol.node;
    const auto order = sol.stacked_order();
    const Vector om = sol.omega_stacked();
    double worst = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const int row = order[r];
        double eta = -suff.s(row, i);
        for (int e = 0; e < sol.q(); ++e) eta += suff.s(row, sol.active_set[e]) * sol.active_coef(e);
        if (static_cast<int>(r) < sol.q()) {
            eta += sol.ridge * sol.active_coef(r) + sol.lambda * sol.signs(r);
        } else {
            eta += sol.lambda * sol.inactive_subgrad(r - sol.q());
        }
        worst = std::max(worst, std::abs(om(r) - eta));
    }
    return worst;
}

enum class Rule { And, Or };

inline std::string_view to_string(Rule r) { return r == Rule::And ? "and" : "or"; }

inline Rule parse_rule(std::string_view s) {
    if (s == "and" || s == "AND") return Rule::And;
    if (s == "or" || s == "OR") return Rule::Or;
    throw std::invalid_argument("unknown combination rule '" + std::string(s) + "'");
}

/// All nodewise solutions plus the combined edge set: the conditioning event.
struct SelectionEvent {
    std::vector<NodewiseSolution> solutions;
    Rule rule = Rule::Or;
    std::vector<Edge> edges;  // sorted

    int p() const { return static_cast<int>(solutions.size()); }

    bool has_edge(const Edge& e) const {
        return std::binary_search(edges.begin(), edges.end(), e);
    }
};

inline SelectionEvent combine(std::vector<NodewiseSolution> solutions, Rule rule) {
    const int p = static_cast<int>(solutions.size());
    require(p >= 2, "combine: need at least two nodewise solutions");
    for (int i = 0; i < p; ++i) {
        require(solutions[i].node == i && solutions[i].p == p,
                "combine: expected exactly one solution per node, in node order");
    }
    SelectionEvent ev;
    ev.rule = rule;
    for (int j = 0; j < p; ++j) {
        for (int k = j + 1; k < p; ++k) {
            const bool a = solutions[j].selects(k);
            const bool b = solutions[k].selects(j);
            if (rule == Rule::Or ? (a || b) : (a && b)) ev.edges.emplace_back(j, k);
        }
    }
    ev.solutions = std::move(solutions);
    return ev;
}

/// Solves every node and combines. omegas[i] is node i's draw (predictor order).
inline SelectionEvent select_edges(const SuffStat& suff, const Vector& lambda, double eps,
                                   const std::vector<Vector>& omegas, Rule rule,
                                   const SolverOptions& opts = {}) {
    require(lambda.size() == suff.p, "select_edges: one lambda per node required");
    require(static_cast<int>(omegas.size()) == suff.p, "select_edges: one omega per node required");
    std::vector<NodewiseSolution> sols;
    sols.reserve(suff.p);
    for (int i = 0; i < suff.p; ++i) sols.push_back(solve_node(suff, i, lambda(i), eps, omegas[i], opts));
    return combine(std::move(sols), rule);
}

}  // namespace ggmsi
