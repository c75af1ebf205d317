#pragma once

#include "core.hpp"
#include "selector.hpp"

#include <functional>
#include <map>

namespace ggmsi {

/// One selected edge together with the observed statistic it conditions on.
struct EdgeTarget {
    int j0 = 0;
    int k0 = 1;
    double s_obs = 0.0;
    Matrix s;                       // observed S; every entry but (j0,k0) is conditioned on
    std::vector<int> F;             // i outside {j0,k0} with j0 or k0 in E_i
    std::vector<int> G;             // i with both j0 and k0 in E_i
    std::vector<int> contributing;  // F plus {j0, k0}, ascending

    int p() const { return static_cast<int>(s.rows()); }
};

/// S with entries (j0,k0) and (k0,j0) replaced by c.
inline Matrix gamma_replace(const Matrix& s, int j0, int k0, double c) {
    require(j0 != k0, "gamma_replace: j0 and k0 must differ");
    Matrix out = s;
    out(j0, k0) = c;
    out(k0, j0) = c;
    return out;
}

inline Matrix gamma_replace(const EdgeTarget& t, double c) { return gamma_replace(t.s, t.j0, t.k0, c); }

/// Target with no selection information, used by the Wishart-only pivots.
inline EdgeTarget unconditional_target(const Matrix& s, int j0, int k0) {
    require(j0 != k0, "unconditional_target: j0 and k0 must differ");
    require(j0 >= 0 && k0 >= 0 && j0 < s.rows() && k0 < s.rows(), "unconditional_target: index out of range");
    EdgeTarget t;
    t.j0 = std::min(j0, k0);
    t.k0 = std::max(j0, k0);
    t.s = s;
    t.s_obs = s(t.j0, t.k0);
    t.contributing = {t.j0, t.k0};
    return t;
}

inline EdgeTarget target_sets(const SelectionEvent& event, const SuffStat& suff, int j0, int k0) {
    require(event.p() == suff.p, "target_sets: event and sufficient statistic disagree on p");
    require(j0 != k0, "target_sets: j0 and k0 must differ");
    const Edge e(j0, k0);
    require(event.has_edge(e), "target_sets: edge (" + std::to_string(e.j) + "," + std::to_string(e.k) +
                                   ") was not selected; inference is conditional on selection");
    EdgeTarget t = unconditional_target(suff.s, e.j, e.k);
    for (int i = 0; i < event.p(); ++i) {
        const auto& sol = event.solutions[i];
        const bool a = sol.selects(t.j0);
        const bool b = sol.selects(t.k0);
        if (i != t.j0 && i != t.k0 && (a || b)) t.F.push_back(i);
        if (a && b) t.G.push_back(i);
    }
    t.contributing = t.F;
    t.contributing.push_back(t.j0);
    t.contributing.push_back(t.k0);
    std::sort(t.contributing.begin(), t.contributing.end());
    return t;
}

/// KKT map of node i evaluated at Gamma(c): T(c) + U(c) (b; z) + V, stacked order.
inline Vector eta_map(double c, const EdgeTarget& target, const NodewiseSolution& sol, const Vector& b,
                      const Vector& z) {
    require(b.size() == sol.q() && z.size() == sol.qbar(), "eta_map: dimension mismatch");
    require(sol.p == target.p(), "eta_map: solution and target disagree on p");
    const Matrix g = gamma_replace(target, c);
    const auto order = sol.stacked_order();
    const int i = sol.node;
    Vector eta(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const int row = order[r];
        double v = -g(row, i);
        for (int e = 0; e < sol.q(); ++e) v += g(row, sol.active_set[e]) * b(e);
        if (static_cast<int>(r) < sol.q()) {
            v += sol.ridge * b(r) + sol.lambda * sol.signs(r);
        } else {
            v += sol.lambda * z(r - sol.q());
        }
        eta(r) = v;
    }
    return eta;
}

/// log det(mat_EE + eps I). The lambda^qbar factor of the full Jacobian is
/// constant in c and dropped. Returns -inf when the block is singular.
inline double jacobian_logdet(const Matrix& mat_ee, double eps) {
    if (mat_ee.rows() == 0) return 0.0;
    Matrix m = mat_ee;
    m.diagonal().array() += eps;
    return logdet_pd(m);
}

/// Sum_j log(1 + scale / (signs_j b_j)); +inf when any sign is violated.
inline double barrier(const Vector& b, const Vector& signs, double scale = 1.0) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        const double u = signs(j) * b(j);
        if (!(u > 0.0)) return kInf;
        acc += std::log1p(scale / u);
    }
    return acc;
}

/// Per-coordinate scales.
inline double barrier(const Vector& b, const Vector& signs, const Vector& scale) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        const double u = signs(j) * b(j);
        if (!(u > 0.0)) return kInf;
        acc += std::log1p(scale(j) / u);
    }
    return acc;
}

/// Barrier scaling. With `auto_scale` the scale of coordinate j is
/// barrier_scale times the sd of b_j under the node's Gaussian at the
/// observed c, sqrt((A'WA)^{-1}_jj); otherwise it is barrier_scale itself.
struct LaplaceConfig {
    double barrier_scale = 1.0;
    bool auto_scale = true;
    int max_newton = 200;
    int max_halvings = 30;
    double tol = 1e-10;  // on half the squared Newton decrement
};

struct LaplaceResult {
    int node = 0;
    double grid_value = 0.0;
    double optimum = 0.0;
    Vector minimizer;  // aligned with the node's active set
    bool converged = false;
};

/// 0.5 b'Hb + g'b + k: the Gaussian exponent 0.5 eta' W eta written in b.
struct Quadratic {
    Matrix h;
    Vector g;
    double k = 0.0;

    double value(const Vector& b) const { return 0.5 * b.dot(h * b) + g.dot(b) + k; }
};

/// Node i's KKT map along the Gamma(c) line, stored as
/// eta(c, b) = (A0 + d A1) b + r0 + d r1 with d = c - s_obs, and the
/// quadratic form coefficients it induces under W = Omega^{-1}.
class NodeKktMap {
public:
    NodeKktMap(const EdgeTarget& target, const NodewiseSolution& sol, const Matrix& omega_cov)
        : node_(sol.node), s_obs_(target.s_obs), signs_(sol.signs), b_obs_(sol.active_coef) {
        const int p = target.p();
        require(sol.p == p, "NodeKktMap: solution and target disagree on p");
        require(omega_cov.rows() == p - 1 && omega_cov.cols() == p - 1,
                "NodeKktMap: randomization covariance must be (p-1) x (p-1)");
        const auto order = sol.stacked_order();
        const int d = p - 1;
        const int q = sol.q();
        const int i = sol.node;
        auto is_target = [&](int a, int b) {
            return (a == target.j0 && b == target.k0) || (a == target.k0 && b == target.j0);
        };
        Matrix a0(d, q), a1 = Matrix::Zero(d, q);
        Vector r0(d), r1 = Vector::Zero(d);
        for (int r = 0; r < d; ++r) {
            const int row = order[r];
            r0(r) = -target.s(row, i) + (r < q ? sol.lambda * sol.signs(r) : sol.lambda * sol.inactive_subgrad(r - q));
            if (is_target(row, i)) r1(r) = -1.0;
            for (int e = 0; e < q; ++e) {
                const int col = sol.active_set[e];
                a0(r, e) = target.s(row, col) + (r == e ? sol.ridge : 0.0);
                if (is_target(row, col)) a1(r, e) = 1.0;
            }
        }
        // W in stacked order.
        Matrix cov(d, d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) cov(r, c) = omega_cov(predictor_slot(i, order[r]), predictor_slot(i, order[c]));
        }
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success) throw std::invalid_argument("NodeKktMap: randomization covariance not PD");
        const Matrix w = llt.solve(Matrix::Identity(d, d));
        moves_ = a1.any() || r1.any();
        h00_ = a0.transpose() * w * a0;
        h01_ = a0.transpose() * w * a1;
        h11_ = a1.transpose() * w * a1;
        g0_ = a0.transpose() * w * r0;
        g1_ = a0.transpose() * w * r1 + a1.transpose() * w * r0;
        g2_ = a1.transpose() * w * r1;
        k0_ = 0.5 * r0.dot(w * r0);
        k1_ = r0.dot(w * r1);
        k2_ = 0.5 * r1.dot(w * r1);
        natural_sd_ = Vector::Ones(q);
        if (q > 0) {
            Eigen::LLT<Matrix> hl(h00_);
            if (hl.info() == Eigen::Success) {
                natural_sd_ = hl.solve(Matrix::Identity(q, q)).diagonal().cwiseSqrt();
            }
        }
    }

    int node() const { return node_; }
    int q() const { return static_cast<int>(signs_.size()); }
    const Vector& signs() const { return signs_; }
    const Vector& observed_coef() const { return b_obs_; }

    /// sd of each active coefficient under the node's Gaussian at the observed c.
    const Vector& natural_sd() const { return natural_sd_; }

    Vector barrier_scales(const LaplaceConfig& cfg) const {
        return cfg.auto_scale ? Vector(cfg.barrier_scale * natural_sd_)
                              : Vector(Vector::Constant(q(), cfg.barrier_scale));
    }

    /// False when neither T nor U involves the (j0,k0) entry.
    bool depends_on_c() const { return moves_; }

    Quadratic quadratic(double c) const {
        const double d = c - s_obs_;
        Quadratic out;
        out.h = h00_ + d * (h01_ + h01_.transpose()) + d * d * h11_;
        out.g = g0_ + d * g1_ + d * d * g2_;
        out.k = k0_ + d * k1_ + d * d * k2_;
        return out;
    }

private:
    int node_;
    double s_obs_;
    Vector signs_;
    Vector b_obs_;
    bool moves_ = false;
    Matrix h00_, h01_, h11_;
    Vector g0_, g1_, g2_;
    double k0_ = 0.0, k1_ = 0.0, k2_ = 0.0;
    Vector natural_sd_;
};

namespace detail {

inline double barrier_objective(const Quadratic& qf, const Vector& signs, const Vector& scale, const Vector& b) {
    const double bar = barrier(b, signs, scale);
    if (bar == kInf) return kInf;
    return qf.value(b) + bar;
}

/// Damped Newton on 0.5 b'Hb + g'b + k + barrier from a strictly feasible start.
inline bool newton_barrier(const Quadratic& qf, const Vector& signs, const Vector& kappa,
                           const LaplaceConfig& cfg, Vector& b, double& fval) {
    const auto q = b.size();
    fval = barrier_objective(qf, signs, kappa, b);
    if (fval == kInf) return false;
    Vector grad(q);
    Matrix hess(q, q);
    for (int it = 0; it < cfg.max_newton; ++it) {
        grad = qf.h * b + qf.g;
        hess = qf.h;
        for (Eigen::Index j = 0; j < q; ++j) {
            const double u = signs(j) * b(j);
            const double k = kappa(j);
            grad(j) += signs(j) * (-k / (u * (u + k)));
            hess(j, j) += k * (2.0 * u + k) / (u * u * (u + k) * (u + k));
        }
        Eigen::LLT<Matrix> llt(hess);
        if (llt.info() != Eigen::Success) return false;
        const Vector step = -llt.solve(grad);
        const double decrement = -grad.dot(step);
        if (0.5 * decrement <= cfg.tol) return true;

        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
            const Vector trial = b + t * step;
            const double ft = barrier_objective(qf, signs, kappa, trial);
            if (ft <= fval - 0.25 * t * decrement) {
                b = trial;
                fval = ft;
                accepted = true;
                break;
            }
        }
        // No sufficient decrease: rounding floor of the objective.
        if (!accepted) return 0.5 * decrement <= 1e-7 * std::max(1.0, std::abs(fval));
    }
    return false;
}

}  // namespace detail

/// Barrier-penalized minimization of the node's Gaussian exponent at c.
/// `start`, when given, must be strictly sign-feasible; otherwise the
/// observed coefficients are used (feasible for every c).
inline LaplaceResult laplace_min(const NodeKktMap& map, double c, const LaplaceConfig& cfg = {},
                                 const Vector* start = nullptr) {
    LaplaceResult res;
    res.node = map.node();
    res.grid_value = c;
    const Quadratic qf = map.quadratic(c);
    if (map.q() == 0) {
        res.optimum = qf.k;
        res.converged = true;
        return res;
    }
    const Vector kappa = map.barrier_scales(cfg);
    Vector b = start ? *start : map.observed_coef();
    double f = 0.0;
    if (detail::newton_barrier(qf, map.signs(), kappa, cfg, b, f)) {
        res.minimizer = b;
        res.optimum = f;
        res.converged = true;
        return res;
    }
    // Retry from a start pushed away from the boundary.
    b = map.signs().cwiseProduct(2.0 * map.observed_coef().cwiseAbs() + kappa);
    res.converged = detail::newton_barrier(qf, map.signs(), kappa, cfg, b, f);
    res.minimizer = b;
    res.optimum = res.converged ? f : kInf;
    return res;
}

inline LaplaceResult laplace_min(double c, const EdgeTarget& target, const NodewiseSolution& sol,
                                 const Matrix& omega_cov, const LaplaceConfig& cfg = {}) {
    return laplace_min(NodeKktMap(target, sol, omega_cov), c, cfg);
}

/// Log of one node's sign-constrained Gaussian integral at c, up to a constant
/// in c. The production route is -laplace optimum; tests plug exact routes in.
using NodeLogIntegral = std::function<double(const NodeKktMap&, double c)>;

enum class Adjustment {
    Selective,  // full selection-adjusted weight
    None        // Lambda-hat == 0: plain conditional Wishart weight
};

struct AdjustmentConfig {
    LaplaceConfig laplace;
    Adjustment mode = Adjustment::Selective;
    NodeLogIntegral integral;  // empty => Laplace
};

/// Pieces of the weight at one grid value, for inspection.
struct WeightTerms {
    double c = 0.0;
    double logdet = kNegInf;                  // log det Gamma(c), -inf outside the PD cone
    std::vector<double> node_log_integral;    // aligned with target.contributing
    std::vector<double> g_logdet;             // aligned with target.G
    double log_lambda_hat = 0.0;
    bool valid = false;
};

/// Selection-adjusted one-dimensional density of S_{j0,k0} given everything
/// else, evaluated up to normalization. Immutable after construction.
class SelectiveDensity {
public:
    /// Warm starts for the per-node Newton solves; one per thread.
    struct Workspace {
        std::map<int, Vector> warm;
    };

    SelectiveDensity(EdgeTarget target, const SelectionEvent* event, std::vector<Matrix> omega_cov, int n,
                     AdjustmentConfig cfg = {})
        : target_(std::move(target)), event_(event), n_(n), cfg_(std::move(cfg)) {
        const int p = target_.p();
        require(n_ > p + 1, "SelectiveDensity: need n > p + 1");
        if (cfg_.mode == Adjustment::Selective) {
            require(event_ != nullptr, "SelectiveDensity: selective adjustment needs the selection event");
            require(static_cast<int>(omega_cov.size()) == p, "SelectiveDensity: one randomization covariance per node");
            for (int i : target_.contributing) maps_.emplace_back(target_, event_->solutions[i], omega_cov[i]);
        }
    }

    const EdgeTarget& target() const { return target_; }
    int n() const { return n_; }
    const AdjustmentConfig& config() const { return cfg_; }
    const std::vector<NodeKktMap>& node_maps() const { return maps_; }

    /// Interval of c on which Gamma(c) is positive definite. det Gamma(c) is
    /// the quadratic det(S)((1 + d g_jk)^2 - d^2 g_jj g_kk), d = c - s_obs, G = S^{-1}.
    std::pair<double, double> pd_interval() const {
        Eigen::LLT<Matrix> llt(target_.s);
        if (llt.info() != Eigen::Success) throw NumericalError("pd_interval: observed S not positive definite");
        const int p = target_.p();
        Vector ej = Vector::Zero(p), ek = Vector::Zero(p);
        ej(target_.j0) = 1.0;
        ek(target_.k0) = 1.0;
        const Vector gj = llt.solve(ej), gk = llt.solve(ek);
        const double a = gj(target_.j0), b = gj(target_.k0), d = gk(target_.k0);
        const double root = std::sqrt(a * d);
        return {target_.s_obs - 1.0 / (root + b), target_.s_obs + 1.0 / (root - b)};
    }

    WeightTerms terms(double c, Workspace* ws = nullptr) const {
        WeightTerms out;
        out.c = c;
        const Matrix g = gamma_replace(target_, c);
        if (!pd_check(g)) return out;
        out.logdet = logdet_pd(g);
        if (out.logdet == kNegInf) return out;
        out.valid = true;
        if (cfg_.mode == Adjustment::None) return out;
        out.log_lambda_hat = log_lambda_hat(c, g, ws, &out);
        out.valid = out.log_lambda_hat != kNegInf;
        return out;
    }

    /// Sum over contributing nodes of the log integrals plus the G-node
    /// Jacobian terms. -inf when a node fails.
    double log_lambda_hat(double c, Workspace* ws = nullptr) const {
        if (cfg_.mode == Adjustment::None) return 0.0;
        return log_lambda_hat(c, gamma_replace(target_, c), ws, nullptr);
    }

    /// ((n-p-1)/2) log det Gamma(c) - theta0 c + log Lambda-hat(c); -inf off the PD cone.
    double log_weight(double c, double theta0, Workspace* ws = nullptr) const {
        const WeightTerms t = terms(c, ws);
        return combine_terms(t, theta0);
    }

    double combine_terms(const WeightTerms& t, double theta0) const {
        if (!t.valid) return kNegInf;
        const double expo = 0.5 * static_cast<double>(n_ - target_.p() - 1);
        return expo * t.logdet - theta0 * t.c + t.log_lambda_hat;
    }

private:
    double log_lambda_hat(double c, const Matrix& g, Workspace* ws, WeightTerms* out) const {
        double acc = 0.0;
        for (const auto& map : maps_) {
            double v = 0.0;
            if (cfg_.integral) {
                v = cfg_.integral(map, c);
            } else {
                const Vector* start = nullptr;
                if (ws) {
                    auto it = ws->warm.find(map.node());
                    if (it != ws->warm.end()) start = &it->second;
                }
                const LaplaceResult lr = laplace_min(map, c, cfg_.laplace, start);
                v = lr.converged ? -lr.optimum : kNegInf;
                if (ws && lr.converged && map.q() > 0) ws->warm[map.node()] = lr.minimizer;
            }
            if (out) out->node_log_integral.push_back(v);
            acc += v;
        }
        for (int i : target_.G) {
            const auto& sol = event_->solutions[i];
            Matrix block(sol.q(), sol.q());
            for (int r = 0; r < sol.q(); ++r) {
                for (int col = 0; col < sol.q(); ++col) block(r, col) = g(sol.active_set[r], sol.active_set[col]);
            }
            const double v = jacobian_logdet(block, sol.ridge);
            if (out) out->g_logdet.push_back(v);
            acc += v;
        }
        return std::isnan(acc) ? kNegInf : acc;
    }

    EdgeTarget target_;
    const SelectionEvent* event_;
    int n_;
    AdjustmentConfig cfg_;
    std::vector<NodeKktMap> maps_;
};

inline double log_lambda_hat(double c, const EdgeTarget& target, const SelectionEvent& event,
                             const std::vector<Matrix>& omega_cov, int n, const AdjustmentConfig& cfg = {}) {
    return SelectiveDensity(target, &event, omega_cov, n, cfg).log_lambda_hat(c);
}

inline double log_weight(double c, double theta0, const EdgeTarget& target, const SelectionEvent& event,
                         const std::vector<Matrix>& omega_cov, int n, const AdjustmentConfig& cfg = {}) {
    return SelectiveDensity(target, &event, omega_cov, n, cfg).log_weight(c, theta0);
}

}  // namespace ggmsi
