#pragma once

#include "adjustment.hpp"
#include "core.hpp"
#include "parallel.hpp"
#include "selector.hpp"

#include <optional>
#include <ostream>

namespace ggmsi {

struct GridConfig {
    int points = 1201;
    int coarse_points = 161;        // resolution of the width-finding passes
    double init_halfwidth_sd = 8.0; // in units of the Wishart-only curvature sd
    double expansion = 1.5;
    double tail_drop = 40.0;        // required log-weight drop at unclipped endpoints
    int max_expansions = 40;
};

/// Evaluation grid over one entry with its unnormalized log-weights at theta = 0.
struct PivotGrid {
    Edge edge;
    double s_obs = 0.0;
    std::vector<double> points;
    std::vector<double> base_log_weights;  // -inf at invalid points
    std::vector<bool> pd_mask;
    double delta = 0.0;
    int n = 0;
    bool clipped_lo = false;
    bool clipped_hi = false;

    std::size_t size() const { return points.size(); }
};

namespace detail {

/// sd implied by the curvature of ((n-p-1)/2) log det Gamma(c) at s_obs.
/// With G = S^{-1}: d^2/dc^2 log det Gamma = -2 (g_jk^2 + g_jj g_kk).
inline double wishart_curvature_sd(const EdgeTarget& t, int n) {
    Eigen::LLT<Matrix> llt(t.s);
    if (llt.info() != Eigen::Success) throw NumericalError("build_grid: observed S not positive definite");
    const Matrix g = llt.solve(Matrix::Identity(t.p(), t.p()));
    const double curv = 0.5 * (n - t.p() - 1) * 2.0 *
                        (g(t.j0, t.k0) * g(t.j0, t.k0) + g(t.j0, t.j0) * g(t.k0, t.k0));
    return 1.0 / std::sqrt(curv);
}

/// Evaluates base log-weights on `pts`, marching outward from index `center`
/// so each Newton solve is warm-started at its neighbour's minimizer.
inline void evaluate_points(const SelectiveDensity& dens, const std::vector<double>& pts, std::size_t center,
                            std::vector<double>& out, std::vector<WeightTerms>* terms = nullptr) {
    out.assign(pts.size(), kNegInf);
    if (terms) terms->assign(pts.size(), WeightTerms{});
    auto visit = [&](std::size_t m, SelectiveDensity::Workspace& ws) {
        WeightTerms t = dens.terms(pts[m], &ws);
        out[m] = dens.combine_terms(t, 0.0);
        if (terms) (*terms)[m] = std::move(t);
    };
    SelectiveDensity::Workspace up, down;
    for (std::size_t m = center; m < pts.size(); ++m) visit(m, up);
    for (std::size_t m = center; m-- > 0;) visit(m, down);
}

inline std::vector<double> even_points(double lo, double hi, int count) {
    std::vector<double> pts(count);
    for (int m = 0; m < count; ++m) pts[m] = lo + (hi - lo) * m / (count - 1);
    return pts;
}

}  // namespace detail

/// Builds the grid for one edge. The window starts at +-init_halfwidth_sd
/// Wishart sds around s_obs, is clipped to the PD interval of Gamma(c), and
/// widens by `expansion` until both unclipped ends sit at least tail_drop
/// below the peak. Coarse passes then trim the window to the region within
/// tail_drop + 5 of the peak before the final evaluation on `points` nodes,
/// one of which is s_obs itself.
inline PivotGrid build_grid(const SelectiveDensity& dens, const GridConfig& cfg = {}) {
    require(cfg.points >= 5 && cfg.coarse_points >= 5, "build_grid: too few grid points");
    const EdgeTarget& t = dens.target();
    const double s = t.s_obs;
    const auto [pd_lo, pd_hi] = dens.pd_interval();
    const double sd = detail::wishart_curvature_sd(t, dens.n());
    // Stay a hair inside the cone; logdet -> -inf at its boundary.
    const double lo_lim = pd_lo + 1e-9 * (pd_hi - pd_lo);
    const double hi_lim = pd_hi - 1e-9 * (pd_hi - pd_lo);

    double wl = cfg.init_halfwidth_sd * sd;
    double wr = wl;
    std::vector<double> w;
    bool settled = false;
    for (int pass = 0; pass < cfg.max_expansions && !settled; ++pass) {
        const double lo = std::max(s - wl, lo_lim);
        const double hi = std::min(s + wr, hi_lim);
        const bool clip_lo = s - wl <= lo_lim;
        const bool clip_hi = s + wr >= hi_lim;
        auto pts = detail::even_points(lo, hi, cfg.coarse_points);
        std::size_t center = 0;
        while (center + 1 < pts.size() && pts[center + 1] <= s) ++center;
        detail::evaluate_points(dens, pts, center, w);
        const double peak = *std::max_element(w.begin(), w.end());
        if (peak == kNegInf) throw NumericalError("build_grid: no valid grid point");
        std::size_t first = 0, last = w.size() - 1;
        while (w[first] == kNegInf) ++first;
        while (w[last] == kNegInf) --last;
        const bool lo_ok = clip_lo || peak - w[first] >= cfg.tail_drop;
        const bool hi_ok = clip_hi || peak - w[last] >= cfg.tail_drop;
        if (!lo_ok || !hi_ok) {
            if (!lo_ok) wl *= cfg.expansion;
            if (!hi_ok) wr *= cfg.expansion;
            // symmetric growth unless one side is already pinned by the cone
            if (!lo_ok && hi_ok && !clip_hi) wr = std::max(wr, wl);
            if (!hi_ok && lo_ok && !clip_lo) wl = std::max(wl, wr);
            continue;
        }
        std::size_t a = 0, b = w.size() - 1;
        while (a < w.size() && !(w[a] >= peak - cfg.tail_drop - 5.0)) ++a;
        while (b > 0 && !(w[b] >= peak - cfg.tail_drop - 5.0)) --b;
        const double new_lo = a > 0 ? pts[a - 1] : lo;
        const double new_hi = b + 1 < pts.size() ? pts[b + 1] : hi;
        const double keep_lo = std::min(new_lo, s - 2.0 * (hi - lo) / (cfg.coarse_points - 1));
        const double keep_hi = std::max(new_hi, s + 2.0 * (hi - lo) / (cfg.coarse_points - 1));
        const double nl = std::max(keep_lo, lo), nh = std::min(keep_hi, hi);
        // A clipped side that survives trimming stays clipped.
        if (!(clip_lo && nl == lo)) wl = s - nl;
        if (!(clip_hi && nh == hi)) wr = nh - s;
        settled = (nh - nl) >= 0.5 * (hi - lo);
    }
    if (!settled) throw NumericalError("build_grid: tail rule not met within the expansion budget");

    PivotGrid grid;
    grid.edge = Edge(t.j0, t.k0);
    grid.s_obs = s;
    grid.n = dens.n();
    const double lo = std::max(s - wl, lo_lim);
    const double hi = std::min(s + wr, hi_lim);
    grid.clipped_lo = s - wl <= lo_lim;
    grid.clipped_hi = s + wr >= hi_lim;
    const int m_pts = cfg.points;
    grid.delta = (hi - lo) / (m_pts - 1);
    long kl = std::lround((s - lo) / grid.delta);
    kl = std::clamp<long>(kl, 1, m_pts - 2);
    grid.points.resize(m_pts);
    for (int m = 0; m < m_pts; ++m) grid.points[m] = s + static_cast<double>(m - kl) * grid.delta;
    grid.points[kl] = s;
    detail::evaluate_points(dens, grid.points, static_cast<std::size_t>(kl), grid.base_log_weights);
    grid.pd_mask.resize(m_pts);
    for (int m = 0; m < m_pts; ++m) grid.pd_mask[m] = grid.base_log_weights[m] != kNegInf;
    return grid;
}

/// Tilted masses below and above `at`, sharing one scale. A grid point equal
/// to `at` is split evenly between the two (mid-point CDF).
struct TiltedMass {
    double lower = 0.0;
    double upper = 0.0;
};

inline TiltedMass tilted_mass(const PivotGrid& grid, double theta0, double at) {
    double mx = kNegInf;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        if (!grid.pd_mask[m]) continue;
        mx = std::max(mx, grid.base_log_weights[m] - theta0 * (grid.points[m] - grid.s_obs));
    }
    TiltedMass out;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        if (!grid.pd_mask[m]) continue;
        const double v = std::exp(grid.base_log_weights[m] - theta0 * (grid.points[m] - grid.s_obs) - mx);
        if (grid.points[m] == at) {
            out.lower += 0.5 * v;
            out.upper += 0.5 * v;
        } else {
            (grid.points[m] < at ? out.lower : out.upper) += v;
        }
    }
    return out;
}

/// Discrete CDF of the tilted grid density at x.
inline double grid_cdf(const PivotGrid& grid, double theta0, double x) {
    const TiltedMass tm = tilted_mass(grid, theta0, x);
    return tm.lower / (tm.lower + tm.upper);
}

/// Selective pivot: the tilted grid CDF at the observed statistic.
inline double pivot(const PivotGrid& grid, double theta0) { return grid_cdf(grid, theta0, grid.s_obs); }

/// Two-sided p-value 2 min(F, 1 - F), computed from the two tails directly.
inline double p_value(const PivotGrid& grid, double theta0) {
    const TiltedMass tm = tilted_mass(grid, theta0, grid.s_obs);
    return std::min(1.0, 2.0 * std::min(tm.lower, tm.upper) / (tm.lower + tm.upper));
}

enum class Method { Proposed, DataSplit, Naive };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::Proposed: return "proposed";
        case Method::DataSplit: return "split";
        case Method::Naive: return "naive";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "proposed") return Method::Proposed;
    if (s == "split" || s == "data_split") return Method::DataSplit;
    if (s == "naive") return Method::Naive;
    throw std::invalid_argument("unknown inference method '" + std::string(s) + "'");
}

struct IntervalResult {
    Edge edge;
    double lower = -kInf;
    double upper = kInf;
    double pvalue_at_zero = 1.0;
    double alpha = 0.1;
    bool significant = false;
    Method method = Method::Proposed;
    std::string error;  // non-empty when this edge failed

    bool ok() const { return error.empty(); }
    bool bounded() const { return std::isfinite(lower) && std::isfinite(upper); }
    bool covers(double v) const { return lower <= v && v <= upper; }
};

struct IntervalConfig {
    double tol = 1e-6;      // on the pivot value at each endpoint
    int max_expansions = 20;
    bool grid_scan = false; // literal theta-grid scan instead of bisection
    double scan_step = 0.0; // 0: 1e-3 of the bisection interval length
};

namespace detail {

/// sd of the untilted grid density.
inline double grid_sd(const PivotGrid& g) {
    double mx = kNegInf;
    for (std::size_t m = 0; m < g.size(); ++m) mx = std::max(mx, g.base_log_weights[m]);
    double w0 = 0.0, w1 = 0.0, w2 = 0.0;
    for (std::size_t m = 0; m < g.size(); ++m) {
        if (!g.pd_mask[m]) continue;
        const double w = std::exp(g.base_log_weights[m] - mx);
        const double x = g.points[m] - g.s_obs;
        w0 += w;
        w1 += w * x;
        w2 += w * x * x;
    }
    const double var = w2 / w0 - (w1 / w0) * (w1 / w0);
    return std::sqrt(std::max(var, g.delta * g.delta));
}

/// theta with pivot(theta) = target, using monotonicity in theta.
inline std::optional<double> solve_pivot(const PivotGrid& g, double target, const IntervalConfig& cfg,
                                         double scale) {
    double a = 0.0;
    double fa = pivot(g, a);
    if (std::abs(fa - target) <= cfg.tol) return a;
    const double dir = fa < target ? 1.0 : -1.0;
    double step = scale;
    double b = a + dir * step;
    double fb = pivot(g, b);
    int expansions = 0;
    while ((dir > 0 ? fb < target : fb > target)) {
        if (++expansions > cfg.max_expansions) return std::nullopt;
        a = b;
        fa = fb;
        step *= 2.0;
        b = a + dir * step;
        fb = pivot(g, b);
    }
    double lo = std::min(a, b), hi = std::max(a, b);
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = pivot(g, mid);
        if (std::abs(fm - target) <= cfg.tol || mid == lo || mid == hi) return mid;
        (fm < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Literal grid inversion: min and max theta on the scan grid whose pivot
/// lies in (alpha/2, 1 - alpha/2).
inline std::pair<double, double> confidence_interval_scan(const PivotGrid& grid, double alpha, double theta_lo,
                                                          double theta_hi, double step) {
    require(step > 0.0 && theta_hi > theta_lo, "confidence_interval_scan: bad scan range");
    double lo = kInf, hi = -kInf;
    const auto count = static_cast<long>(std::floor((theta_hi - theta_lo) / step));
    for (long m = 0; m <= count; ++m) {
        const double th = theta_lo + step * static_cast<double>(m);
        const double f = pivot(grid, th);
        if (f > alpha / 2.0 && f < 1.0 - alpha / 2.0) {
            lo = std::min(lo, th);
            hi = std::max(hi, th);
        }
    }
    return {lo, hi};
}

/// {theta : alpha/2 < pivot(theta) < 1 - alpha/2} by bisection on each end.
/// An endpoint whose bracket never closes is reported as -inf / +inf.
inline IntervalResult confidence_interval(const PivotGrid& grid, double alpha, const IntervalConfig& cfg = {},
                                          Method method = Method::Proposed) {
    require(alpha > 0.0 && alpha < 1.0, "confidence_interval: alpha must lie in (0, 1)");
    IntervalResult r;
    r.edge = grid.edge;
    r.alpha = alpha;
    r.method = method;
    const double scale = 1.0 / (detail::grid_sd(grid) * detail::grid_sd(grid));
    const auto lo = detail::solve_pivot(grid, alpha / 2.0, cfg, scale);
    const auto hi = detail::solve_pivot(grid, 1.0 - alpha / 2.0, cfg, scale);
    r.lower = lo ? *lo : -kInf;
    r.upper = hi ? *hi : kInf;
    if (cfg.grid_scan && r.bounded()) {
        const double len = r.upper - r.lower;
        const double step = cfg.scan_step > 0.0 ? cfg.scan_step : 1e-3 * len;
        const auto [sl, sh] = confidence_interval_scan(grid, alpha, r.lower - 0.25 * len, r.upper + 0.25 * len, step);
        r.lower = sl;
        r.upper = sh;
    }
    r.pvalue_at_zero = p_value(grid, 0.0);
    r.significant = !(r.lower <= 0.0 && 0.0 <= r.upper);
    return r;
}

/// Everything the per-edge pipeline needs besides the data.
struct InferenceConfig {
    double alpha = 0.1;
    std::vector<Matrix> omega_cov;  // per node, for the proposed method
    AdjustmentConfig adjustment;
    GridConfig grid;
    IntervalConfig interval;
    int threads = 1;
};

inline IntervalResult failed_result(const Edge& e, double alpha, Method m, std::string why) {
    IntervalResult r;
    r.edge = e;
    r.alpha = alpha;
    r.method = m;
    r.lower = std::numeric_limits<double>::quiet_NaN();
    r.upper = std::numeric_limits<double>::quiet_NaN();
    r.pvalue_at_zero = std::numeric_limits<double>::quiet_NaN();
    r.error = std::move(why);
    return r;
}

/// Proposed (selection-adjusted) interval for every selected edge, in edge order.
/// A failing edge is reported in its slot without stopping the rest.
inline std::vector<IntervalResult> infer_all(const SelectionEvent& event, const SuffStat& suff,
                                             const InferenceConfig& cfg) {
    std::vector<IntervalResult> out(event.edges.size());
    parallel_for(event.edges.size(), cfg.threads, [&](std::size_t m) {
        const Edge e = event.edges[m];
        try {
            SelectiveDensity dens(target_sets(event, suff, e.j, e.k), &event, cfg.omega_cov, suff.n, cfg.adjustment);
            const PivotGrid grid = build_grid(dens, cfg.grid);
            out[m] = confidence_interval(grid, cfg.alpha, cfg.interval, Method::Proposed);
        } catch (const std::exception& ex) {
            out[m] = failed_result(e, cfg.alpha, Method::Proposed, ex.what());
        }
    });
    return out;
}

/// Unadjusted interval from the conditional Wishart law of one entry of `s`
/// (n rows) given the others.
inline IntervalResult wishart_interval(const Matrix& s, int n, const Edge& e, double alpha, const GridConfig& grid_cfg,
                                       const IntervalConfig& int_cfg, Method method) {
    AdjustmentConfig none;
    none.mode = Adjustment::None;
    SelectiveDensity dens(unconditional_target(s, e.j, e.k), nullptr, {}, n, none);
    return confidence_interval(build_grid(dens, grid_cfg), alpha, int_cfg, method);
}

inline std::vector<IntervalResult> naive_all(const std::vector<Edge>& edges, const SuffStat& suff,
                                             const InferenceConfig& cfg) {
    std::vector<IntervalResult> out(edges.size());
    parallel_for(edges.size(), cfg.threads, [&](std::size_t m) {
        try {
            out[m] = wishart_interval(suff.s, suff.n, edges[m], cfg.alpha, cfg.grid, cfg.interval, Method::Naive);
        } catch (const std::exception& ex) {
            out[m] = failed_result(edges[m], cfg.alpha, Method::Naive, ex.what());
        }
    });
    return out;
}

/// Data-splitting baseline: the first ceil(n/2) rows select with the plain
/// (omega = 0) nodewise Lasso, the remaining rows carry inference.
struct SplitConfig {
    double sel_alpha = 0.1;  // penalty-level alpha
    double kappa = 1.0;
    double eps = 1e-6;
    Rule rule = Rule::Or;
};

struct SplitSelection {
    SelectionEvent event;
    SuffStat inference;  // S from the held-out rows
    int n_select = 0;
};

inline SplitSelection split_select(const Dataset& data, const SplitConfig& cfg) {
    const auto n = static_cast<int>(data.rows());
    const auto p = static_cast<int>(data.cols());
    const int n1 = (n + 1) / 2;
    const int n2 = n - n1;
    require(n1 > p + 1 && n2 > p + 1, "split_select: each half needs more than p + 1 rows");
    const Dataset sel = data.topRows(n1);
    const Dataset inf = data.bottomRows(n2);
    const SuffStat s_sel = suff_stat(sel);
    const PenaltyWeights pw = penalty_weights(sel, cfg.sel_alpha, cfg.kappa);
    std::vector<Vector> zero(p, Vector::Zero(p - 1));
    SplitSelection out;
    out.event = select_edges(s_sel, pw.lambda, cfg.eps, zero, cfg.rule);
    out.inference = suff_stat(inf);
    out.n_select = n1;
    return out;
}

inline IntervalResult split_interval(const SplitSelection& sel, const Edge& e, double alpha,
                                     const GridConfig& grid_cfg = {}, const IntervalConfig& int_cfg = {}) {
    require(sel.event.has_edge(e), "split_interval: edge not selected on the selection half");
    return wishart_interval(sel.inference.s, sel.inference.n, e, alpha, grid_cfg, int_cfg, Method::DataSplit);
}

inline IntervalResult split_interval(const Dataset& data, const Edge& e, double alpha, const SplitConfig& cfg,
                                     const GridConfig& grid_cfg = {}, const IntervalConfig& int_cfg = {}) {
    return split_interval(split_select(data, cfg), e, alpha, grid_cfg, int_cfg);
}

inline std::vector<IntervalResult> split_all(const SplitSelection& sel, const InferenceConfig& cfg) {
    std::vector<IntervalResult> out(sel.event.edges.size());
    parallel_for(out.size(), cfg.threads, [&](std::size_t m) {
        const Edge e = sel.event.edges[m];
        try {
            out[m] = split_interval(sel, e, cfg.alpha, cfg.grid, cfg.interval);
        } catch (const std::exception& ex) {
            out[m] = failed_result(e, cfg.alpha, Method::DataSplit, ex.what());
        }
    });
    return out;
}

/// Per-point CSV dump: c, logdet, each contributing node's log integral, log_weight.
inline void dump_grid_terms(std::ostream& os, const SelectiveDensity& dens, const PivotGrid& grid) {
    std::vector<double> w;
    std::vector<WeightTerms> terms;
    std::size_t center = 0;
    while (center + 1 < grid.size() && grid.points[center + 1] <= grid.s_obs) ++center;
    detail::evaluate_points(dens, grid.points, center, w, &terms);
    os.precision(17);
    os << "c,logdet";
    for (int i : dens.target().contributing) os << ",node" << i;
    os << ",log_weight\n";
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const auto& t = terms[m];
        os << t.c << ',' << t.logdet;
        for (std::size_t a = 0; a < dens.target().contributing.size(); ++a) {
            os << ',' << (a < t.node_log_integral.size() ? t.node_log_integral[a] : 0.0);
        }
        os << ',' << w[m] << '\n';
    }
}

}  // namespace ggmsi
