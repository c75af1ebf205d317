#pragma once

#include "core.hpp"
#include "inference.hpp"
#include "simdata.hpp"

#include <optional>

namespace ggmsi {

/// Per-replication evaluation of one method's intervals against the truth.
struct MetricsReport {
    std::optional<double> coverage_rate;  // undefined when nothing was selected
    std::optional<double> avg_length;     // undefined when no bounded interval exists
    std::optional<double> precision;      // undefined when nothing was reported
    double recall = 0.0;
    double f1 = 0.0;
    int n_selected = 0;
    int n_reported = 0;
    int n_true = 0;
    int n_unbounded = 0;
    int n_failed = 0;
};

/// Fraction of selected edges whose interval contains the true theta_jk.
inline std::optional<double> coverage_rate(const std::vector<IntervalResult>& results, const GraphSpec& truth) {
    int total = 0, hit = 0;
    for (const auto& r : results) {
        if (!r.ok()) continue;
        ++total;
        if (r.covers(truth.theta(r.edge.j, r.edge.k))) ++hit;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(hit) / total;
}

struct LengthSummary {
    std::optional<double> mean;
    int unbounded = 0;
};

/// Mean of upper - lower over bounded intervals; unbounded ones are counted and excluded.
inline LengthSummary avg_length(const std::vector<IntervalResult>& results) {
    LengthSummary out;
    double acc = 0.0;
    int count = 0;
    for (const auto& r : results) {
        if (!r.ok()) continue;
        if (!r.bounded()) {
            ++out.unbounded;
            continue;
        }
        acc += r.upper - r.lower;
        ++count;
    }
    if (count > 0) out.mean = acc / count;
    return out;
}

struct PrecisionRecall {
    std::optional<double> precision;
    double recall = 0.0;
    double f1 = 0.0;
    int n_reported = 0;
    int n_true = 0;
};

/// Reported edges are the significant ones (0 outside the interval).
inline PrecisionRecall precision_recall_f1(const std::vector<IntervalResult>& results, const GraphSpec& truth) {
    PrecisionRecall out;
    out.n_true = static_cast<int>(truth.true_edges.size());
    int hits = 0;
    for (const auto& r : results) {
        if (!r.ok() || !r.significant) continue;
        ++out.n_reported;
        if (truth.is_edge(r.edge.j, r.edge.k)) ++hits;
    }
    if (out.n_reported > 0) out.precision = static_cast<double>(hits) / out.n_reported;
    if (out.n_true > 0) out.recall = static_cast<double>(hits) / out.n_true;
    if (out.precision && *out.precision + out.recall > 0.0) {
        out.f1 = 2.0 * *out.precision * out.recall / (*out.precision + out.recall);
    }
    return out;
}

inline MetricsReport evaluate(const std::vector<IntervalResult>& results, const GraphSpec& truth) {
    MetricsReport m;
    m.n_selected = static_cast<int>(results.size());
    for (const auto& r : results) m.n_failed += r.ok() ? 0 : 1;
    m.coverage_rate = coverage_rate(results, truth);
    const auto len = avg_length(results);
    m.avg_length = len.mean;
    m.n_unbounded = len.unbounded;
    const auto pr = precision_recall_f1(results, truth);
    m.precision = pr.precision;
    m.recall = pr.recall;
    m.f1 = pr.f1;
    m.n_reported = pr.n_reported;
    m.n_true = pr.n_true;
    return m;
}

/// Mean and Monte-Carlo standard error over the defined values.
struct BatchStat {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    int count = 0;
    int excluded = 0;
};

inline BatchStat batch_stat(const std::vector<std::optional<double>>& values) {
    BatchStat b;
    double s1 = 0.0, s2 = 0.0;
    for (const auto& v : values) {
        if (!v) {
            ++b.excluded;
            continue;
        }
        ++b.count;
        s1 += *v;
        s2 += *v * *v;
    }
    if (b.count > 0) b.mean = s1 / b.count;
    if (b.count > 1) {
        const double var = std::max(0.0, (s2 - b.count * b.mean * b.mean) / (b.count - 1));
        b.se = std::sqrt(var / b.count);
    }
    return b;
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
inline double ks_uniform_statistic(std::vector<double> u) {
    require(!u.empty(), "ks_uniform_statistic: empty sample");
    std::sort(u.begin(), u.end());
    const auto n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = std::clamp(u[i], 0.0, 1.0);
        d = std::max({d, (i + 1) / n - x, x - i / n});
    }
    return d;
}

/// Asymptotic Kolmogorov p-value P(sqrt(n) D > x) with the Stephens
/// small-sample correction x = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double x = (sn + 0.12 + 0.11 / sn) * d;
    if (x < 0.2) return 1.0;
    double acc = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        acc += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(acc, 0.0, 1.0);
}

}  // namespace ggmsi
