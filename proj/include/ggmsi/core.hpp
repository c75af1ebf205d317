#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ggmsi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n x p data matrix, one observation per row.
using Dataset = Eigen::MatrixXd;

/// Unordered node pair stored with first < second (0-indexed).
struct Edge {
    int j = 0;
    int k = 0;

    Edge() = default;
    Edge(int a, int b) : j(a < b ? a : b), k(a < b ? b : a) {}

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Numerical failure (non-convergence, loss of definiteness).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

/// Positive-definiteness test used for every Gamma(c) and S check: a plain
/// Cholesky whose pivots must all exceed 1e-12 * trace / p.
inline bool pd_check(const Matrix& m) {
    const auto p = m.rows();
    if (p == 0 || m.cols() != p) return false;
    const double floor = 1e-12 * m.trace() / static_cast<double>(p);
    if (!(floor > 0.0)) return false;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < p; ++i) {
        const double pivot = l(i, i) * l(i, i);
        if (!(pivot > floor)) return false;
    }
    return true;
}

/// log det of a symmetric matrix via Cholesky; -inf when not positive definite.
inline double logdet_pd(const Matrix& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return kNegInf;
    const auto& l = llt.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double d = l(i, i);
        if (!(d > 0.0)) return kNegInf;
        acc += std::log(d);
    }
    return 2.0 * acc;
}

/// Stable log(sum(exp(v))) over the finite entries of v.
inline double log_sum_exp(const std::vector<double>& v) {
    double mx = kNegInf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

}  // namespace ggmsi
