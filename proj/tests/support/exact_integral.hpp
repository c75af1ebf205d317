#pragma once
// Exact sign-constrained Gaussian integrals for nodes with q <= 2: the
// reference the Laplace route is compared against.

#include <ggmsi/adjustment.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

/// log erfc(x), stable for large positive x.
inline double log_erfc(double x) {
    if (x < 25.0) return std::log(boost::math::erfc(x));
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / (2 * x2) + 3.0 / (4 * x2 * x2) - 15.0 / (8 * x2 * x2 * x2) +
                          105.0 / (16 * x2 * x2 * x2 * x2);
    return -x2 - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series);
}

/// log of int_0^inf exp(-(h u^2 / 2 + g u)) du, h > 0.
inline double log_half_line(double h, double g) {
    const double r = std::sqrt(2.0 * h);
    return 0.5 * std::log(std::numbers::pi / (2.0 * h)) + g * g / (2.0 * h) + log_erfc(g / r);
}

/// log of int over {signs_j b_j > 0} of exp(-(b'Hb/2 + g'b + k)) db for q <= 2.
/// q = 1 is closed form; q = 2 integrates the closed-form inner dimension
/// with adaptive Gauss-Kronrod over the outer one.
inline double log_orthant_integral(const ggmsi::Quadratic& qf, const ggmsi::Vector& signs) {
    const auto q = signs.size();
    if (q == 0) return -qf.k;
    ggmsi::Matrix h = signs.asDiagonal() * qf.h * signs.asDiagonal();
    ggmsi::Vector g = signs.asDiagonal() * qf.g;
    if (q == 1) return -qf.k + log_half_line(h(0, 0), g(0));
    if (q != 2) throw std::invalid_argument("exact integral oracle supports q <= 2 only");

    auto log_f = [&](double u) {
        return -(0.5 * h(0, 0) * u * u + g(0) * u) + log_half_line(h(1, 1), g(1) + h(0, 1) * u);
    };
    const ggmsi::Matrix cov = h.inverse();
    const ggmsi::Vector mu = -cov * g;
    const double sd1 = std::sqrt(cov(0, 0));
    const double cond_mean = mu(0) - cov(0, 1) / cov(1, 1) * mu(1);
    const double upper = std::max({0.0, mu(0), cond_mean}) + 40.0 * std::max(sd1, 1.0 / std::sqrt(h(0, 0)));

    const int coarse = 4000;
    double peak = -std::numeric_limits<double>::infinity();
    std::vector<double> lv(coarse + 1);
    for (int m = 0; m <= coarse; ++m) {
        lv[m] = log_f(upper * m / coarse);
        peak = std::max(peak, lv[m]);
    }
    int first = 0, last = coarse;
    while (first < coarse && lv[first] < peak - 60.0) ++first;
    while (last > 0 && lv[last] < peak - 60.0) --last;
    const double a = upper * std::max(0, first - 1) / coarse;
    const double b = upper * std::min(coarse, last + 1) / coarse;
    const double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double u) { return std::exp(log_f(u) - peak); }, a, b, 20, 1e-13);
    return -qf.k + peak + std::log(val);
}

/// NodeLogIntegral hook: exact log integral of node i's Gaussian over H^i at c.
inline ggmsi::NodeLogIntegral exact_node_integral() {
    return [](const ggmsi::NodeKktMap& map, double c) {
        return log_orthant_integral(map.quadratic(c), map.signs());
    };
}

}  // namespace oracle
