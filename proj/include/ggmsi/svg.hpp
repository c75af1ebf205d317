#pragma once

#include "benchmark.hpp"

#include <cstdio>
#include <string>

namespace ggmsi {

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline const char* method_color(Method m) {
    switch (m) {
        case Method::Proposed: return "#1f77b4";
        case Method::DataSplit: return "#d62728";
        case Method::Naive: return "#7f7f7f";
    }
    return "#000000";
}

}  // namespace detail

/// Static SVG with one panel per metric (coverage, average length, F1) against
/// the sweep value. Points are means; bars span one Monte-Carlo standard error.
inline std::string render_svg(const std::vector<SummaryCell>& cells, SweepAxis axis, const std::string& title,
                              double target_coverage = 0.9) {
    const double pw = 300, ph = 240, ml = 60, mt = 50, gap = 40;
    const double width = ml + 3 * (pw + gap), height = mt + ph + 80;
    std::vector<double> xs;
    std::vector<Method> methods;
    for (const auto& c : cells) {
        if (std::find(xs.begin(), xs.end(), c.value) == xs.end()) xs.push_back(c.value);
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    }
    std::sort(xs.begin(), xs.end());
    const double xlo = xs.empty() ? 0.0 : xs.front(), xhi = xs.empty() ? 1.0 : xs.back();
    const double xpad = xhi > xlo ? 0.08 * (xhi - xlo) : 0.5;

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt("%.0f", width) +
                    "\" height=\"" + detail::fmt("%.0f", height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + detail::fmt("%.1f", width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         title + "</text>\n";

    const char* names[3] = {"Coverage", "Average length", "F1"};
    for (int panel = 0; panel < 3; ++panel) {
        auto stat = [&](const SummaryCell& c) -> const BatchStat& {
            return panel == 0 ? c.coverage : panel == 1 ? c.length : c.f1;
        };
        double ylo = kInf, yhi = -kInf;
        for (const auto& c : cells) {
            const auto& b = stat(c);
            if (!std::isfinite(b.mean)) continue;
            const double se = std::isfinite(b.se) ? b.se : 0.0;
            ylo = std::min(ylo, b.mean - se);
            yhi = std::max(yhi, b.mean + se);
        }
        if (panel == 0) {
            ylo = std::min(ylo, target_coverage);
            yhi = std::max(yhi, target_coverage);
        }
        if (!std::isfinite(ylo)) ylo = 0.0, yhi = 1.0;
        if (yhi - ylo < 1e-9) ylo -= 0.5, yhi += 0.5;
        const double ypad = 0.08 * (yhi - ylo);
        ylo -= ypad;
        yhi += ypad;
        const double ox = ml + panel * (pw + gap), oy = mt;
        auto px = [&](double v) { return ox + (v - (xlo - xpad)) / ((xhi + xpad) - (xlo - xpad)) * pw; };
        auto py = [&](double v) { return oy + ph - (v - ylo) / (yhi - ylo) * ph; };

        s += "<rect x=\"" + detail::fmt("%.1f", ox) + "\" y=\"" + detail::fmt("%.1f", oy) + "\" width=\"" +
             detail::fmt("%.0f", pw) + "\" height=\"" + detail::fmt("%.0f", ph) +
             "\" fill=\"none\" stroke=\"black\"/>\n";
        s += "<text x=\"" + detail::fmt("%.1f", ox + pw / 2) + "\" y=\"" + detail::fmt("%.1f", oy - 8) +
             "\" text-anchor=\"middle\">" + names[panel] + "</text>\n";
        s += "<text x=\"" + detail::fmt("%.1f", ox + pw / 2) + "\" y=\"" + detail::fmt("%.1f", oy + ph + 32) +
             "\" text-anchor=\"middle\">" + std::string(to_string(axis)) + "</text>\n";
        for (double v : xs) {
            s += "<text x=\"" + detail::fmt("%.1f", px(v)) + "\" y=\"" + detail::fmt("%.1f", oy + ph + 15) +
                 "\" text-anchor=\"middle\">" + detail::fmt("%g", v) + "</text>\n";
        }
        for (int t = 0; t <= 4; ++t) {
            const double v = ylo + (yhi - ylo) * t / 4.0;
            s += "<text x=\"" + detail::fmt("%.1f", ox - 5) + "\" y=\"" + detail::fmt("%.1f", py(v) + 4) +
                 "\" text-anchor=\"end\">" + detail::fmt("%.3g", v) + "</text>\n";
        }
        if (panel == 0) {
            s += "<line x1=\"" + detail::fmt("%.1f", ox) + "\" x2=\"" + detail::fmt("%.1f", ox + pw) + "\" y1=\"" +
                 detail::fmt("%.1f", py(target_coverage)) + "\" y2=\"" + detail::fmt("%.1f", py(target_coverage)) +
                 "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
        }
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const double shift = (static_cast<double>(mi) - 0.5 * (methods.size() - 1)) * 6.0;
            const char* col = detail::method_color(methods[mi]);
            std::string path;
            for (const auto& c : cells) {
                if (c.method != methods[mi]) continue;
                const auto& b = stat(c);
                if (!std::isfinite(b.mean)) continue;
                const double x = px(c.value) + shift;
                const double se = std::isfinite(b.se) ? b.se : 0.0;
                s += "<line x1=\"" + detail::fmt("%.1f", x) + "\" x2=\"" + detail::fmt("%.1f", x) + "\" y1=\"" +
                     detail::fmt("%.1f", py(b.mean - se)) + "\" y2=\"" + detail::fmt("%.1f", py(b.mean + se)) +
                     "\" stroke=\"" + col + "\"/>\n";
                s += "<circle cx=\"" + detail::fmt("%.1f", x) + "\" cy=\"" + detail::fmt("%.1f", py(b.mean)) +
                     "\" r=\"3\" fill=\"" + col + "\"/>\n";
                path += (path.empty() ? "M" : " L") + detail::fmt("%.1f", x) + "," + detail::fmt("%.1f", py(b.mean));
            }
            if (!path.empty()) s += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + col + "\"/>\n";
        }
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const double x = ml + mi * 120.0, y = height - 15;
        s += "<rect x=\"" + detail::fmt("%.1f", x) + "\" y=\"" + detail::fmt("%.1f", y - 10) +
             "\" width=\"12\" height=\"12\" fill=\"" + detail::method_color(methods[mi]) + "\"/>\n";
        s += "<text x=\"" + detail::fmt("%.1f", x + 18) + "\" y=\"" + detail::fmt("%.1f", y) + "\">" +
             std::string(to_string(methods[mi])) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace ggmsi
