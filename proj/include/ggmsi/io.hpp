#pragma once

#include "core.hpp"
#include "inference.hpp"
#include "selector.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace ggmsi::io {

using json = nlohmann::ordered_json;

/// Malformed input file; the message carries the file and line number.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline double parse_cell(const std::string& cell, const std::string& where) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last) {
        throw FormatError(where + ": non-numeric cell '" + cell + "'");
    }
    return v;
}

}  // namespace detail

/// Numeric CSV matrix. Blank lines are skipped; every row must have the same
/// number of cells as the first.
inline Matrix parse_csv(const std::string& text, const std::string& name, bool header,
                        std::vector<std::string>* columns = nullptr) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::size_t width = 0;
    std::vector<std::vector<double>> rows;
    bool seen_header = !header;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_row(line);
        const std::string where = name + ":" + std::to_string(lineno);
        if (!seen_header) {
            seen_header = true;
            width = cells.size();
            if (columns) *columns = cells;
            continue;
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            throw FormatError(where + ": expected " + std::to_string(width) + " cells, found " +
                              std::to_string(cells.size()));
        }
        std::vector<double> row(width);
        for (std::size_t c = 0; c < width; ++c) row[c] = detail::parse_cell(cells[c], where);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(name + ": no data rows");
    Matrix m(rows.size(), width);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

inline std::string format_csv(const Matrix& m, const std::vector<std::string>& header) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    if (!header.empty()) out += '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

inline std::vector<std::string> data_header(int p) {
    std::vector<std::string> h;
    for (int j = 1; j <= p; ++j) h.push_back("x" + std::to_string(j));
    return h;
}

inline Dataset read_data_csv(const std::string& path) { return parse_csv(read_text(path), path, true); }

inline void write_data_csv(const std::string& path, const Dataset& x) {
    write_text(path, format_csv(x, data_header(static_cast<int>(x.cols()))));
}

/// theta.csv: p x p, no header.
inline void write_matrix_csv(const std::string& path, const Matrix& m) { write_text(path, format_csv(m, {})); }

inline Matrix read_matrix_csv(const std::string& path) { return parse_csv(read_text(path), path, false); }

// ---- JSON helpers -------------------------------------------------------

inline json vec_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

inline Vector json_vec(const json& a) {
    Vector v(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) v(k) = a[k].get<double>();
    return v;
}

inline json mat_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
    return a;
}

inline Matrix json_mat(const json& a) {
    if (a.empty()) return Matrix(0, 0);
    Matrix m(a.size(), a[0].size());
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (a[r].size() != static_cast<std::size_t>(m.cols())) throw FormatError("ragged matrix in JSON");
        for (std::size_t c = 0; c < a[r].size(); ++c) m(r, c) = a[r][c].get<double>();
    }
    return m;
}

/// Non-finite values are stored as null; `fill` is what null reads back as.
inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double null_as(const json& v, double fill) { return v.is_null() ? fill : v.get<double>(); }

inline json edges_json(const std::vector<Edge>& edges) {
    json a = json::array();
    for (const auto& e : edges) a.push_back({e.j, e.k});
    return a;
}

inline std::vector<Edge> json_edges(const json& a) {
    std::vector<Edge> out;
    for (const auto& e : a) {
        if (!e.is_array() || e.size() != 2) throw FormatError("edge entries must be [j, k] pairs");
        out.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return out;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json parse_json(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& ex) {
        throw FormatError(path + ": " + ex.what());
    }
}

// ---- run configuration --------------------------------------------------

/// Resolved settings of one CLI invocation. Paths and the thread count do not
/// change results and are left out of the hash.
struct RunConfig {
    std::string command;
    std::uint64_t seed = 1;
    double alpha = 0.1;     // penalty level
    double ci_alpha = 0.1;  // interval level
    double kappa = 1.0;
    double eps = 1.0;
    std::string omega_mode = "unit";  // "unit": Omega = scale^2 I; "data": data-scaled
    double omega_scale = 1.0;
    std::string rule = "or";
    std::vector<std::string> methods;
    int grid_points = 1201;
    int n = 0;
    int p = 0;
    int m = 0;
    double c = 0.0;
    int setting = 0;
    int reps = 0;
    std::vector<double> sweep;
    int threads = 1;
    std::map<std::string, std::string> paths;

    bool operator==(const RunConfig&) const = default;
};

inline json config_json(const RunConfig& c, bool with_volatile = true) {
    json j = {{"command", c.command},
              {"seed", c.seed},
              {"alpha", c.alpha},
              {"ci_alpha", c.ci_alpha},
              {"kappa", c.kappa},
              {"eps", c.eps},
              {"omega_mode", c.omega_mode},
              {"omega_scale", c.omega_scale},
              {"rule", c.rule},
              {"methods", c.methods},
              {"grid_points", c.grid_points},
              {"n", c.n},
              {"p", c.p},
              {"m", c.m},
              {"c", c.c},
              {"setting", c.setting},
              {"reps", c.reps},
              {"sweep", c.sweep}};
    if (with_volatile) {
        j["threads"] = c.threads;
        j["paths"] = c.paths;
    }
    return j;
}

inline RunConfig json_config(const json& j) {
    RunConfig c;
    c.command = j.at("command").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.alpha = j.at("alpha").get<double>();
    c.ci_alpha = j.at("ci_alpha").get<double>();
    c.kappa = j.at("kappa").get<double>();
    c.eps = j.at("eps").get<double>();
    c.omega_mode = j.at("omega_mode").get<std::string>();
    c.omega_scale = j.at("omega_scale").get<double>();
    c.rule = j.at("rule").get<std::string>();
    c.methods = j.at("methods").get<std::vector<std::string>>();
    c.grid_points = j.at("grid_points").get<int>();
    c.n = j.at("n").get<int>();
    c.p = j.at("p").get<int>();
    c.m = j.at("m").get<int>();
    c.c = j.at("c").get<double>();
    c.setting = j.at("setting").get<int>();
    c.reps = j.at("reps").get<int>();
    c.sweep = j.at("sweep").get<std::vector<double>>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("paths")) c.paths = j.at("paths").get<std::map<std::string, std::string>>();
    return c;
}

/// FNV-1a over the compact canonical dump, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
    const std::string text = config_json(c, false).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Sidecar record written next to every output set.
inline json run_record(const RunConfig& c, const std::vector<std::string>& outputs) {
    return {{"config", config_json(c)}, {"config_hash", config_hash(c)}, {"outputs", outputs}};
}

// ---- selection ----------------------------------------------------------

inline json solution_json(const NodewiseSolution& s) {
    return {{"node", s.node},
            {"lambda", s.lambda},
            {"ridge", s.ridge},
            {"omega", vec_json(s.omega)},
            {"active_set", s.active_set},
            {"signs", vec_json(s.signs)},
            {"active_coef", vec_json(s.active_coef)},
            {"inactive_set", s.inactive_set},
            {"inactive_subgrad", vec_json(s.inactive_subgrad)},
            {"objective", s.objective},
            {"sweeps", s.sweeps}};
}

inline NodewiseSolution json_solution(const json& j, int p) {
    NodewiseSolution s;
    s.node = j.at("node").get<int>();
    s.p = p;
    s.lambda = j.at("lambda").get<double>();
    s.ridge = j.at("ridge").get<double>();
    s.omega = json_vec(j.at("omega"));
    s.active_set = j.at("active_set").get<std::vector<int>>();
    s.signs = json_vec(j.at("signs"));
    s.active_coef = json_vec(j.at("active_coef"));
    s.inactive_set = j.at("inactive_set").get<std::vector<int>>();
    s.inactive_subgrad = json_vec(j.at("inactive_subgrad"));
    s.objective = j.at("objective").get<double>();
    s.sweeps = j.at("sweeps").get<int>();
    if (s.omega.size() != p - 1 || s.signs.size() != s.q() || s.active_coef.size() != s.q() ||
        s.inactive_subgrad.size() != s.qbar() || s.q() + s.qbar() != p - 1) {
        throw FormatError("selection: inconsistent record for node " + std::to_string(s.node));
    }
    return s;
}

/// Everything inference needs to condition on: the solved event, the
/// randomization covariances and the selection settings.
struct SelectionRecord {
    SelectionEvent event;
    std::vector<Matrix> omega_cov;
    int n = 0;
    RunConfig config;
};

inline json selection_json(const SelectionRecord& r) {
    json nodes = json::array();
    for (const auto& s : r.event.solutions) nodes.push_back(solution_json(s));
    json cov = json::array();
    for (const auto& m : r.omega_cov) cov.push_back(mat_json(m));
    return {{"n", r.n},
            {"p", r.event.p()},
            {"rule", std::string(to_string(r.event.rule))},
            {"nodes", nodes},
            {"omega_cov", cov},
            {"edges", edges_json(r.event.edges)},
            {"config", config_json(r.config)},
            {"config_hash", config_hash(r.config)}};
}

inline SelectionRecord json_selection(const json& j) {
    SelectionRecord r;
    r.n = j.at("n").get<int>();
    const int p = j.at("p").get<int>();
    std::vector<NodewiseSolution> sols;
    for (const auto& node : j.at("nodes")) sols.push_back(json_solution(node, p));
    r.event = combine(std::move(sols), parse_rule(j.at("rule").get<std::string>()));
    if (r.event.edges != json_edges(j.at("edges"))) {
        throw FormatError("selection: edge list does not match the nodewise active sets");
    }
    for (const auto& m : j.at("omega_cov")) r.omega_cov.push_back(json_mat(m));
    if (static_cast<int>(r.omega_cov.size()) != p) throw FormatError("selection: one omega_cov per node required");
    r.config = json_config(j.at("config"));
    return r;
}

// ---- results ------------------------------------------------------------

inline json results_json(const std::vector<IntervalResult>& results) {
    json a = json::array();
    for (const auto& r : results) {
        json o = {{"edge", {r.edge.j, r.edge.k}},
                  {"lower", num_or_null(r.lower)},
                  {"upper", num_or_null(r.upper)},
                  {"pvalue", num_or_null(r.pvalue_at_zero)},
                  {"significant", r.significant},
                  {"method", std::string(to_string(r.method))}};
        if (!r.ok()) o["error"] = r.error;
        a.push_back(std::move(o));
    }
    return a;
}

inline std::vector<IntervalResult> json_results(const json& a) {
    std::vector<IntervalResult> out;
    for (const auto& o : a) {
        IntervalResult r;
        const auto e = o.at("edge");
        r.edge = Edge(e.at(0).get<int>(), e.at(1).get<int>());
        r.method = parse_method(o.at("method").get<std::string>());
        r.significant = o.at("significant").get<bool>();
        if (o.contains("error")) {
            r.error = o.at("error").get<std::string>();
            r.lower = r.upper = r.pvalue_at_zero = std::numeric_limits<double>::quiet_NaN();
        } else {
            r.lower = null_as(o.at("lower"), -kInf);
            r.upper = null_as(o.at("upper"), kInf);
            r.pvalue_at_zero = null_as(o.at("pvalue"), std::numeric_limits<double>::quiet_NaN());
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace ggmsi::io
