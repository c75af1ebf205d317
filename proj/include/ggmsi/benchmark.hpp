#pragma once

#include "inference.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "simdata.hpp"

#include <map>

namespace ggmsi {

enum class SweepAxis { C, M, Kappa };

inline std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::C: return "c";
        case SweepAxis::M: return "m";
        case SweepAxis::Kappa: return "kappa";
    }
    return "?";
}

inline SweepAxis parse_axis(std::string_view s) {
    if (s == "c") return SweepAxis::C;
    if (s == "m") return SweepAxis::M;
    if (s == "kappa") return SweepAxis::Kappa;
    throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "'");
}

enum class OmegaMode { Unit, Data };

inline OmegaMode parse_omega_mode(std::string_view s) {
    if (s == "unit") return OmegaMode::Unit;
    if (s == "data") return OmegaMode::Data;
    throw std::invalid_argument("unknown randomization mode '" + std::string(s) + "'");
}

inline RandomizationSpec make_randomization(const Dataset& x, OmegaMode mode, double scale, std::uint64_t seed) {
    return mode == OmegaMode::Unit ? RandomizationSpec::isotropic(static_cast<int>(x.cols()), scale, seed)
                                   : RandomizationSpec::data_scaled(x, scale, seed);
}

struct BenchmarkSpec {
    int n = 400;
    int p = 20;
    int reps = 100;
    std::uint64_t seed = 1;
    double alpha = 0.1;     // penalty level
    double ci_alpha = 0.1;  // interval level
    double eps = 1.0;
    OmegaMode omega_mode = OmegaMode::Data;
    double omega_scale = 1.0;
    Rule rule = Rule::And;
    std::vector<Method> methods{Method::Proposed, Method::DataSplit};
    SweepAxis axis = SweepAxis::C;
    std::vector<double> values{0.4, 0.5, 0.6, 0.7, 0.8};
    int m = 2;
    double c = 0.6;
    double kappa = 0.5;
    GridConfig grid;
    int threads = 1;
};

/// Setting I sweeps c at m = 2; Setting II sweeps m at c = 1.
inline BenchmarkSpec setting_spec(int setting) {
    BenchmarkSpec s;
    if (setting == 1) {
        s.axis = SweepAxis::C;
        s.m = 2;
        s.values = {0.4, 0.5, 0.6, 0.7, 0.8};
    } else if (setting == 2) {
        s.axis = SweepAxis::M;
        s.c = 1.0;
        s.values = {1, 2, 3, 4, 5};
    } else {
        throw std::invalid_argument("setting must be 1 or 2");
    }
    return s;
}

/// Lambda sweep at n = 200, p = 10, m = 2, c = 0.6.
inline BenchmarkSpec lambda_sweep_spec() {
    BenchmarkSpec s;
    s.n = 200;
    s.p = 10;
    s.reps = 200;
    s.axis = SweepAxis::Kappa;
    s.m = 2;
    s.c = 0.6;
    s.values = {0.5, 0.75, 1.0, 1.25, 1.5};
    s.methods = {Method::Proposed, Method::DataSplit, Method::Naive};
    return s;
}

struct BenchmarkRow {
    int value_index = 0;
    double value = 0.0;
    int rep = 0;
    Method method = Method::Proposed;
    MetricsReport metrics;
    double kkt_max = 0.0;  // worst KKT residual among this method's nodewise solves
    int n_solves = 0;
};

/// Seeds per replication: shared across sweep values so that a sweep compares
/// methods on common draws.
struct ReplicationSeeds {
    std::uint64_t graph, data, omega;
};

inline ReplicationSeeds replication_seeds(std::uint64_t seed, int rep) {
    const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(rep));
    return {derive_seed(base, 0), derive_seed(base, 1), derive_seed(base, 2)};
}

/// One replication at one sweep value: one row per requested method.
inline std::vector<BenchmarkRow> run_replication(const BenchmarkSpec& spec, int vi, int rep) {
    const double value = spec.values.at(vi);
    int m = spec.m;
    double c = spec.c;
    double kappa = spec.kappa;
    if (spec.axis == SweepAxis::C) c = value;
    if (spec.axis == SweepAxis::M) m = static_cast<int>(std::lround(value));
    if (spec.axis == SweepAxis::Kappa) kappa = value;

    const auto seeds = replication_seeds(spec.seed, rep);
    const GraphSpec g = generate_precision(spec.p, m, c, seeds.graph);
    const Dataset x = sample_data(g, spec.n, seeds.data);
    const SuffStat s = suff_stat(x);

    InferenceConfig icfg;
    icfg.alpha = spec.ci_alpha;
    icfg.grid = spec.grid;

    std::optional<SelectionEvent> event;
    auto randomized = [&]() -> const SelectionEvent& {
        if (!event) {
            const auto rs = make_randomization(x, spec.omega_mode, spec.omega_scale, seeds.omega);
            const auto pw = penalty_weights(x, spec.alpha, kappa);
            event = select_edges(s, pw.lambda, spec.eps, rs.draw_all(), spec.rule);
            icfg.omega_cov = rs.cov;
        }
        return *event;
    };
    auto kkt_of = [](const SelectionEvent& ev, const SuffStat& ss, BenchmarkRow& row) {
        for (const auto& sol : ev.solutions) row.kkt_max = std::max(row.kkt_max, verify_kkt(sol, ss));
        row.n_solves = ev.p();
    };

    std::vector<BenchmarkRow> rows;
    for (Method method : spec.methods) {
        BenchmarkRow row;
        row.value_index = vi;
        row.value = value;
        row.rep = rep;
        row.method = method;
        std::vector<IntervalResult> res;
        if (method == Method::DataSplit) {
            SplitConfig sc;
            sc.sel_alpha = spec.alpha;
            sc.kappa = kappa;
            sc.rule = spec.rule;
            const SplitSelection sel = split_select(x, sc);
            kkt_of(sel.event, suff_stat(x.topRows(sel.n_select)), row);
            res = split_all(sel, icfg);
        } else {
            const SelectionEvent& ev = randomized();
            kkt_of(ev, s, row);
            res = method == Method::Proposed ? infer_all(ev, s, icfg) : naive_all(ev.edges, s, icfg);
        }
        row.metrics = evaluate(res, g);
        rows.push_back(row);
    }
    return rows;
}

/// Rows ordered by (sweep value, replication, method), independent of threading.
inline std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec) {
    require(spec.reps > 0, "benchmark: reps must be positive");
    require(!spec.values.empty() && !spec.methods.empty(), "benchmark: empty sweep or method list");
    const std::size_t nv = spec.values.size();
    std::vector<std::vector<BenchmarkRow>> cells(nv * spec.reps);
    parallel_for(cells.size(), spec.threads, [&](std::size_t t) {
        cells[t] = run_replication(spec, static_cast<int>(t / spec.reps), static_cast<int>(t % spec.reps));
    });
    std::vector<BenchmarkRow> rows;
    for (auto& c : cells) rows.insert(rows.end(), c.begin(), c.end());
    return rows;
}

namespace detail {

inline std::string opt_cell(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace detail

inline const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> cols{
        "config_hash", "axis",     "value",      "rep",       "method", "n_selected", "n_reported", "n_true",
        "n_failed",    "n_unbounded", "coverage", "avg_length", "precision", "recall", "f1",      "kkt_max"};
    return cols;
}

/// One row per replication x method x sweep value; undefined metrics are empty cells.
inline std::string metrics_csv(const std::vector<BenchmarkRow>& rows, SweepAxis axis, const std::string& hash) {
    std::string out;
    const auto& cols = metrics_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
    out += '\n';
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out += hash + ',' + std::string(to_string(axis)) + ',' + io::format_double(r.value) + ',' +
               std::to_string(r.rep) + ',' + std::string(to_string(r.method)) + ',' + std::to_string(m.n_selected) +
               ',' + std::to_string(m.n_reported) + ',' + std::to_string(m.n_true) + ',' +
               std::to_string(m.n_failed) + ',' + std::to_string(m.n_unbounded) + ',' +
               detail::opt_cell(m.coverage_rate) + ',' + detail::opt_cell(m.avg_length) + ',' +
               detail::opt_cell(m.precision) + ',' + io::format_double(m.recall) + ',' + io::format_double(m.f1) +
               ',' + io::format_double(r.kkt_max) + '\n';
    }
    return out;
}

/// Aggregated statistics for one (sweep value, method) cell.
struct SummaryCell {
    double value = 0.0;
    Method method = Method::Proposed;
    BatchStat coverage, length, f1, precision, recall;
    int n_selected = 0;
    int n_failed = 0;
    int n_unbounded = 0;
};

inline std::vector<SummaryCell> summarize(const std::vector<BenchmarkRow>& rows) {
    std::map<std::pair<double, int>, std::vector<const BenchmarkRow*>> groups;
    for (const auto& r : rows) groups[{r.value, static_cast<int>(r.method)}].push_back(&r);
    std::vector<SummaryCell> out;
    for (const auto& [key, members] : groups) {
        SummaryCell cell;
        cell.value = key.first;
        cell.method = static_cast<Method>(key.second);
        std::vector<std::optional<double>> cov, len, f1, prec, rec;
        for (const auto* r : members) {
            cov.push_back(r->metrics.coverage_rate);
            len.push_back(r->metrics.avg_length);
            f1.push_back(r->metrics.f1);
            prec.push_back(r->metrics.precision);
            rec.push_back(r->metrics.recall);
            cell.n_selected += r->metrics.n_selected;
            cell.n_failed += r->metrics.n_failed;
            cell.n_unbounded += r->metrics.n_unbounded;
        }
        cell.coverage = batch_stat(cov);
        cell.length = batch_stat(len);
        cell.f1 = batch_stat(f1);
        cell.precision = batch_stat(prec);
        cell.recall = batch_stat(rec);
        out.push_back(cell);
    }
    return out;
}

inline io::json batch_json(const BatchStat& b) {
    return {{"mean", io::num_or_null(b.mean)},
            {"se", io::num_or_null(b.se)},
            {"count", b.count},
            {"excluded", b.excluded}};
}

inline io::json summary_json(const std::vector<SummaryCell>& cells, SweepAxis axis, const std::string& hash) {
    io::json a = io::json::array();
    for (const auto& c : cells) {
        a.push_back({{"value", c.value},
                     {"method", std::string(to_string(c.method))},
                     {"coverage", batch_json(c.coverage)},
                     {"avg_length", batch_json(c.length)},
                     {"f1", batch_json(c.f1)},
                     {"precision", batch_json(c.precision)},
                     {"recall", batch_json(c.recall)},
                     {"n_selected", c.n_selected},
                     {"n_failed", c.n_failed},
                     {"n_unbounded", c.n_unbounded}});
    }
    return {{"config_hash", hash}, {"axis", std::string(to_string(axis))}, {"cells", a}};
}

/// Reads metrics.csv back into rows (metrics fields only).
inline std::pair<SweepAxis, std::vector<BenchmarkRow>> read_metrics_csv(const std::string& path) {
    const std::string text = io::read_text(path);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    SweepAxis axis = SweepAxis::C;
    std::vector<BenchmarkRow> rows;
    const auto& cols = metrics_columns();
    auto opt = [](const std::string& cell, const std::string& where) -> std::optional<double> {
        if (cell.empty()) return std::nullopt;
        return io::detail::parse_cell(cell, where);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (io::detail::trim(line).empty()) continue;
        const auto cells = io::detail::split_row(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (cells.size() != cols.size()) {
            throw io::FormatError(where + ": expected " + std::to_string(cols.size()) + " cells, found " +
                                  std::to_string(cells.size()));
        }
        if (lineno == 1) {
            if (cells != cols) throw io::FormatError(where + ": unexpected header");
            continue;
        }
        BenchmarkRow r;
        axis = parse_axis(cells[1]);
        r.value = io::detail::parse_cell(cells[2], where);
        r.rep = static_cast<int>(io::detail::parse_cell(cells[3], where));
        r.method = parse_method(cells[4]);
        r.metrics.n_selected = static_cast<int>(io::detail::parse_cell(cells[5], where));
        r.metrics.n_reported = static_cast<int>(io::detail::parse_cell(cells[6], where));
        r.metrics.n_true = static_cast<int>(io::detail::parse_cell(cells[7], where));
        r.metrics.n_failed = static_cast<int>(io::detail::parse_cell(cells[8], where));
        r.metrics.n_unbounded = static_cast<int>(io::detail::parse_cell(cells[9], where));
        r.metrics.coverage_rate = opt(cells[10], where);
        r.metrics.avg_length = opt(cells[11], where);
        r.metrics.precision = opt(cells[12], where);
        r.metrics.recall = io::detail::parse_cell(cells[13], where);
        r.metrics.f1 = io::detail::parse_cell(cells[14], where);
        r.kkt_max = io::detail::parse_cell(cells[15], where);
        rows.push_back(r);
    }
    return {axis, rows};
}

}  // namespace ggmsi
