// ggmsi command line: simulate -> fit -> infer -> benchmark -> plot.

#include <ggmsi/benchmark.hpp>
#include <ggmsi/io.hpp>
#include <ggmsi/svg.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace ggmsi;

namespace {

std::string sidecar_for(const std::string& out) {
    fs::path p(out);
    return (p.parent_path() / (p.stem().string() + ".config.json")).string();
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(',', start);
        out.push_back(s.substr(start, pos == std::string::npos ? pos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

struct SimulateArgs {
    int n = 400, p = 20, m = 2;
    double c = 0.6;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

int run_simulate(const SimulateArgs& a) {
    io::RunConfig cfg;
    cfg.command = "simulate";
    cfg.seed = a.seed;
    cfg.n = a.n;
    cfg.p = a.p;
    cfg.m = a.m;
    cfg.c = a.c;
    const GraphSpec g = generate_precision(a.p, a.m, a.c, derive_seed(a.seed, 0));
    const Dataset x = sample_data(g, a.n, derive_seed(a.seed, 1));
    ensure_dir(a.out_dir);
    cfg.paths = {{"out_dir", a.out_dir}};
    io::write_data_csv(in_dir(a.out_dir, "data.csv"), x);
    io::write_matrix_csv(in_dir(a.out_dir, "theta.csv"), g.theta);
    io::write_text(in_dir(a.out_dir, "edges.json"), io::dump(io::edges_json(g.true_edges)));
    io::write_text(in_dir(a.out_dir, "run_config.json"),
                   io::dump(io::run_record(cfg, {"data.csv", "theta.csv", "edges.json"})));
    std::cout << "simulate: n=" << a.n << " p=" << a.p << " true edges=" << g.true_edges.size()
              << " config_hash=" << io::config_hash(cfg) << "\n";
    return 0;
}

struct FitArgs {
    std::string data = "data.csv";
    std::string out = "selection.json";
    double alpha = 0.1, kappa = 1.0, eps = 1.0, omega_scale = 1.0;
    std::string rule = "or", omega_mode = "unit";
    std::uint64_t seed = 1;
};

int run_fit(const FitArgs& a) {
    io::RunConfig cfg;
    cfg.command = "fit";
    cfg.seed = a.seed;
    cfg.alpha = a.alpha;
    cfg.kappa = a.kappa;
    cfg.eps = a.eps;
    cfg.omega_mode = a.omega_mode;
    cfg.omega_scale = a.omega_scale;
    cfg.rule = std::string(to_string(parse_rule(a.rule)));
    cfg.paths = {{"data", a.data}, {"out", a.out}};

    const Dataset x = io::read_data_csv(a.data);
    const SuffStat s = suff_stat(x);
    cfg.n = s.n;
    cfg.p = s.p;
    const PenaltyWeights pw = penalty_weights(x, a.alpha, a.kappa);
    if (!pw.degenerate.empty()) {
        throw std::invalid_argument("fit: column " + std::to_string(pw.degenerate.front()) +
                                    " has zero sample variance");
    }
    const auto rs = make_randomization(x, parse_omega_mode(a.omega_mode), a.omega_scale, a.seed);
    io::SelectionRecord rec;
    rec.event = select_edges(s, pw.lambda, a.eps, rs.draw_all(), parse_rule(a.rule));
    rec.omega_cov = rs.cov;
    rec.n = s.n;
    rec.config = cfg;
    io::write_text(a.out, io::dump(io::selection_json(rec)));
    io::write_text(sidecar_for(a.out), io::dump(io::run_record(cfg, {fs::path(a.out).filename().string()})));
    std::cout << "fit: " << rec.event.edges.size() << " edges selected (" << cfg.rule
              << ") config_hash=" << io::config_hash(cfg) << "\n";
    return 0;
}

struct InferArgs {
    std::string data = "data.csv";
    std::string selection = "selection.json";
    std::string out = "results.json";
    std::string method = "proposed";
    double alpha = 0.1;
    int grid_points = 1201;
    int threads = 1;
};

int run_infer(const InferArgs& a) {
    const Dataset x = io::read_data_csv(a.data);
    const SuffStat s = suff_stat(x);
    const io::SelectionRecord rec = io::json_selection(io::parse_json(a.selection));
    require(rec.event.p() == s.p && rec.n == s.n, "infer: selection.json does not match the data dimensions");
    for (const auto& sol : rec.event.solutions) {
        const double tol = 1e-6 * std::max(1.0, s.s.cwiseAbs().maxCoeff());
        if (verify_kkt(sol, s) > tol) {
            throw std::invalid_argument("infer: selection.json is not a solution on this data (node " +
                                        std::to_string(sol.node) + ")");
        }
    }

    io::RunConfig cfg = rec.config;
    cfg.command = "infer";
    cfg.ci_alpha = a.alpha;
    cfg.methods = {std::string(to_string(parse_method(a.method)))};
    cfg.grid_points = a.grid_points;
    cfg.threads = a.threads;
    cfg.paths = {{"data", a.data}, {"selection", a.selection}, {"out", a.out}};

    InferenceConfig icfg;
    icfg.alpha = a.alpha;
    icfg.omega_cov = rec.omega_cov;
    icfg.grid.points = a.grid_points;
    icfg.threads = a.threads;

    std::vector<IntervalResult> res;
    switch (parse_method(a.method)) {
        case Method::Proposed: res = infer_all(rec.event, s, icfg); break;
        case Method::Naive: res = naive_all(rec.event.edges, s, icfg); break;
        case Method::DataSplit: {
            SplitConfig sc;
            sc.sel_alpha = rec.config.alpha;
            sc.kappa = rec.config.kappa;
            sc.rule = rec.event.rule;
            res = split_all(split_select(x, sc), icfg);
            break;
        }
    }
    io::write_text(a.out, io::dump(io::results_json(res)));
    io::write_text(sidecar_for(a.out), io::dump(io::run_record(cfg, {fs::path(a.out).filename().string()})));
    int failed = 0;
    for (const auto& r : res) failed += r.ok() ? 0 : 1;
    std::cout << "infer: " << res.size() << " intervals (" << a.method << "), " << failed
              << " failed, config_hash=" << io::config_hash(cfg) << "\n";
    return 0;
}

struct BenchArgs {
    int setting = 1;
    bool lambda_sweep = false;
    int reps = 100;
    std::string rule = "and";
    std::string methods;
    std::uint64_t seed = 1;
    std::vector<double> values;
    int n = 0, p = 0;
    double kappa = 0.0;
    std::string omega_mode = "data";
    double omega_scale = 1.0;
    int threads = 1;
    std::string out_dir = "bench";
    bool plot = true;
};

int run_bench(const BenchArgs& a) {
    BenchmarkSpec spec = a.lambda_sweep ? lambda_sweep_spec() : setting_spec(a.setting);
    spec.reps = a.reps;
    spec.seed = a.seed;
    spec.rule = parse_rule(a.rule);
    spec.omega_mode = parse_omega_mode(a.omega_mode);
    spec.omega_scale = a.omega_scale;
    spec.threads = a.threads;
    if (!a.methods.empty()) {
        spec.methods.clear();
        for (const auto& m : split_list(a.methods)) spec.methods.push_back(parse_method(m));
    }
    if (!a.values.empty()) spec.values = a.values;
    if (a.n > 0) spec.n = a.n;
    if (a.p > 0) spec.p = a.p;
    if (a.kappa > 0.0) spec.kappa = a.kappa;

    io::RunConfig cfg;
    cfg.command = "benchmark";
    cfg.seed = spec.seed;
    cfg.alpha = spec.alpha;
    cfg.ci_alpha = spec.ci_alpha;
    cfg.kappa = spec.kappa;
    cfg.eps = spec.eps;
    cfg.omega_mode = a.omega_mode;
    cfg.omega_scale = spec.omega_scale;
    cfg.rule = std::string(to_string(spec.rule));
    for (Method m : spec.methods) cfg.methods.emplace_back(to_string(m));
    cfg.grid_points = spec.grid.points;
    cfg.n = spec.n;
    cfg.p = spec.p;
    cfg.m = spec.m;
    cfg.c = spec.c;
    cfg.setting = a.lambda_sweep ? 0 : a.setting;
    cfg.reps = spec.reps;
    cfg.sweep = spec.values;
    cfg.threads = spec.threads;
    cfg.paths = {{"out_dir", a.out_dir}};
    const std::string hash = io::config_hash(cfg);

    const auto rows = run_benchmark(spec);
    const auto cells = summarize(rows);
    ensure_dir(a.out_dir);
    std::vector<std::string> outputs{"metrics.csv", "summary.json"};
    io::write_text(in_dir(a.out_dir, "metrics.csv"), metrics_csv(rows, spec.axis, hash));
    io::write_text(in_dir(a.out_dir, "summary.json"), io::dump(summary_json(cells, spec.axis, hash)));
    if (a.plot) {
        io::write_text(in_dir(a.out_dir, "summary.svg"),
                       render_svg(cells, spec.axis, "rule " + cfg.rule + ", n=" + std::to_string(spec.n) +
                                                        ", p=" + std::to_string(spec.p)));
        outputs.push_back("summary.svg");
    }
    io::write_text(in_dir(a.out_dir, "run_config.json"), io::dump(io::run_record(cfg, outputs)));

    std::cout << to_string(spec.axis) << "\tmethod\tcoverage(se)\tlength\tF1(se)\tselected\n";
    for (const auto& c : cells) {
        std::printf("%g\t%s\t%.3f(%.3f)\t%.4f\t%.3f(%.3f)\t%d\n", c.value, std::string(to_string(c.method)).c_str(),
                    c.coverage.mean, c.coverage.se, c.length.mean, c.f1.mean, c.f1.se, c.n_selected);
    }
    std::cout << "config_hash=" << hash << "\n";
    return 0;
}

struct PlotArgs {
    std::string metrics = "metrics.csv";
    std::string out = "plot.svg";
    std::string title = "Monte-Carlo summary";
};

int run_plot(const PlotArgs& a) {
    const auto [axis, rows] = read_metrics_csv(a.metrics);
    io::write_text(a.out, render_svg(summarize(rows), axis, a.title));
    std::cout << "plot: wrote " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective inference for Gaussian graphical models via randomized neighborhood selection"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Draw a sparse precision matrix and Gaussian data");
    c_sim->add_option("--n", sim.n, "Sample size")->capture_default_str();
    c_sim->add_option("--p", sim.p, "Dimension")->capture_default_str();
    c_sim->add_option("--m", sim.m, "Maximum degree")->capture_default_str();
    c_sim->add_option("--c", sim.c, "Signal magnitude")->capture_default_str();
    c_sim->add_option("--seed", sim.seed, "Seed")->capture_default_str();
    c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Randomized neighborhood selection");
    c_fit->add_option("--data", fit.data, "Input data.csv")->capture_default_str();
    c_fit->add_option("--out", fit.out, "Output selection.json")->capture_default_str();
    c_fit->add_option("--alpha", fit.alpha, "Penalty level alpha")->capture_default_str();
    c_fit->add_option("--kappa", fit.kappa, "Penalty multiplier")->capture_default_str();
    c_fit->add_option("--eps", fit.eps, "Ridge term")->capture_default_str();
    c_fit->add_option("--rule", fit.rule, "and | or")->capture_default_str();
    c_fit->add_option("--seed", fit.seed, "Randomization seed")->capture_default_str();
    c_fit->add_option("--omega-scale", fit.omega_scale, "Randomization scale")->capture_default_str();
    c_fit->add_option("--omega-mode", fit.omega_mode, "unit (scale^2 I) | data (data-scaled)")->capture_default_str();

    InferArgs inf;
    inf.threads = default_threads();
    auto* c_inf = app.add_subcommand("infer", "Confidence intervals for the selected edges");
    c_inf->add_option("--data", inf.data, "Input data.csv")->capture_default_str();
    c_inf->add_option("--selection", inf.selection, "Input selection.json")->capture_default_str();
    c_inf->add_option("--out", inf.out, "Output results.json")->capture_default_str();
    c_inf->add_option("--alpha", inf.alpha, "Interval level alpha")->capture_default_str();
    c_inf->add_option("--method", inf.method, "proposed | split | naive")->capture_default_str();
    c_inf->add_option("--grid-points", inf.grid_points, "Pivot grid size")->capture_default_str();
    c_inf->add_option("--threads", inf.threads, "Worker threads (default from GGMSI_THREADS)")->capture_default_str();

    BenchArgs bench;
    bench.threads = default_threads();
    auto* c_bench = app.add_subcommand("benchmark", "Monte-Carlo comparison of the methods");
    c_bench->add_option("--setting", bench.setting, "1 (vary c, m = 2) | 2 (vary m, c = 1)")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    c_bench->add_flag("--lambda-sweep", bench.lambda_sweep, "Sweep the penalty multiplier at n = 200, p = 10");
    c_bench->add_option("--reps", bench.reps, "Replications per sweep value")->capture_default_str();
    c_bench->add_option("--rule", bench.rule, "and | or")->capture_default_str();
    c_bench->add_option("--methods", bench.methods, "Comma list of proposed,split,naive");
    c_bench->add_option("--seed", bench.seed, "Seed")->capture_default_str();
    c_bench->add_option("--values", bench.values, "Override the sweep values");
    c_bench->add_option("--n", bench.n, "Override sample size");
    c_bench->add_option("--p", bench.p, "Override dimension");
    c_bench->add_option("--kappa", bench.kappa, "Override penalty multiplier");
    c_bench->add_option("--omega-mode", bench.omega_mode, "unit | data")->capture_default_str();
    c_bench->add_option("--omega-scale", bench.omega_scale, "Randomization scale")->capture_default_str();
    c_bench->add_option("--threads", bench.threads, "Worker threads (default from GGMSI_THREADS)")
        ->capture_default_str();
    c_bench->add_option("--out-dir", bench.out_dir, "Output directory")->capture_default_str();
    c_bench->add_flag("!--no-plot", bench.plot, "Skip the SVG summary");

    PlotArgs plot;
    auto* c_plot = app.add_subcommand("plot", "Render metrics.csv as SVG error-bar charts");
    c_plot->add_option("--metrics", plot.metrics, "Input metrics.csv")->capture_default_str();
    c_plot->add_option("--out", plot.out, "Output SVG")->capture_default_str();
    c_plot->add_option("--title", plot.title, "Title")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*c_sim) return run_simulate(sim);
        if (*c_fit) return run_fit(fit);
        if (*c_inf) return run_infer(inf);
        if (*c_bench) return run_bench(bench);
        if (*c_plot) return run_plot(plot);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
