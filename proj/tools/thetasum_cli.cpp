#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "thetasum/diophantine.hpp"
#include "thetasum/stats.hpp"
#include "thetasum/theta.hpp"
#include "thetasum/weyl.hpp"

#ifndef THETASUM_GIT_DESCRIBE
#define THETASUM_GIT_DESCRIBE "unknown"
#endif

using namespace thetasum;
using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

std::string fmt(cplx z) {
    char b[80];
    std::snprintf(b, sizeof b, "%.17g%+.17gi", z.real(), z.imag());
    return b;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json num(cplx z) { return json::array({num(z.real()), num(z.imag())}); }

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct Report {
    std::string name;
    json inputs = json::object();
    json estimate = nullptr;
    std::optional<double> std_error, certified_tail;
    json target = nullptr;
    json tolerance = nullptr;
    std::optional<bool> pass;  // unset for diagnostics
    std::uint64_t seed = 0;
    json extra = json::object();
    Table table;
    std::vector<std::string> lines;
};

struct Common {
    std::uint64_t seed = kDefaultSeed;
    int workers = 0;
    std::string format;
    std::string output, csv, plot;
};

std::string verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

json report_json(const Report& r) {
    json j;
    j["name"] = r.name;
    j["inputs"] = r.inputs;
    j["estimate"] = r.estimate;
    if (r.certified_tail)
        j["certified_tail"] = num(*r.certified_tail);
    else
        j["std_error"] = r.std_error ? num(*r.std_error) : json(nullptr);
    j["target"] = r.target;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass ? json(*r.pass) : json(nullptr);
    j["seed"] = r.seed;
    j["git_describe"] = THETASUM_GIT_DESCRIBE;
    for (auto& [k, v] : r.extra.items()) j[k] = v;
    if (!r.table.header.empty()) {
        json cols = json::object();
        for (std::size_t c = 0; c < r.table.header.size(); ++c) {
            json col = json::array();
            for (auto& row : r.table.rows) col.push_back(num(row[c]));
            cols[r.table.header[c]] = col;
        }
        j["series"] = cols;
    }
    return j;
}

std::string csv_text(const Table& t) {
    if (t.header.empty()) throw Error(ErrorKind::Domain, "this subcommand has no array output for CSV");
    std::string s;
    for (std::size_t c = 0; c < t.header.size(); ++c) s += (c ? "," : "") + t.header[c];
    s += "\n";
    for (auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) s += (c ? "," : "") + fmt(row[c]);
        s += "\n";
    }
    return s;
}

std::string plot_text(const Report& r, const std::string& csv_path) {
    const Table& t = r.table;
    std::string s = "set datafile separator ','\nset key autotitle columnhead\n";
    if (r.name == "curlicue") {
        s += "set size ratio -1\nplot '" + csv_path + "' using 2:3 with lines\n";
        return s;
    }
    bool loglog = r.name == "tail" || r.name == "re-tail" || r.name == "mu-tail";
    if (loglog) s += "set logscale xy\n";
    s += "plot ";
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        if (c > 1) s += ", ";
        s += "'" + csv_path + "' using 1:" + std::to_string(c + 1) + (loglog ? " with linespoints" : " with points");
    }
    return s + "\n";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    f << text;
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
}

void emit_report(const Report& r, const Common& c) {
    std::string body;
    if (c.format == "json")
        body = report_json(r).dump(2) + "\n";
    else if (c.format == "csv")
        body = csv_text(r.table);
    else
        for (auto& l : r.lines) body += l + "\n";
    if (c.output.empty() || c.output == "-")
        std::cout << body << std::flush;
    else
        write_file(c.output, body);
    std::string csv_path = c.csv;
    if (!c.csv.empty()) write_file(c.csv, csv_text(r.table));
    if (csv_path.empty() && c.format == "csv" && !c.output.empty() && c.output != "-") csv_path = c.output;
    if (!c.plot.empty()) {
        if (csv_path.empty()) throw Error(ErrorKind::Domain, "--plot-script needs a CSV file (--csv, or --format csv with --output)");
        write_file(c.plot, plot_text(r, csv_path));
    }
}

CutoffSpec parse_cutoff(const std::string& s) {
    if (s == "gaussian") return CutoffSpec::gaussian();
    if (s == "indicator") return CutoffSpec::indicator();
    if (s == "triangle") return CutoffSpec::triangle();
    if (s == "triangle-minus") return CutoffSpec::triangle_minus();
    throw Error(ErrorKind::Domain, "unknown cutoff " + s);
}
const std::vector<std::string> kCutoffs = {"gaussian", "indicator", "triangle", "triangle-minus"};

std::map<const CLI::App*, std::string> default_formats;

void add_common(CLI::App* sub, Common& c, const std::string& default_format) {
    default_formats[sub] = default_format;
    sub->add_option("--seed", c.seed, "base seed")->capture_default_str();
    sub->add_option("--workers", c.workers, "worker threads (0: all cores)")->envname("THETA_WORKERS");
    sub->add_option("--format", c.format, "text, json or csv (default " + default_format + ")")
        ->check(CLI::IsMember({"text", "json", "csv"}));
    sub->add_option("--output", c.output, "write the report here instead of standard output");
    sub->add_option("--csv", c.csv, "also write the array output as CSV");
    sub->add_option("--plot-script", c.plot, "write a gnuplot script for the CSV output");
}

// sampling parameters shared by the Monte Carlo subcommands
struct SpecOpts {
    std::int64_t M = 100000, N = 4096, task_size = 1000;
    double a = 0, b = 2;
    double c1 = std::sqrt(2.0), alpha = 0, c0 = 0;
    bool rational = false;
    std::string table;
};

void add_spec(CLI::App* sub, SpecOpts& s, std::int64_t M) {
    s.M = M;
    sub->add_option("--M", s.M, "number of draws of x")->capture_default_str();
    sub->add_option("--N", s.N, "sum length")->capture_default_str();
    sub->add_option("--lambda-a", s.a, "uniform lambda lower end")->capture_default_str();
    sub->add_option("--lambda-b", s.b, "uniform lambda upper end")->capture_default_str();
    sub->add_option("--lambda-table", s.table, "density table file: lines 'edge weight', last weight ignored");
    sub->add_option("--c1", s.c1, "linear coefficient c1")->capture_default_str();
    sub->add_option("--alpha", s.alpha, "alpha")->capture_default_str();
    sub->add_option("--c0", s.c0, "constant coefficient c0")->capture_default_str();
    sub->add_flag("--rational", s.rational, "(c1, alpha) is rational; run as a diagnostic");
    sub->add_option("--task-size", s.task_size, "draws per task")->capture_default_str();
}

Lambda read_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    std::vector<double> edges, weights;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        is.imbue(std::locale::classic());
        double e, w = 0;
        if (!(is >> e)) throw Error(ErrorKind::Domain, "bad line in " + path);
        is >> w;
        edges.push_back(e);
        weights.push_back(w);
    }
    if (!weights.empty()) weights.pop_back();
    return Lambda::table(edges, weights);
}

SampleSpec build_spec(const SpecOpts& s, const Common& c) {
    SampleSpec spec;
    spec.M = s.M;
    spec.N = s.N;
    spec.lambda = s.table.empty() ? Lambda::uniform(s.a, s.b) : read_table(s.table);
    spec.params = {0, s.alpha, s.c1, s.c0};
    spec.seed = c.seed;
    spec.irrational_pair = !s.rational;
    spec.allow_rational = s.rational;
    spec.workers = c.workers;
    spec.task_size = s.task_size;
    return spec;
}

json spec_json(const SampleSpec& s) {
    json j;
    j["M"] = s.M;
    j["N"] = s.N;
    j["lambda"] = s.lambda.describe();
    j["c1"] = s.params.c1;
    j["alpha"] = s.params.alpha;
    j["c0"] = s.params.c0;
    j["irrational_pair"] = s.irrational_pair;
    j["task_size"] = s.task_size;
    return j;
}

std::vector<double> grid(double lo, double hi, int n) {
    if (n < 1 || !(hi >= lo) || !(lo > 0)) throw Error(ErrorKind::Domain, "R grid needs 0 < R-min <= R-max and points >= 1");
    return linear_grid(lo, hi, n);
}

void tail_table(Report& r, const TailReport& t, const std::vector<double>* left) {
    r.table.header = {"R", "survival"};
    if (left) r.table.header.push_back("left_survival");
    r.table.header.push_back("model");
    const double c = t.target_constant > 0 ? t.target_constant : t.fit_constant;
    for (std::size_t i = 0; i < t.R_grid.size(); ++i) {
        std::vector<double> row{t.R_grid[i], t.survival[i]};
        if (left) row.push_back((*left)[i]);
        row.push_back(c * std::pow(t.R_grid[i], t.target_slope));
        r.table.rows.push_back(row);
    }
}

json tail_json(const TailReport& t) {
    json j;
    j["slope"] = num(t.fit_slope);
    j["constant"] = num(t.fit_constant);
    j["free_intercept"] = num(t.fit_intercept);
    return j;
}

std::string tail_line(const std::string& what, const TailReport& t) {
    std::string s = what + ": slope " + fmt(t.fit_slope) + " target " + fmt(t.target_slope) + " tolerance " +
                    fmt(t.slope_tol);
    if (t.target_constant > 0)
        s += "; constant " + fmt(t.fit_constant) + " target " + fmt(t.target_constant) + " tolerance factor " +
             fmt(t.constant_factor);
    else
        s += "; constant " + fmt(t.fit_constant) + " (no target)";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quadratic Weyl sums, theta functions and their limit statistics"};
    app.require_subcommand(1);
    Common common;
    Report rep;
    std::function<void()> action;

    // ---------------------------------------------------------------- sum
    struct {
        std::int64_t N = 0;
        double x = 0, alpha = 0, c1 = 0, c0 = 0;
        std::string method = "auto", cutoff = "indicator";
    } sum;
    auto* s_sum = app.add_subcommand("sum", "evaluate S_N by direct summation");
    s_sum->add_option("--N", sum.N, "length")->required();
    s_sum->add_option("--x", sum.x, "x")->required();
    s_sum->add_option("--alpha", sum.alpha, "alpha")->capture_default_str();
    s_sum->add_option("--c1", sum.c1, "polynomial coefficient c1")->capture_default_str();
    s_sum->add_option("--c0", sum.c0, "polynomial coefficient c0")->capture_default_str();
    s_sum->add_option("--method", sum.method, "auto, direct, poly or general")
        ->check(CLI::IsMember({"auto", "direct", "poly", "general"}))
        ->capture_default_str();
    s_sum->add_option("--cutoff", sum.cutoff, "cutoff for --method general")->check(CLI::IsMember(kCutoffs));
    add_common(s_sum, common, "text");
    s_sum->callback([&] {
        action = [&] {
            std::string m = sum.method;
            bool poly = sum.c1 != 0 || sum.c0 != 0;
            if (m == "auto") m = poly ? "poly" : "direct";
            if (poly && m != "poly") throw Error(ErrorKind::Domain, "c1 and c0 need --method poly");
            if (sum.N < 0) throw Error(ErrorKind::Domain, "N must be nonnegative");
            cplx v;
            if (m == "direct")
                v = weyl_sum_direct(sum.N, sum.x, sum.alpha);
            else if (m == "poly")
                v = weyl_sum_poly(sum.N, {sum.x, sum.alpha, sum.c1, sum.c0});
            else
                v = weyl_sum_general(sum.N, sum.x, sum.alpha, parse_cutoff(sum.cutoff));
            rep.name = "sum";
            rep.inputs = {{"N", sum.N}, {"x", sum.x}, {"alpha", sum.alpha}, {"c1", sum.c1}, {"c0", sum.c0}, {"method", m}};
            if (m == "general") rep.inputs["cutoff"] = sum.cutoff;
            rep.estimate = num(v);
            rep.lines = {fmt(v)};
        };
    });

    // ---------------------------------------------------------------- renorm
    struct {
        std::int64_t N = 0, N_cut = 64;
        double x = 0, alpha = 0;
        bool compare = false, bench = false;
    } ren;
    auto* s_ren = app.add_subcommand("renorm", "evaluate S_N through the approximate functional equation");
    s_ren->add_option("--N", ren.N, "length")->required();
    s_ren->add_option("--x", ren.x, "x")->required();
    s_ren->add_option("--alpha", ren.alpha, "alpha")->capture_default_str();
    s_ren->add_option("--N-cut", ren.N_cut, "switch to direct summation below this length")->capture_default_str();
    s_ren->add_flag("--compare", ren.compare, "also sum directly and check the difference");
    s_ren->add_flag("--benchmark", ren.bench, "time both evaluators (timings go to standard error)");
    add_common(s_ren, common, "text");
    s_ren->callback([&] {
        action = [&] {
            using clk = std::chrono::steady_clock;
            auto t0 = clk::now();
            RenormResult r = weyl_sum_renormalized(ren.N, ren.x, ren.alpha, ren.N_cut);
            double tr = std::chrono::duration<double>(clk::now() - t0).count();
            rep.name = "renorm";
            rep.inputs = {{"N", ren.N}, {"x", ren.x}, {"alpha", ren.alpha}, {"N_cut", ren.N_cut}};
            rep.estimate = num(r.value);
            rep.std_error = r.error_estimate;
            rep.extra["iterations"] = r.iterations;
            rep.extra["fell_back"] = r.fell_back;
            rep.lines = {"renormalized " + fmt(r.value) + " error_estimate " + fmt(r.error_estimate) + " iterations " +
                         std::to_string(r.iterations) + (r.fell_back ? " (direct fallback)" : "")};
            if (ren.compare || ren.bench) {
                t0 = clk::now();
                cplx d = weyl_sum_direct(ren.N, ren.x, ren.alpha);
                double td = std::chrono::duration<double>(clk::now() - t0).count();
                double diff = std::abs(d - r.value), bound = std::max(10.0, r.error_estimate);
                rep.target = num(d);
                rep.tolerance = bound;
                rep.pass = diff <= bound;
                rep.extra["difference"] = diff;
                rep.lines.push_back("direct " + fmt(d) + " difference " + fmt(diff) + " tolerance max(10, error_estimate) = " +
                                    fmt(bound) + " " + verdict(diff <= bound));
                if (ren.bench)
                    std::fprintf(stderr, "renormalized %.6g s, direct %.6g s, speedup %.4g\n", tr, td, td / std::max(tr, 1e-9));
            }
        };
    });

    // ---------------------------------------------------------------- afe-check
    struct {
        std::vector<double> xs, alphas{0, 0.25, 0.5};
        std::vector<std::int64_t> Ns{1000, 10000, 100000};
        double bound = 10;
    } afe;
    for (int k = 1; k <= 39; ++k) afe.xs.push_back(0.05 * k);
    auto* s_afe = app.add_subcommand("afe-check", "residual of the approximate functional equation on a grid");
    s_afe->add_option("--x", afe.xs, "x values")->delimiter(',');
    s_afe->add_option("--alpha", afe.alphas, "alpha values")->delimiter(',');
    s_afe->add_option("--N", afe.Ns, "lengths")->delimiter(',');
    s_afe->add_option("--bound", afe.bound, "bound for sqrt(x) times the residual")->capture_default_str();
    add_common(s_afe, common, "text");
    s_afe->callback([&] {
        action = [&] {
            rep.name = "afe-check";
            rep.table.header = {"x", "alpha", "N", "scaled_residual"};
            double worst = 0;
            for (double x : afe.xs)
                for (double a : afe.alphas)
                    for (std::int64_t N : afe.Ns) {
                        double r = afe_residual(N, x, a);
                        worst = std::max(worst, r);
                        rep.table.rows.push_back({x, a, double(N), r});
                    }
            rep.inputs = {{"x", afe.xs}, {"alpha", afe.alphas}, {"N", afe.Ns}};
            rep.estimate = worst;
            rep.target = 0.0;
            rep.tolerance = afe.bound;
            rep.pass = worst <= afe.bound;
            rep.lines = {"max sqrt(x)*residual " + fmt(worst) + " over " + std::to_string(rep.table.rows.size()) +
                         " points, tolerance " + fmt(afe.bound) + " " + verdict(*rep.pass)};
        };
    });

    // ---------------------------------------------------------------- curlicue
    struct {
        std::int64_t N = 0, points = 0;
        double x = 0, alpha = 0, c1 = 0, c0 = 0;
    } cur;
    auto* s_cur = app.add_subcommand("curlicue", "partial sum path t -> X_N(t)");
    s_cur->add_option("--N", cur.N, "length")->required();
    s_cur->add_option("--x", cur.x, "x")->required();
    s_cur->add_option("--alpha", cur.alpha, "alpha")->capture_default_str();
    s_cur->add_option("--c1", cur.c1, "c1")->capture_default_str();
    s_cur->add_option("--c0", cur.c0, "c0")->capture_default_str();
    s_cur->add_option("--points", cur.points, "equally spaced t values (0: every vertex)")->capture_default_str();
    add_common(s_cur, common, "csv");
    s_cur->callback([&] {
        action = [&] {
            if (cur.N < 1) throw Error(ErrorKind::Domain, "N must be positive");
            if (cur.points < 0 || cur.points == 1) throw Error(ErrorKind::Domain, "points must be 0 or at least 2");
            CurlicuePath p = curlicue(cur.N, {cur.x, cur.alpha, cur.c1, cur.c0});
            rep.name = "curlicue";
            rep.inputs = {{"N", cur.N}, {"x", cur.x}, {"alpha", cur.alpha}, {"c1", cur.c1}, {"c0", cur.c0}, {"points", cur.points}};
            rep.table.header = {"t", "re", "im"};
            std::int64_t n = cur.points == 0 ? cur.N + 1 : cur.points;
            for (std::int64_t k = 0; k < n; ++k) {
                double t = double(k) / double(n - 1);
                cplx v = p.at(t);
                rep.table.rows.push_back({t, v.real(), v.imag()});
            }
            rep.estimate = num(p.at(1.0));
            rep.lines = {"X_N(1) = " + fmt(p.at(1.0)) + " (" + std::to_string(n) + " points; use --format csv for the path)"};
        };
    });

    // ---------------------------------------------------------------- theta
    struct {
        std::string cutoff = "gaussian";
        double x = 0, y = 1, phi = 0, xi1 = 0, xi2 = 0, zeta = 0, tol = 1e-8, q_cert = 1e6;
        int J_max = 22;
        std::int64_t max_terms = 2000000;
    } th;
    auto* s_th = app.add_subcommand("theta", "evaluate Theta_f at a point of the Jacobi group");
    s_th->add_option("--cutoff", th.cutoff, "cutoff")->check(CLI::IsMember(kCutoffs))->capture_default_str();
    s_th->add_option("--x", th.x, "x")->capture_default_str();
    s_th->add_option("--y", th.y, "y > 0")->capture_default_str();
    s_th->add_option("--phi", th.phi, "phi")->capture_default_str();
    s_th->add_option("--xi1", th.xi1, "xi_1")->capture_default_str();
    s_th->add_option("--xi2", th.xi2, "xi_2")->capture_default_str();
    s_th->add_option("--zeta", th.zeta, "zeta")->capture_default_str();
    s_th->add_option("--tol", th.tol, "truncation tolerance")->capture_default_str();
    s_th->add_option("--J-max", th.J_max, "dyadic levels for the indicator")->capture_default_str();
    s_th->add_option("--q-cert", th.q_cert, "largest convergent denominator used by the tail certificate")
        ->capture_default_str();
    s_th->add_option("--max-terms", th.max_terms, "term budget before Gamma reduction")->capture_default_str();
    add_common(s_th, common, "text");
    s_th->callback([&] {
        action = [&] {
            GroupElement g;
            g.z = {th.x, th.y};
            g.phi = th.phi;
            g.xi1 = th.xi1;
            g.xi2 = th.xi2;
            g.zeta = th.zeta;
            CutoffSpec f = parse_cutoff(th.cutoff);
            ThetaResult r;
            if (f.kind == CutoffKind::IndicatorUnit) {
                ThetaChiOptions o;
                o.J_max = th.J_max;
                o.q_cert = th.q_cert;
                r = theta_chi(g, th.tol, o);
            } else {
                ThetaOptions o;
                o.max_terms = th.max_terms;
                r = theta_f(g, f, th.tol, o);
            }
            rep.name = "theta";
            rep.inputs = {{"cutoff", th.cutoff}, {"x", th.x}, {"y", th.y}, {"phi", th.phi}, {"xi1", th.xi1},
                          {"xi2", th.xi2}, {"zeta", th.zeta}, {"tol", th.tol}};
            rep.estimate = num(r.value);
            rep.certified_tail = r.certified_tail;
            rep.tolerance = th.tol;
            rep.extra["terms_used"] = r.terms_used;
            rep.extra["diophantine_warning"] = r.diophantine_warning;
            rep.extra["reduced"] = r.reduced;
            rep.extra["levels"] = r.levels.size();
            std::string l = "Theta = " + fmt(r.value) + " terms " + std::to_string(r.terms_used) + " certified_tail " +
                            fmt(r.certified_tail) + " tolerance " + fmt(th.tol);
            if (r.reduced) l += " (evaluated at the Gamma-reduced point)";
            if (r.diophantine_warning) l += " WARNING: tail certificate did not close";
            rep.lines = {l};
        };
    });

    // ---------------------------------------------------------------- variance
    SpecOpts var_s;
    double var_t = 1, var_tol = 0.05;
    auto* s_var = app.add_subcommand("variance", "Monte Carlo variance of X_N(t)");
    add_spec(s_var, var_s, 100000);
    s_var->add_option("--t", var_t, "time")->capture_default_str();
    s_var->add_option("--tolerance", var_tol, "allowed |Var - t|")->capture_default_str();
    add_common(s_var, common, "text");
    s_var->callback([&] {
        action = [&] {
            SampleSpec spec = build_spec(var_s, common);
            MomentReport m = mc_variance(spec, var_t);
            rep.name = "variance";
            rep.inputs = spec_json(spec);
            rep.inputs["t"] = var_t;
            rep.estimate = m.estimate;
            rep.std_error = m.std_error;
            rep.target = var_t;
            rep.tolerance = var_tol;
            rep.pass = std::abs(m.estimate - var_t) <= var_tol;
            rep.extra["rational_pair_warning"] = m.rational_pair_warning;
            rep.lines = {"Var X_N(" + fmt(var_t) + ") = " + fmt(m.estimate) + " std_error " + fmt(m.std_error) + " target " +
                         fmt(var_t) + " tolerance " + fmt(var_tol) + " " + verdict(*rep.pass)};
        };
    });

    // ---------------------------------------------------------------- tail
    SpecOpts tail_s;
    double tail_t = 1, tail_rmin = 1.5, tail_rmax = 3.5, tail_slope = NAN, tail_slope_tol = 0.5;
    int tail_pts = 9;
    auto* s_tail = app.add_subcommand("tail", "tail of |X_N(t)|/sqrt(t)");
    add_spec(s_tail, tail_s, 1000000);
    s_tail->add_option("--t", tail_t, "time")->capture_default_str();
    s_tail->add_option("--R-min", tail_rmin, "smallest R")->capture_default_str();
    s_tail->add_option("--R-max", tail_rmax, "largest R")->capture_default_str();
    s_tail->add_option("--R-points", tail_pts, "grid points")->capture_default_str();
    s_tail->add_option("--slope", tail_slope, "target slope (default -6, or -4 with --rational)");
    s_tail->add_option("--slope-tol", tail_slope_tol, "allowed slope error")->capture_default_str();
    add_common(s_tail, common, "text");
    s_tail->callback([&] {
        action = [&] {
            SampleSpec spec = build_spec(tail_s, common);
            double slope = std::isnan(tail_slope) ? (tail_s.rational ? -4.0 : -6.0) : tail_slope;
            TailReport t = mc_tail(spec, tail_t, grid(tail_rmin, tail_rmax, tail_pts), slope, tail_slope_tol);
            rep.name = "tail";
            rep.inputs = spec_json(spec);
            rep.inputs["t"] = tail_t;
            rep.inputs["R_grid"] = t.R_grid;
            rep.estimate = tail_json(t);
            rep.target = {{"slope", t.target_slope}, {"constant", t.target_constant > 0 ? json(t.target_constant) : json(nullptr)}};
            rep.tolerance = {{"slope", t.slope_tol}, {"constant_factor", t.constant_factor}};
            rep.pass = t.pass;
            rep.extra["exceedances"] = t.exceedances;
            rep.extra["survival_se"] = t.survival_se;
            rep.extra["rational_pair_warning"] = t.rational_pair_warning;
            tail_table(rep, t, nullptr);
            rep.lines = {tail_line("|X| tail", t) + " " + verdict(t.pass)};
        };
    });

    // ---------------------------------------------------------------- re-tail
    SpecOpts re_s;
    double re_rmin = 1.2, re_rmax = 2.5;
    int re_pts = 9;
    auto* s_re = app.add_subcommand("re-tail", "tails of Re X_N(1), both sides");
    add_spec(s_re, re_s, 1000000);
    s_re->add_option("--R-min", re_rmin, "smallest R")->capture_default_str();
    s_re->add_option("--R-max", re_rmax, "largest R")->capture_default_str();
    s_re->add_option("--R-points", re_pts, "grid points")->capture_default_str();
    add_common(s_re, common, "text");
    s_re->callback([&] {
        action = [&] {
            SampleSpec spec = build_spec(re_s, common);
            ReTailReport t = mc_re_tail(spec, grid(re_rmin, re_rmax, re_pts));
            rep.name = "re-tail";
            rep.inputs = spec_json(spec);
            rep.inputs["R_grid"] = t.right.R_grid;
            rep.estimate = tail_json(t.right);
            rep.estimate["left_constant"] = num(t.left_constant);
            rep.target = {{"slope", -6.0}, {"constant", t.right.target_constant > 0 ? json(t.right.target_constant) : json(nullptr)}};
            rep.tolerance = {{"slope", t.right.slope_tol}, {"constant_factor", 2.0}, {"symmetry_z", 2.0}};
            rep.pass = t.right.pass && t.symmetric;
            rep.extra["symmetry_z"] = num(t.symmetry_z);
            rep.extra["symmetry_max_pointwise_z"] = num(t.symmetry_max_z);
            rep.extra["exceedances"] = t.right.exceedances;
            tail_table(rep, t.right, &t.left_survival);
            rep.lines = {tail_line("Re X tail", t.right) + " " + verdict(t.right.pass),
                         "symmetry: log(C+/C-) z " + fmt(t.symmetry_z) + " tolerance 2 " + verdict(t.symmetric) +
                             " (pointwise max z " + fmt(t.symmetry_max_z) + ", diagnostic)"};
        };
    });

    // ---------------------------------------------------------------- haar-moments
    struct {
        std::int64_t M = 1000000;
        std::string cutoff = "gaussian";
        int order = 2;
        double tol = 1e-6, tolerance = NAN;
    } hm;
    auto* s_hm = app.add_subcommand("haar-moments", "moments of |Theta_f| under Haar measure");
    s_hm->add_option("--M", hm.M, "samples")->capture_default_str();
    s_hm->add_option("--cutoff", hm.cutoff, "regular cutoff")
        ->check(CLI::IsMember({"gaussian", "triangle", "triangle-minus"}))
        ->capture_default_str();
    s_hm->add_option("--order", hm.order, "2 or 4")->check(CLI::IsMember({2, 4}))->capture_default_str();
    s_hm->add_option("--tol", hm.tol, "theta truncation tolerance")->capture_default_str();
    s_hm->add_option("--tolerance", hm.tolerance, "allowed |estimate - target| (default 0.01 for order 2, 0.1 for order 4)");
    add_common(s_hm, common, "text");
    s_hm->callback([&] {
        action = [&] {
            MomentReport m = haar_moment_check(hm.M, parse_cutoff(hm.cutoff), hm.order, common.seed, common.workers, hm.tol);
            double tol = std::isnan(hm.tolerance) ? (hm.order == 2 ? 0.01 : 0.1) : hm.tolerance;
            rep.name = "haar-moments";
            rep.inputs = {{"M", hm.M}, {"cutoff", hm.cutoff}, {"order", hm.order}, {"tol", hm.tol}};
            rep.estimate = m.estimate;
            rep.std_error = m.std_error;
            rep.target = m.target;
            rep.tolerance = tol;
            rep.pass = std::abs(m.estimate - m.target) <= tol;
            rep.lines = {"E|Theta_" + hm.cutoff + "|^" + std::to_string(hm.order) + " = " + fmt(m.estimate) + " std_error " +
                         fmt(m.std_error) + " target " + fmt(m.target) + " tolerance " + fmt(tol) + " " + verdict(*rep.pass)};
        };
    });

    // ---------------------------------------------------------------- mu-tail
    ThetaTailOptions mt;
    mt.M = 100000;
    double mt_rmin = 1.5, mt_rmax = 3;
    int mt_pts = 7;
    auto* s_mt = app.add_subcommand("mu-tail", "Haar measure of |Theta_chi| > R");
    s_mt->add_option("--M", mt.M, "samples")->capture_default_str();
    s_mt->add_option("--R-min", mt_rmin, "smallest R")->capture_default_str();
    s_mt->add_option("--R-max", mt_rmax, "largest R")->capture_default_str();
    s_mt->add_option("--R-points", mt_pts, "grid points")->capture_default_str();
    s_mt->add_option("--tol", mt.tol, "Theta_chi tolerance")->capture_default_str();
    s_mt->add_option("--cusp-height", mt.cusp_height, "stratify Haar measure at this height (0: off)")->capture_default_str();
    s_mt->add_option("--cusp-fraction", mt.cusp_fraction, "share of samples above the cusp height")->capture_default_str();
    s_mt->add_option("--task-size", mt.task_size, "samples per task")->capture_default_str();
    add_common(s_mt, common, "text");
    s_mt->callback([&] {
        action = [&] {
            mt.seed = common.seed;
            mt.workers = common.workers;
            mt.R_grid = grid(mt_rmin, mt_rmax, mt_pts);
            ThetaTailReport t = theta_measure_tail(mt);
            rep.name = "mu-tail";
            rep.inputs = {{"M", mt.M}, {"R_grid", mt.R_grid}, {"tol", mt.tol}, {"cusp_height", mt.cusp_height},
                          {"cusp_fraction", mt.cusp_fraction}, {"task_size", mt.task_size}};
            rep.estimate = tail_json(t.tail);
            rep.target = {{"constant", t.tail.target_constant}, {"mu", t.mu_target}};
            rep.tolerance = {{"constant_factor", 2.0}, {"skipped_fraction", 0.001}};
            bool ok = t.tail.pass && t.skipped_fraction < 0.001;
            rep.pass = ok;
            rep.extra["mu"] = {{"estimate", t.mu_estimate}, {"std_error", t.mu_std_error}, {"target", t.mu_target}};
            rep.extra["skipped"] = t.skipped;
            rep.extra["certificate_warnings"] = t.warnings;
            rep.extra["exceedances"] = t.tail.exceedances;
            rep.extra["survival_se"] = t.tail.survival_se;
            tail_table(rep, t.tail, nullptr);
            double mu_rel = std::abs(t.mu_estimate / t.mu_target - 1);
            rep.lines = {"mu-normalized |Theta_chi| tail: constant " + fmt(t.tail.fit_constant) + " target " +
                             fmt(t.tail.target_constant) + " tolerance factor 2; free slope " + fmt(t.tail.fit_slope) +
                             "; skipped " + std::to_string(t.skipped) + " of " + std::to_string(mt.M) +
                             " tolerance 0.1% " + verdict(ok),
                         "tail certificate not closed for " + std::to_string(t.warnings) + " samples (values still used)",
                         "mu(F) = " + fmt(t.mu_estimate) + " std_error " + fmt(t.mu_std_error) + " target " +
                             fmt(t.mu_target) + " tolerance 1% " + verdict(mu_rel <= 0.01)};
        };
    });

    // ---------------------------------------------------------------- qcount
    int qN = 0;
    auto* s_q = app.add_subcommand("qcount", "number of equal-sum, equal-square-sum triple pairs in [1,N]");
    s_q->add_option("--N", qN, "N <= 500")->required();
    add_common(s_q, common, "text");
    s_q->callback([&] {
        action = [&] {
            std::int64_t q = q_count(qN);
            rep.name = "qcount";
            rep.inputs = {{"N", qN}};
            rep.estimate = q;
            if (qN >= 2) {
                double ratio = double(q) / (std::pow(double(qN), 3) * std::log(double(qN)));
                rep.extra["ratio_to_N3_log_N"] = ratio;
                rep.extra["asymptotic_ratio"] = 18 / (pi * pi);
            }
            rep.lines = {std::to_string(q)};
        };
    });

    // ---------------------------------------------------------------- dchi
    struct {
        std::string cutoff = "indicator", method = "auto";
        double tol = 0.06;
    } dc;
    auto* s_d = app.add_subcommand("dchi", "D(f): integral of |f_phi(w)|^6 (default f = indicator)");
    s_d->add_option("--cutoff", dc.cutoff, "cutoff")->check(CLI::IsMember(kCutoffs))->capture_default_str();
    s_d->add_option("--method", dc.method, "auto, oscillatory, density or phi")
        ->check(CLI::IsMember({"auto", "oscillatory", "density", "phi"}))
        ->capture_default_str();
    s_d->add_option("--tol", dc.tol, "absolute tolerance")->capture_default_str();
    add_common(s_d, common, "text");
    s_d->callback([&] {
        action = [&] {
            DMethod m = dc.method == "oscillatory" ? DMethod::Oscillatory
                        : dc.method == "density"   ? DMethod::Density
                        : dc.method == "phi"       ? DMethod::PhiForm
                                                   : DMethod::Auto;
            DResult d = d_integral(parse_cutoff(dc.cutoff), dc.tol, m);
            rep.name = "dchi";
            rep.inputs = {{"cutoff", dc.cutoff}, {"method", d.method}, {"tol", dc.tol}};
            rep.estimate = d.value;
            rep.std_error = d.error_estimate;
            rep.tolerance = dc.tol;
            std::string l = "D(" + dc.cutoff + ") = " + fmt(d.value) + " error_estimate " + fmt(d.error_estimate) + " [" +
                            d.method + "]";
            double target = dc.cutoff == "indicator" ? 3.0 : dc.cutoff == "gaussian" ? pi / std::sqrt(6.0) : NAN;
            if (!std::isnan(target)) {
                rep.target = target;
                rep.pass = std::abs(d.value - target) <= dc.tol;
                l += " target " + fmt(target) + " tolerance " + fmt(dc.tol) + " " + verdict(*rep.pass);
            }
            rep.lines = {l};
        };
    });

    // ---------------------------------------------------------------- invariance
    SpecOpts inv_s;
    std::vector<std::string> inv_checks{"scaling", "rotation", "stationarity", "inversion"};
    InvarianceOptions inv_o;
    auto* s_inv = app.add_subcommand("invariance", "two-sample KS checks of the invariances of the limit process");
    add_spec(s_inv, inv_s, 10000);
    s_inv->add_option("--checks", inv_checks, "scaling, rotation, stationarity, inversion")
        ->delimiter(',')
        ->check(CLI::IsMember({"scaling", "rotation", "stationarity", "inversion"}));
    s_inv->add_option("--a", inv_o.a, "scaling factor")->capture_default_str();
    s_inv->add_option("--theta", inv_o.theta, "rotation angle in turns")->capture_default_str();
    s_inv->add_option("--t0", inv_o.t0, "stationarity shift")->capture_default_str();
    add_common(s_inv, common, "text");
    s_inv->callback([&] {
        action = [&] {
            SampleSpec spec = build_spec(inv_s, common);
            std::vector<InvarianceCheck> cs;
            for (auto& c : inv_checks)
                cs.push_back(c == "scaling"        ? InvarianceCheck::Scaling
                             : c == "rotation"     ? InvarianceCheck::Rotation
                             : c == "stationarity" ? InvarianceCheck::Stationarity
                                                   : InvarianceCheck::Inversion);
            auto res = invariance_suite(spec, cs, inv_o);
            rep.name = "invariance";
            rep.inputs = spec_json(spec);
            rep.inputs["checks"] = inv_checks;
            rep.inputs["a"] = inv_o.a;
            rep.inputs["theta"] = inv_o.theta;
            rep.inputs["t0"] = inv_o.t0;
            json est = json::object(), tol = json::object();
            bool all = true;
            for (auto& [c, r] : res) {
                est[invariance_name(c)] = {{"ks", r.statistic}, {"ks_abs", r.ks_abs}, {"ks_re", r.ks_re}};
                tol[invariance_name(c)] = r.threshold;
                all = all && r.pass;
                rep.lines.push_back(std::string(invariance_name(c)) + ": KS " + fmt(r.statistic) + " (abs " + fmt(r.ks_abs) +
                                    ", re " + fmt(r.ks_re) + ") tolerance " + fmt(r.threshold) + " " + verdict(r.pass));
            }
            rep.estimate = est;
            rep.target = 0.0;
            rep.tolerance = tol;
            rep.pass = all;
        };
    });

    // ---------------------------------------------------------------- increments
    SpecOpts inc_s;
    auto* s_inc = app.add_subcommand("increments", "correlation of |X(1/2)|^2 and |X(1)-X(1/2)|^2 (diagnostic)");
    add_spec(s_inc, inc_s, 100000);
    add_common(s_inc, common, "text");
    s_inc->callback([&] {
        action = [&] {
            SampleSpec spec = build_spec(inc_s, common);
            MomentReport m = increment_correlation(spec);
            rep.name = "increments";
            rep.inputs = spec_json(spec);
            rep.estimate = m.estimate;
            rep.std_error = m.std_error;
            rep.lines = {"corr(|X(1/2)|^2, |X(1)-X(1/2)|^2) = " + fmt(m.estimate) + " std_error " + fmt(m.std_error) +
                         " (diagnostic, no target)"};
        };
    });

    // ---------------------------------------------------------------- modulus
    SpecOpts mod_s;
    std::vector<double> mod_h;
    for (int k = 2; k <= 10; ++k) mod_h.push_back(std::ldexp(1.0, -k));
    double mod_eps = 0.1;
    auto* s_mod = app.add_subcommand("modulus", "modulus of continuity statistic over sampled paths (diagnostic)");
    add_spec(s_mod, mod_s, 1000);
    s_mod->add_option("--h-grid", mod_h, "h values in (0, 1/4]")->delimiter(',');
    s_mod->add_option("--eps", mod_eps, "epsilon")->capture_default_str();
    add_common(s_mod, common, "text");
    s_mod->callback([&] {
        action = [&] {
            SampleSpec spec = build_spec(mod_s, common);
            if (!spec.irrational_pair && !spec.allow_rational)
                throw Error(ErrorKind::RationalPairWarning, "(c1, alpha) is not flagged as an irrational pair");
            std::vector<double> xs = sample_x(spec);
            double stat = 0;
            for (double x : xs) {
                WeylParams p = spec.params;
                p.x = x;
                stat = std::max(stat, modulus_statistic({curlicue(spec.N, p)}, mod_h, mod_eps));
            }
            rep.name = "modulus";
            rep.inputs = spec_json(spec);
            rep.inputs["h"] = mod_h;
            rep.inputs["eps"] = mod_eps;
            rep.estimate = stat;
            rep.lines = {"modulus statistic " + fmt(stat) + " over " + std::to_string(spec.M) + " paths (diagnostic, no target)"};
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (common.format.empty()) common.format = default_formats[app.get_subcommands().front()];
        action();
        rep.seed = common.seed;
        emit_report(rep, common);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return (e.kind() == ErrorKind::AccuracyNotMet || e.kind() == ErrorKind::DivergenceSuspected) ? 3 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    if (rep.pass && !*rep.pass) return 2;
    return 0;
}
