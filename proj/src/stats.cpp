#include "thetasum/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "thetasum/group.hpp"
#include "thetasum/special.hpp"
#include "thetasum/theta.hpp"

namespace thetasum {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int resolve_workers(int workers) {
    if (workers > 0) return workers;
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : int(h);
}

namespace {

// Runs body(task) for every task. Results must go to per-task slots, so the
// outcome does not depend on scheduling.
template <class F>
void parallel_tasks(std::int64_t tasks, int workers, F&& body) {
    std::int64_t w = std::min<std::int64_t>(resolve_workers(workers), tasks);
    if (w <= 1) {
        for (std::int64_t k = 0; k < tasks; ++k) body(k);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto run = [&] {
        for (;;) {
            std::int64_t k = next++;
            if (k >= tasks) return;
            try {
                body(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!err) err = std::current_exception();
                next = tasks;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::int64_t i = 0; i < w; ++i) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// The base seed is hashed before the xor; with a raw xor, small seeds only
// permute the same set of task streams.
std::mt19937_64 task_rng(std::uint64_t seed, std::uint64_t task) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ task));
}

bool check_spec(const SampleSpec& s) {
    if (s.M < 1 || s.N < 1) throw Error(ErrorKind::Domain, "M and N must be at least 1");
    if (s.task_size < 1) throw Error(ErrorKind::Domain, "task_size must be positive");
    if (!s.irrational_pair && !s.allow_rational)
        throw Error(ErrorKind::RationalPairWarning, "(c1, alpha) is not flagged as an irrational pair");
    return !s.irrational_pair;
}

// B contiguous blocks of [0, M)
std::vector<std::int64_t> block_edges(std::int64_t M, std::int64_t B) {
    B = std::max<std::int64_t>(1, std::min(B, M));
    std::vector<std::int64_t> e(B + 1);
    for (std::int64_t b = 0; b <= B; ++b) e[b] = b * M / B;
    return e;
}

std::int64_t count_at_least(const std::vector<double>& sorted, double R) {
    return std::int64_t(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), R));
}

}  // namespace

Lambda Lambda::uniform(double a, double b) {
    if (!(b > a)) throw Error(ErrorKind::Domain, "uniform lambda needs a < b");
    Lambda l;
    l.a = a;
    l.b = b;
    return l;
}

Lambda Lambda::table(std::vector<double> edges, std::vector<double> weights) {
    if (edges.size() < 2 || weights.size() + 1 != edges.size())
        throw Error(ErrorKind::Domain, "density table needs one weight per bin");
    double tot = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(edges[i + 1] > edges[i]) || weights[i] < 0) throw Error(ErrorKind::Domain, "bad density table");
        tot += weights[i] * (edges[i + 1] - edges[i]);
    }
    if (!(tot > 0)) throw Error(ErrorKind::Domain, "density table has zero mass");
    Lambda l;
    l.a = edges.front();
    l.b = edges.back();
    // stored as cumulative probabilities
    l.weights.resize(weights.size());
    double c = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        c += weights[i] * (edges[i + 1] - edges[i]) / tot;
        l.weights[i] = c;
    }
    l.weights.back() = 1.0;
    l.edges = std::move(edges);
    return l;
}

double Lambda::sample(std::mt19937_64& rng) const {
    double u = uniform01(rng);
    if (!is_table()) return a + (b - a) * u;
    std::size_t i = std::upper_bound(weights.begin(), weights.end(), u) - weights.begin();
    i = std::min(i, weights.size() - 1);
    double lo = i == 0 ? 0.0 : weights[i - 1];
    double fr = (u - lo) / (weights[i] - lo);
    return edges[i] + fr * (edges[i + 1] - edges[i]);
}

std::string Lambda::describe() const {
    char buf[96];
    if (is_table())
        std::snprintf(buf, sizeof buf, "table[%zu bins on %.17g..%.17g]", weights.size(), a, b);
    else
        std::snprintf(buf, sizeof buf, "U[%.17g,%.17g]", a, b);
    return buf;
}

std::vector<cplx> sample_process(const SampleSpec& spec, const std::vector<double>& t_grid, std::uint64_t task_offset) {
    const std::int64_t N = spec.N;
    const std::size_t T = t_grid.size();
    std::vector<std::int64_t> kk(T);
    std::vector<double> fr(T);
    std::vector<std::int64_t> ks;
    for (std::size_t j = 0; j < T; ++j) {
        if (!(t_grid[j] >= 0)) throw Error(ErrorKind::Domain, "times must be nonnegative");
        double tn = t_grid[j] * double(N);
        kk[j] = std::int64_t(std::floor(tn));
        fr[j] = tn - double(kk[j]);
        ks.push_back(kk[j]);
        if (fr[j] > 0) ks.push_back(kk[j] + 1);
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    const std::int64_t K = ks.empty() ? 0 : ks.back();
    auto slot = [&](std::int64_t k) { return std::lower_bound(ks.begin(), ks.end(), k) - ks.begin(); };
    std::vector<std::size_t> s0(T), s1(T);
    for (std::size_t j = 0; j < T; ++j) {
        s0[j] = slot(kk[j]);
        s1[j] = fr[j] > 0 ? slot(kk[j] + 1) : s0[j];
    }
    const double norm = 1.0 / std::sqrt(double(N));

    std::vector<cplx> out(std::size_t(spec.M) * T);
    const std::int64_t tasks = (spec.M + spec.task_size - 1) / spec.task_size;
    parallel_tasks(tasks, spec.workers, [&](std::int64_t task) {
        auto rng = task_rng(spec.seed, std::uint64_t(task) + task_offset);
        std::vector<cplx> ps;
        const std::int64_t lo = task * spec.task_size, hi = std::min(spec.M, lo + spec.task_size);
        for (std::int64_t i = lo; i < hi; ++i) {
            WeylParams p = spec.params;
            p.x = spec.lambda.sample(rng);
            partial_sums(K, p, ks, ps);
            for (std::size_t j = 0; j < T; ++j) {
                cplx v = ps[s0[j]];
                if (fr[j] > 0) v += fr[j] * (ps[s1[j]] - ps[s0[j]]);
                out[std::size_t(i) * T + j] = v * norm;
            }
        }
    });
    return out;
}

std::vector<double> sample_x(const SampleSpec& spec) {
    if (spec.M < 1 || spec.task_size < 1) throw Error(ErrorKind::Domain, "M and task_size must be positive");
    std::vector<double> x(spec.M);
    const std::int64_t tasks = (spec.M + spec.task_size - 1) / spec.task_size;
    for (std::int64_t task = 0; task < tasks; ++task) {
        auto rng = task_rng(spec.seed, std::uint64_t(task));
        for (std::int64_t i = task * spec.task_size; i < std::min(spec.M, (task + 1) * spec.task_size); ++i)
            x[i] = spec.lambda.sample(rng);
    }
    return x;
}

MomentReport mc_variance(const SampleSpec& spec, double t) {
    MomentReport r;
    r.rational_pair_warning = check_spec(spec);
    r.order = 2;
    r.target = t;
    std::vector<cplx> v = sample_process(spec, {t});
    const std::int64_t M = spec.M;
    auto edges = block_edges(M, 100);
    const std::size_t B = edges.size() - 1;
    std::vector<std::complex<long double>> b1(B);
    std::vector<long double> b2(B);
    std::complex<long double> s1 = 0;
    long double s2 = 0;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::int64_t i = edges[b]; i < edges[b + 1]; ++i) {
            std::complex<long double> x(v[i].real(), v[i].imag());
            b1[b] += x;
            b2[b] += std::norm(x);
        }
        s1 += b1[b];
        s2 += b2[b];
    }
    auto var = [](std::complex<long double> a, long double q, long double n) { return double(q / n - std::norm(a / n)); };
    r.estimate = var(s1, s2, (long double)M);
    if (B >= 2) {
        std::vector<double> th(B);
        double mean = 0;
        for (std::size_t b = 0; b < B; ++b) {
            th[b] = var(s1 - b1[b], s2 - b2[b], (long double)(M - (edges[b + 1] - edges[b])));
            mean += th[b] / double(B);
        }
        double ss = 0;
        for (double x : th) ss += (x - mean) * (x - mean);
        r.std_error = std::sqrt(double(B - 1) / double(B) * ss);
    }
    return r;
}

double single_phase_variance(const WeylParams& p, double a, double b) {
    double k = 0.5 + p.c1 + p.c0;
    if (k == 0) return 0.0;
    cplx m = (e(k * b) - e(k * a)) / (cplx(0, two_pi * k) * (b - a));
    return 1.0 - std::norm(m);
}

std::vector<double> linear_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return g;
}

TailReport tail_from_survival(std::vector<double> R_grid, std::vector<double> survival, std::vector<double> survival_se,
                              std::vector<std::int64_t> exceedances, double target_slope, double target_constant,
                              double slope_tol, double factor) {
    TailReport r;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, sc = 0;
    int n = 0;
    for (std::size_t i = 0; i < R_grid.size(); ++i) {
        if (!(survival[i] > 0)) continue;
        double x = std::log(R_grid[i]), y = std::log(survival[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        sc += y - target_slope * x;
        ++n;
    }
    r.fit_slope = r.fit_intercept = r.fit_constant = std::nan("");
    if (n >= 2) {
        double den = n * sxx - sx * sx;
        r.fit_slope = (n * sxy - sx * sy) / den;
        r.fit_intercept = std::exp((sy - r.fit_slope * sx) / n);
    }
    if (n >= 1) r.fit_constant = std::exp(sc / n);
    r.R_grid = std::move(R_grid);
    r.survival = std::move(survival);
    r.survival_se = std::move(survival_se);
    r.exceedances = std::move(exceedances);
    r.target_slope = target_slope;
    r.target_constant = target_constant;
    r.slope_tol = slope_tol;
    r.constant_factor = factor;
    bool ok = n >= 2 && std::abs(r.fit_slope - target_slope) <= slope_tol;
    if (target_constant > 0)
        ok = ok && r.fit_constant >= target_constant / factor && r.fit_constant <= target_constant * factor;
    r.pass = ok;
    return r;
}

namespace {

TailReport survival_report(std::vector<double> vals, std::int64_t M, const std::vector<double>& R_grid, double slope,
                           double constant, double slope_tol) {
    if (R_grid.empty()) throw Error(ErrorKind::Domain, "empty R grid");
    std::sort(vals.begin(), vals.end());
    std::vector<double> S, se;
    std::vector<std::int64_t> ex;
    for (double R : R_grid) {
        std::int64_t c = count_at_least(vals, R);
        double p = double(c) / double(M);
        ex.push_back(c);
        S.push_back(p);
        se.push_back(std::sqrt(p * (1 - p) / double(M)));
    }
    std::int64_t at_max = ex[std::max_element(R_grid.begin(), R_grid.end()) - R_grid.begin()];
    if (at_max < 200)
        throw Error(ErrorKind::InsufficientTailSamples,
                    "only " + std::to_string(at_max) + " exceedances at the largest R (need 200)");
    TailReport r = tail_from_survival(R_grid, S, se, ex, slope, constant, slope_tol, 2.0);
    r.samples = M;
    return r;
}

}  // namespace

TailReport mc_tail(const SampleSpec& spec, double t, const std::vector<double>& R_grid, double target_slope,
                   double slope_tol) {
    bool warn = check_spec(spec);
    if (!(t > 0)) throw Error(ErrorKind::Domain, "t must be positive");
    std::vector<cplx> v = sample_process(spec, {t});
    std::vector<double> a(v.size());
    const double s = 1.0 / std::sqrt(t);
    for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]) * s;
    // the constant is only predicted for the irrational case
    double c = warn ? 0.0 : 6.0 / (pi * pi);
    TailReport r = survival_report(std::move(a), spec.M, R_grid, target_slope, c, slope_tol);
    r.rational_pair_warning = warn;
    return r;
}

double re_tail_constant() {
    double c6 = gauss_legendre_real([](double th) { return std::pow(std::cos(th), 6); }, -pi / 2, pi / 2);
    return 6.0 / (pi * pi) * c6 / two_pi;
}

ReTailReport mc_re_tail(const SampleSpec& spec, const std::vector<double>& R_grid) {
    bool warn = check_spec(spec);
    std::vector<cplx> v = sample_process(spec, {1.0});
    std::vector<double> re(v.size()), neg(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        re[i] = v[i].real();
        neg[i] = -v[i].real();
    }
    ReTailReport out;
    out.right = survival_report(std::move(re), spec.M, R_grid, -6.0, warn ? 0.0 : re_tail_constant(), 0.6);
    out.right.rational_pair_warning = warn;
    std::sort(neg.begin(), neg.end());
    double zmax = 0;
    for (std::size_t i = 0; i < R_grid.size(); ++i) {
        double pl = double(count_at_least(neg, R_grid[i])) / double(spec.M);
        out.left_survival.push_back(pl);
        double pr = out.right.survival[i];
        double sd = std::sqrt((pl + pr) / double(spec.M));
        if (sd > 0) zmax = std::max(zmax, std::abs(pr - pl) / sd);
    }
    out.symmetry_max_z = zmax;

    // fixed-slope constants of both tails, jackknifed over contiguous blocks
    const std::size_t G = R_grid.size();
    auto edges = block_edges(spec.M, 100);
    const std::size_t B = edges.size() - 1;
    std::vector<std::int64_t> cr(B * G, 0), cl(B * G, 0), tr(G, 0), tl(G, 0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::int64_t i = edges[b]; i < edges[b + 1]; ++i)
            for (std::size_t k = 0; k < G; ++k) {
                if (v[i].real() >= R_grid[k]) ++cr[b * G + k];
                if (-v[i].real() >= R_grid[k]) ++cl[b * G + k];
            }
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < G; ++k) {
            tr[k] += cr[b * G + k];
            tl[k] += cl[b * G + k];
        }
    auto log_ratio = [&](std::size_t skip) {
        double s = 0;
        for (std::size_t k = 0; k < G; ++k) {
            double a = double(tr[k] - (skip < B ? cr[skip * G + k] : 0));
            double c = double(tl[k] - (skip < B ? cl[skip * G + k] : 0));
            s += std::log(std::max(a, 0.5)) - std::log(std::max(c, 0.5));
        }
        return s / double(G);
    };
    const double full = log_ratio(B);
    double mean = 0, ss = 0;
    std::vector<double> th(B);
    for (std::size_t b = 0; b < B; ++b) mean += (th[b] = log_ratio(b)) / double(B);
    for (double x : th) ss += (x - mean) * (x - mean);
    const double se = std::sqrt(double(B - 1) / double(B) * ss);
    out.left_constant = out.right.fit_constant * std::exp(-full);
    out.symmetry_z = se > 0 ? std::abs(full) / se : 0.0;
    out.symmetric = out.symmetry_z <= 2.0;
    return out;
}

ThetaTailReport theta_measure_tail(const ThetaTailOptions& opt) {
    if (opt.M < 1 || opt.task_size < 1) throw Error(ErrorKind::Domain, "M and task_size must be positive");
    if (opt.R_grid.empty()) throw Error(ErrorKind::Domain, "empty R grid");
    const bool strat = opt.cusp_height > 0;
    if (strat && (opt.cusp_height < 1 || !(opt.cusp_fraction > 0 && opt.cusp_fraction < 1)))
        throw Error(ErrorKind::Domain, "cusp_height must be >= 1 and cusp_fraction in (0,1)");
    const double y0 = std::sqrt(3.0) / 2.0;
    const double Y0 = strat ? opt.cusp_height : INFINITY;
    const std::int64_t M_cusp = strat ? std::int64_t(std::llround(opt.M * opt.cusp_fraction)) : 0;
    const std::int64_t M_comp = opt.M - M_cusp;

    struct Sample {
        double value = 0;
        int proposals = 0;
        bool skipped = false, warning = false;
    };
    std::vector<Sample> out(opt.M);
    const std::int64_t tasks = (opt.M + opt.task_size - 1) / opt.task_size;
    ThetaChiOptions copt;
    parallel_tasks(tasks, opt.workers, [&](std::int64_t task) {
        auto rng = task_rng(opt.seed, std::uint64_t(task));
        const std::int64_t lo = task * opt.task_size, hi = std::min(opt.M, lo + opt.task_size);
        for (std::int64_t i = lo; i < hi; ++i) {
            Sample& s = out[i];
            GroupElement g;
            if (i < M_comp) {
                const double inv_span = 1.0 / y0 - 1.0 / Y0;
                for (;;) {
                    ++s.proposals;
                    double x = uniform01(rng) - 0.5;
                    double y = 1.0 / (1.0 / y0 - uniform01(rng) * inv_span);
                    if (x * x + y * y >= 1.0) {
                        g.z = {x, y};
                        break;
                    }
                }
            } else {
                s.proposals = 1;
                double x = uniform01(rng) - 0.5;
                g.z = {x, Y0 / (1.0 - uniform01(rng))};
            }
            g.phi = pi * uniform01(rng);
            g.xi1 = uniform01(rng) - 0.5;
            g.xi2 = uniform01(rng) - 0.5;
            g.zeta = uniform01(rng) - 0.5;
            try {
                ThetaResult r = theta_chi(g, opt.tol, copt);
                s.value = std::abs(r.value);
                s.warning = r.diophantine_warning;
            } catch (const Error&) {
                s.skipped = true;
            }
        }
    });

    ThetaTailReport rep;
    const double p_cusp = strat ? 3.0 / (pi * Y0) : 0.0;
    const double p_comp = 1.0 - p_cusp;
    std::vector<double> comp, cusp;
    std::int64_t props = 0;
    for (std::int64_t i = 0; i < opt.M; ++i) {
        const Sample& s = out[i];
        if (i < M_comp) props += s.proposals;
        if (s.warning) ++rep.warnings;
        if (s.skipped) {
            ++rep.skipped;
            continue;
        }
        (i < M_comp ? comp : cusp).push_back(s.value);
    }
    std::sort(comp.begin(), comp.end());
    std::sort(cusp.begin(), cusp.end());
    std::vector<double> S, se;
    std::vector<std::int64_t> ex;
    for (double R : opt.R_grid) {
        double surv = 0, var = 0;
        std::int64_t cnt = 0;
        auto part = [&](const std::vector<double>& v, double w) {
            if (v.empty() || w == 0) return;
            std::int64_t c = count_at_least(v, R);
            double f = double(c) / double(v.size());
            surv += w * f;
            var += w * w * f * (1 - f) / double(v.size());
            cnt += c;
        };
        part(comp, p_comp);
        part(cusp, p_cusp);
        S.push_back(surv);
        se.push_back(std::sqrt(var));
        ex.push_back(cnt);
    }
    rep.tail = tail_from_survival(opt.R_grid, S, se, ex, -6.0, 6.0 / (pi * pi), 0.5, 2.0);
    rep.tail.samples = opt.M;
    // only the constant is a target here
    rep.tail.pass = rep.tail.fit_constant >= rep.tail.target_constant / 2 && rep.tail.fit_constant <= rep.tail.target_constant * 2;
    rep.skipped_fraction = double(rep.skipped) / double(opt.M);

    const double box = 2.0 / std::sqrt(3.0) - (strat ? 1.0 / Y0 : 0.0);
    const double acc = double(M_comp) / double(props);
    rep.mu_estimate = pi * (box * acc + (strat ? 1.0 / Y0 : 0.0));
    rep.mu_std_error = pi * box * acc * std::sqrt((1 - acc) / double(M_comp));
    rep.mu_target = pi * pi / 3.0;
    return rep;
}

MomentReport haar_moment_check(std::int64_t M, const CutoffSpec& f, int order, std::uint64_t seed, int workers,
                               double tol) {
    if (order != 2 && order != 4) throw Error(ErrorKind::Domain, "order must be 2 or 4");
    if (M < 1) throw Error(ErrorKind::Domain, "M must be positive");
    if (f.kind == CutoffKind::IndicatorUnit) throw Error(ErrorKind::UnsupportedCutoff, "haar moments need a regular cutoff");
    const KPhi kf(f);
    const std::int64_t ts = 1000;
    std::vector<double> v(M);
    parallel_tasks((M + ts - 1) / ts, workers, [&](std::int64_t task) {
        auto rng = task_rng(seed, std::uint64_t(task));
        for (std::int64_t i = task * ts; i < std::min(M, (task + 1) * ts); ++i) {
            GroupElement g = haar_sample(rng).g;
            double a = std::norm(theta_f(g, kf, tol).value);
            v[i] = order == 2 ? a : a * a;
        }
    });
    long double s = 0, ss = 0;
    for (double x : v) s += x;
    const long double mean = s / M;
    for (double x : v) ss += (x - mean) * (x - mean);
    MomentReport r;
    r.order = order;
    r.estimate = double(mean);
    r.std_error = M > 1 ? double(std::sqrt(ss / (M - 1) / M)) : 0.0;
    double n2 = f.l2_norm_squared();
    r.target = order == 2 ? n2 : 2 * n2 * n2;
    return r;
}

std::int64_t q_count(int N) {
    if (N < 1) throw Error(ErrorKind::Domain, "N must be positive");
    if (N > 500) throw Error(ErrorKind::CapacityExceeded, "q_count enumerates N^3 triples; N <= 500");
    std::vector<std::int32_t> hist(std::size_t(3) * N * N + 1, 0);
    std::vector<std::int32_t> touched;
    std::int64_t Q = 0;
    for (int s = 3; s <= 3 * N; ++s) {
        touched.clear();
        for (int x1 = 1; x1 <= N; ++x1) {
            int lo = std::max(1, s - x1 - N), hi = std::min(N, s - x1 - 1);
            for (int x2 = lo; x2 <= hi; ++x2) {
                int x3 = s - x1 - x2;
                int q = x1 * x1 + x2 * x2 + x3 * x3;
                if (hist[q]++ == 0) touched.push_back(q);
            }
        }
        for (int q : touched) {
            Q += std::int64_t(hist[q]) * hist[q];
            hist[q] = 0;
        }
    }
    return Q;
}

// ---------------------------------------------------------------- D(f)

double oscillatory_slice(double u) {
    u = std::abs(u);
    // |I(u,z)| = |I(u, 2u - z)|, so integrate z > u and double
    const double Z = 6.0, width = 0.5;
    const double a = u, b = 2 * u + Z;
    const int panels = std::max(1, int(std::ceil((b - a) / width)));
    const double h = (b - a) / panels;
    auto f = [u](double z) {
        double m = std::norm(fresnel_phase_integral({1, 0, 0}, u, -z, 0, 1));
        return m * m * m;
    };
    double s = 0;
    for (int k = 0; k < panels; ++k) s += gauss_legendre_real(f, a + k * h, a + (k + 1) * h);
    return 2 * s;
}

namespace {

double slice_head(double U) {
    const int panels = std::max(1, int(std::ceil(U / 0.5)));
    const double h = U / panels;
    double s = 0;
    for (int k = 0; k < panels; ++k) s += gauss_legendre_real(oscillatory_slice, k * h, (k + 1) * h);
    return s;
}

// angular measure of the circle {w : sum w = s, |w - s/3|^2 = r^2} inside [0,1]^3
double circle_in_cube(double s, double r) {
    if (r <= 0) return (s >= 0 && s <= 3) ? two_pi : 0.0;
    const double c = s / 3, A = std::sqrt(2.0 / 3.0) * r;
    const double th[3] = {0, two_pi / 3, 2 * two_pi / 3};
    double br[14];
    int n = 0;
    br[n++] = 0;
    br[n++] = two_pi;
    for (double ti : th)
        for (double lim : {0.0, 1.0}) {
            double v = (lim - c) / A;
            if (std::abs(v) >= 1) continue;
            double a = std::acos(v);
            for (double t : {ti + a, ti - a}) {
                t = std::fmod(t, two_pi);
                if (t < 0) t += two_pi;
                br[n++] = t;
            }
        }
    std::sort(br, br + n);
    double m = 0;
    for (int k = 0; k + 1 < n; ++k) {
        double t = 0.5 * (br[k] + br[k + 1]);
        bool in = true;
        for (double ti : th) {
            double w = c + A * std::cos(t - ti);
            if (w < 0 || w > 1) {
                in = false;
                break;
            }
        }
        if (in) m += br[k + 1] - br[k];
    }
    return m;
}

// rho_0 as the integral of the squared joint density of (sum w, sum w^2)
double rho0_density(int P) {
    const double hs = 3.0 / P, hr = 1.5 / P;
    double tot = 0;
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < P; ++j)
            tot += gauss_legendre_real(
                [&](double s) {
                    return gauss_legendre_real(
                        [&](double r) {
                            double T = circle_in_cube(s, r);
                            return 2 * r * T * T;
                        },
                        j * hr, (j + 1) * hr);
                },
                i * hs, (i + 1) * hs);
    return tot / 12.0;
}

// tail of the u-integral from U on, fitting 4u^2 J(u) = c0 + c1 u^{-1/2} (+ c2 u^{-1}) on [U/4, U]
double slice_tail(double U, int terms) {
    const int m = 24;
    Eigen::MatrixXd A(m, terms);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        double u = U / 4 + (U - U / 4) * i / (m - 1);
        for (int k = 0; k < terms; ++k) A(i, k) = std::pow(u, -0.5 * k);
        y(i) = oscillatory_slice(u) * 4 * u * u;
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    // integral of u^{-2-k/2}/4 from U to infinity
    double t = 0;
    for (int k = 0; k < terms; ++k) t += c(k) / (4 * (1 + 0.5 * k) * std::pow(U, 1 + 0.5 * k));
    return t;
}

}  // namespace

double oscillatory_window(double U) { return 4 * slice_head(U); }

double d_integral_phi_window(const CutoffSpec& f, double phi_lo, double phi_hi, int phi_panels) {
    const KPhi kf(f);
    auto inner = [&](double phi) {
        KPhiSlice sl = kf.at(phi);
        double lo, hi;
        if (sl.exact_multiple() && std::isfinite(sl.support_lo())) {
            lo = sl.support_lo();
            hi = sl.support_hi();
        } else {
            double d = 1.0;
            double W = std::max(sl.far_start(), sl.envelope_shift() + d);
            while (std::pow(sl.envelope(W), 6) * W > 1e-14 && d < 1e4) {
                d *= 1.5;
                W = std::max(sl.far_start(), sl.envelope_shift() + d);
            }
            lo = -W;
            hi = W;
        }
        const int panels = std::max(1, int(std::ceil((hi - lo) / 0.25)));
        const double h = (hi - lo) / panels;
        double s = 0;
        for (int k = 0; k < panels; ++k)
            s += gauss_legendre_real(
                [&](double w) {
                    double m = std::norm(sl(w));
                    return m * m * m;
                },
                lo + k * h, lo + (k + 1) * h);
        return s;
    };
    const double h = (phi_hi - phi_lo) / phi_panels;
    double s = 0;
    for (int k = 0; k < phi_panels; ++k) s += gauss_legendre_real(inner, phi_lo + k * h, phi_lo + (k + 1) * h);
    return s;
}

DResult d_integral(const CutoffSpec& f, double tol, DMethod method) {
    if (!(tol > 0)) throw Error(ErrorKind::Domain, "tol must be positive");
    const bool ind = f.kind == CutoffKind::IndicatorUnit;
    if (method == DMethod::Auto) method = ind ? DMethod::Oscillatory : DMethod::PhiForm;
    if (ind && method == DMethod::PhiForm)
        throw Error(ErrorKind::UnsupportedCutoff, "the phi form of D does not converge in reasonable time for the indicator");
    if (!ind && method != DMethod::PhiForm)
        throw Error(ErrorKind::UnsupportedCutoff, "oscillatory and density forms exist for the indicator only");
    DResult r;
    if (method == DMethod::PhiForm) {
        r.method = "phi-form";
        double a = d_integral_phi_window(f, 0, pi, 12);
        double b = d_integral_phi_window(f, 0, pi, 24);
        r.value = b;
        r.error_estimate = std::abs(b - a);
    } else if (method == DMethod::Density) {
        r.method = "density";
        double a = rho0_density(50), b = rho0_density(100);
        r.value = 2 * b;
        r.error_estimate = 2 * std::abs(b - a);
    } else {
        r.method = "oscillatory";
        for (double U = 40; U <= 160; U *= 2) {
            double head = slice_head(U);
            double t3 = slice_tail(U, 3), t2 = slice_tail(U, 2);
            // D = 2 rho_0 and rho_0 = 2 times the u > 0 half
            r.value = 4 * (head + t3);
            r.error_estimate = 4 * std::abs(t3 - t2);
            if (r.error_estimate <= tol) break;
        }
    }
    if (r.error_estimate > tol)
        throw Error(ErrorKind::AccuracyNotMet, "D(f) error estimate " + std::to_string(r.error_estimate) + " above tol");
    return r;
}

// ---------------------------------------------------------------- invariance

const char* invariance_name(InvarianceCheck c) {
    switch (c) {
    case InvarianceCheck::Scaling: return "scaling";
    case InvarianceCheck::Inversion: return "inversion";
    case InvarianceCheck::Stationarity: return "stationarity";
    case InvarianceCheck::Rotation: return "rotation";
    }
    return "?";
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::Domain, "empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

std::map<InvarianceCheck, InvarianceResult> invariance_suite(const SampleSpec& spec,
                                                             const std::vector<InvarianceCheck>& checks,
                                                             const InvarianceOptions& opt) {
    check_spec(spec);
    std::map<InvarianceCheck, InvarianceResult> out;
    for (InvarianceCheck c : checks) {
        // independent draws for each side of each check
        const std::uint64_t offA = (std::uint64_t(c) * 2 + 1) << 32, offB = (std::uint64_t(c) * 2 + 2) << 32;
        std::vector<cplx> A, B;
        double thr = 0.02;
        switch (c) {
        case InvarianceCheck::Scaling: {
            if (!(opt.a > 0)) throw Error(ErrorKind::Domain, "scaling needs a > 0");
            // Y(t) = X(a^2 t)/a against X(t) at the one time where both stay in [0,1]
            double t = opt.a >= 1 ? 1.0 / (opt.a * opt.a) : 1.0;
            A = sample_process(spec, {opt.a * opt.a * t}, offA);
            for (cplx& v : A) v /= opt.a;
            B = sample_process(spec, {t}, offB);
            break;
        }
        case InvarianceCheck::Inversion: {
            // Y(2) = 2 X(1/2) against X(2)
            A = sample_process(spec, {0.5}, offA);
            for (cplx& v : A) v *= 2.0;
            B = sample_process(spec, {2.0}, offB);
            break;
        }
        case InvarianceCheck::Stationarity: {
            thr = 0.03;
            std::vector<cplx> P = sample_process(spec, {opt.t0, opt.t0 + 0.25}, offA);
            A.resize(spec.M);
            for (std::int64_t i = 0; i < spec.M; ++i) A[i] = P[2 * i + 1] - P[2 * i];
            B = sample_process(spec, {0.25}, offB);
            break;
        }
        case InvarianceCheck::Rotation: {
            A = sample_process(spec, {1.0}, offA);
            const cplx r = e(opt.theta);
            for (cplx& v : A) v *= r;
            B = sample_process(spec, {1.0}, offB);
            break;
        }
        }
        auto proj = [](const std::vector<cplx>& v, bool re) {
            std::vector<double> o(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) o[i] = re ? v[i].real() : std::abs(v[i]);
            return o;
        };
        InvarianceResult r;
        r.ks_abs = ks_two_sample(proj(A, false), proj(B, false));
        r.ks_re = ks_two_sample(proj(A, true), proj(B, true));
        r.statistic = c == InvarianceCheck::Rotation ? r.ks_re : std::max(r.ks_abs, r.ks_re);
        r.threshold = thr;
        r.pass = r.statistic <= thr;
        out[c] = r;
    }
    return out;
}

MomentReport increment_correlation(const SampleSpec& spec) {
    MomentReport r;
    r.rational_pair_warning = check_spec(spec);
    std::vector<cplx> P = sample_process(spec, {0.5, 1.0});
    const std::int64_t M = spec.M;
    std::vector<double> a(M), b(M);
    for (std::int64_t i = 0; i < M; ++i) {
        a[i] = std::norm(P[2 * i]);
        b[i] = std::norm(P[2 * i + 1] - P[2 * i]);
    }
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / M, mb = std::accumulate(b.begin(), b.end(), 0.0) / M;
    double sab = 0, saa = 0, sbb = 0;
    for (std::int64_t i = 0; i < M; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    r.order = 2;
    r.estimate = saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
    r.std_error = M > 3 ? (1 - r.estimate * r.estimate) / std::sqrt(double(M - 3)) : 0.0;
    r.target = 0;
    return r;
}

double modulus_statistic(const std::vector<CurlicuePath>& paths, const std::vector<double>& h_grid, double eps) {
    if (!(eps > 0)) throw Error(ErrorKind::Domain, "eps must be positive");
    for (double h : h_grid)
        if (!(h > 0 && h <= 0.25)) throw Error(ErrorKind::Domain, "h must lie in (0, 1/4]");
    double best = 0;
    for (const CurlicuePath& p : paths) {
        if (p.N < 1) continue;
        for (double h : h_grid) {
            const double norm = std::sqrt(h) * std::pow(std::log(1.0 / h), 0.25 + eps);
            for (std::int64_t k = 0; k <= p.N; ++k) {
                double t = double(k) / double(p.N);
                if (t > 1 - h) break;
                best = std::max(best, std::abs(p.at(t + h) - p.at(t)) / norm);
            }
        }
    }
    return best;
}

}  // namespace thetasum
