#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "thetasum/shale_weil.hpp"
#include "thetasum/weyl.hpp"

namespace thetasum {

// Distribution of x: uniform on [a,b] or a piecewise-constant density on
// the bins [edges[i], edges[i+1]).
struct Lambda {
    double a = 0.0, b = 2.0;
    std::vector<double> edges, weights;

    static Lambda uniform(double a, double b);
    static Lambda table(std::vector<double> edges, std::vector<double> weights);
    bool is_table() const { return !edges.empty(); }
    double sample(std::mt19937_64& rng) const;
    std::string describe() const;
};

struct SampleSpec {
    std::int64_t M = 100000;
    std::int64_t N = 4096;
    Lambda lambda;
    WeylParams params;
    std::uint64_t seed = 20240601;
    // (c1, alpha) not in Q^2; cannot be decided in floating point, so the
    // caller asserts it
    bool irrational_pair = false;
    // run anyway with the flag unset (rational diagnostics)
    bool allow_rational = false;
    int workers = 0;  // 0: hardware concurrency
    std::int64_t task_size = 1000;
};

struct MomentReport {
    int order = 2;
    double estimate = 0;
    double std_error = 0;
    double target = 0;
    bool rational_pair_warning = false;
};

struct TailReport {
    std::vector<double> R_grid, survival, survival_se;
    std::vector<std::int64_t> exceedances;
    double fit_slope = 0;      // free least-squares slope of log survival
    double fit_intercept = 0;  // exp of the free fit intercept
    double fit_constant = 0;   // constant with the slope held at target_slope
    double target_slope = -6;
    double target_constant = 0;
    double slope_tol = 0.5;
    double constant_factor = 2;
    bool pass = false;
    std::int64_t samples = 0;
    bool rational_pair_warning = false;
};

// Deterministic parallel map over samples: sample i belongs to task
// i / task_size, whose generator is seeded from splitmix64(seed) ^ task.
std::uint64_t splitmix64(std::uint64_t x);
int resolve_workers(int workers);

// the M draws of x, in sample order
std::vector<double> sample_x(const SampleSpec& spec);

// X_N(t) for every draw of x and every t; row-major, M rows of |t_grid|.
std::vector<cplx> sample_process(const SampleSpec& spec, const std::vector<double>& t_grid,
                                 std::uint64_t task_offset = 0);

MomentReport mc_variance(const SampleSpec& spec, double t);
// exact Var X_1(1) under U[a,b]
double single_phase_variance(const WeylParams& p, double a, double b);

std::vector<double> linear_grid(double lo, double hi, int n);

TailReport tail_from_survival(std::vector<double> R_grid, std::vector<double> survival,
                              std::vector<double> survival_se, std::vector<std::int64_t> exceedances,
                              double target_slope, double target_constant, double slope_tol, double factor);

TailReport mc_tail(const SampleSpec& spec, double t, const std::vector<double>& R_grid, double target_slope = -6.0,
                   double slope_tol = 0.5);

struct ReTailReport {
    TailReport right;
    std::vector<double> left_survival;
    double left_constant = 0;
    // |log C+ - log C-| over its block jackknife standard error
    double symmetry_z = 0;
    double symmetry_max_z = 0;  // pointwise max |p+ - p-| / sqrt((p+ + p-)/M), diagnostic
    bool symmetric = false;
};
ReTailReport mc_re_tail(const SampleSpec& spec, const std::vector<double>& R_grid);
// (6/pi^2) (1/2pi) times the integral of cos^6 over (-pi/2, pi/2), by quadrature
double re_tail_constant();

struct ThetaTailOptions {
    std::int64_t M = 20000;
    std::vector<double> R_grid;
    std::uint64_t seed = 20240601;
    int workers = 0;
    std::int64_t task_size = 250;
    double tol = 0.05;
    // Haar measure split at y = cusp_height; cusp_fraction of the samples
    // go to y > cusp_height. cusp_height 0 turns stratification off.
    double cusp_height = 8.0;
    double cusp_fraction = 0.5;
};

struct ThetaTailReport {
    TailReport tail;
    std::int64_t skipped = 0;  // DivergenceSuspected or other evaluation failures
    std::int64_t warnings = 0;  // tail certificate not closed
    double skipped_fraction = 0;
    double mu_estimate = 0, mu_std_error = 0, mu_target = 0;
};
ThetaTailReport theta_measure_tail(const ThetaTailOptions& opt);

MomentReport haar_moment_check(std::int64_t M, const CutoffSpec& f, int order, std::uint64_t seed, int workers = 0,
                               double tol = 1e-6);

std::int64_t q_count(int N);

enum class DMethod { Auto, Oscillatory, PhiForm, Density };
struct DResult {
    double value = 0;
    double error_estimate = 0;
    std::string method;
};
// integral of |f_phi(w)|^6 over w in R, phi in [0, pi)
DResult d_integral(const CutoffSpec& f, double tol, DMethod method = DMethod::Auto);
// same over phi in [phi_lo, phi_hi] only
double d_integral_phi_window(const CutoffSpec& f, double phi_lo, double phi_hi, int phi_panels = 64);
// 2 times the integral of |int_0^1 e(u w^2 - z w) dw|^6 over |u| <= U, z in R
double oscillatory_window(double U);
// integral over z of |int_0^1 e(u w^2 - z w) dw|^6
double oscillatory_slice(double u);

enum class InvarianceCheck { Scaling, Inversion, Stationarity, Rotation };
const char* invariance_name(InvarianceCheck c);
struct InvarianceResult {
    double ks_abs = 0, ks_re = 0;
    double statistic = 0;  // max of the two (Re only for rotation)
    double threshold = 0;
    bool pass = false;
};
struct InvarianceOptions {
    double a = 2.0, theta = 0.3, t0 = 0.5;
};
std::map<InvarianceCheck, InvarianceResult> invariance_suite(const SampleSpec& spec,
                                                             const std::vector<InvarianceCheck>& checks,
                                                             const InvarianceOptions& opt = {});
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// correlation of |X(1/2)|^2 and |X(1) - X(1/2)|^2 (diagnostic, no target)
MomentReport increment_correlation(const SampleSpec& spec);

double modulus_statistic(const std::vector<CurlicuePath>& paths, const std::vector<double>& h_grid, double eps);

}  // namespace thetasum
