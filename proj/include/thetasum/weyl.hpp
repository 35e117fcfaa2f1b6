#pragma once

#include <cstdint>
#include <vector>

#include "thetasum/core.hpp"
#include "thetasum/shale_weil.hpp"

namespace thetasum {

struct WeylParams {
    double x = 0, alpha = 0, c1 = 0, c0 = 0;
};

// frac(n^2 h) for integer n up to about 6e10, without losing the fraction.
double frac_n2(std::int64_t n, double h);
// phase of e(n^2 x / 2 + n alpha), reduced to [-1/2, 1/2)
double quadratic_phase(std::int64_t n, double x, double alpha);

cplx weyl_sum_direct(std::int64_t N, double x, double alpha);
cplx weyl_sum_poly(std::int64_t N, const WeylParams& p);
// sum over all integers n of f(n/N) e(n^2 x/2 + n alpha); the indicator is taken on (0,1]
cplx weyl_sum_general(std::int64_t N, double x, double alpha, const CutoffSpec& f);
// Same with a real length parameter N > 0.
cplx weyl_sum_cutoff(double N, double x, double alpha, const CutoffSpec& f);

struct AfeStep {
    std::int64_t N;
    double x_raw, alpha;
    cplx prefactor;
};
AfeStep afe_step(std::int64_t N, double x, double alpha);
// sqrt(x) |S_N(x,alpha) - prefactor S_N'(-1/x, alpha/x)|, both sides summed directly
double afe_residual(std::int64_t N, double x, double alpha);

struct RenormResult {
    cplx value;
    double error_estimate = 0;  // heuristic, not certified
    int iterations = 0;
    bool fell_back = false;
};
// Heuristic constant C in the O(1/sqrt x) AFE error: sup of sqrt(x)*residual over
// 3000 random (x, alpha, N) with N up to 1e4 was 2.9.
inline constexpr double kAfeErrorConstant = 3.0;
RenormResult weyl_sum_renormalized(std::int64_t N, double x, double alpha, std::int64_t N_cut = 64, int max_iter = 200);

struct CurlicuePath {
    std::int64_t N = 0;
    WeylParams params;
    std::vector<cplx> prefix;  // S_0 .. S_N
    // X_N(t) = N^{-1/2} (S_[tN] + {tN}(S_[tN]+1 - S_[tN]))
    cplx at(double t) const;
    std::vector<cplx> samples(const std::vector<double>& t_grid) const;
};
CurlicuePath curlicue(std::int64_t N, const WeylParams& p);

// Prefix sums S_k of the polynomial sum for the requested sorted k values.
void partial_sums(std::int64_t N, const WeylParams& p, const std::vector<std::int64_t>& ks, std::vector<cplx>& out);

}  // namespace thetasum
