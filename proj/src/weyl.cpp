#include "thetasum/weyl.hpp"

#include <algorithm>
#include <cmath>

namespace thetasum {

double frac_n2(std::int64_t n, double h) {
    if (n < 0) n = -n;
    if (n < (std::int64_t(1) << 26)) return frac_product(double(n * n), h);
    std::int64_t a = n >> 20, b = n & ((1 << 20) - 1);
    double s = frac_product(double(a * a), h * 0x1p40);
    s += frac_product(double(2 * a * b), h * 0x1p20);
    s += frac_product(double(b * b), h);
    return centered_frac(s);
}

double quadratic_phase(std::int64_t n, double x, double alpha) {
    return centered_frac(frac_n2(n, 0.5 * x) + frac_product(double(n), alpha));
}

namespace {

// Recurrence drift grows like the square of the block length: 64 keeps path
// sampling fast, the direct evaluator serves as an oracle and uses 8.
constexpr int kReseed = 64;
constexpr int kReseedDirect = 8;

// plain product; operator* goes through the NaN-checking library routine
inline cplx mul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// Visit terms e(n^2 x/2 + n alpha) for n = 1..N in blocks, using the rotation
// recurrence inside a block and exact phases at block starts.
template <int Block = kReseed, class Visit>
void for_each_term(std::int64_t N, double x, double alpha, Visit&& visit) {
    const cplx q = e(x);
    const double half = centered_frac(0.5 * x + alpha);
    for (std::int64_t n0 = 1; n0 <= N; n0 += Block) {
        cplx t = e(quadratic_phase(n0, x, alpha));
        cplx r = e(frac_product(double(n0), x) + half);
        std::int64_t n1 = std::min<std::int64_t>(N, n0 + Block - 1);
        for (std::int64_t n = n0; n <= n1; ++n) {
            visit(n, t);
            t = mul(t, r);
            r = mul(r, q);
        }
    }
}

}  // namespace

cplx weyl_sum_direct(std::int64_t N, double x, double alpha) {
    CompensatedSum s;
    for_each_term<kReseedDirect>(N, x, alpha, [&](std::int64_t, cplx t) { s.add(t); });
    return s.value();
}

cplx weyl_sum_poly(std::int64_t N, const WeylParams& p) {
    return weyl_sum_direct(N, p.x, p.c1 * p.x + p.alpha) * e(p.c0 * p.x);
}

cplx weyl_sum_general(std::int64_t N, double x, double alpha, const CutoffSpec& f) {
    if (N <= 0) throw Error(ErrorKind::Domain, "N must be positive");
    return weyl_sum_cutoff(double(N), x, alpha, f);
}

cplx weyl_sum_cutoff(double N, double x, double alpha, const CutoffSpec& f) {
    if (!(N > 0)) throw Error(ErrorKind::Domain, "N must be positive");
    double lo, hi;
    if (f.smooth()) {
        double R = std::sqrt(40.0 / pi) + (f.kind == CutoffKind::HermiteSeries ? std::sqrt(double(f.coeffs.size())) : 0.0);
        lo = -R;
        hi = R;
    } else {
        auto ps = pieces_of(f);
        lo = ps.front().lo;
        hi = ps.back().hi;
    }
    std::int64_t n0 = std::int64_t(std::ceil(lo * N)), n1 = std::int64_t(std::floor(hi * N));
    CompensatedSum s;
    for (std::int64_t n = n0; n <= n1; ++n) {
        double w = double(n) / N;
        double fv = f.kind == CutoffKind::IndicatorUnit ? ((n > 0 && double(n) <= N) ? 1.0 : 0.0) : f(w);
        if (fv == 0.0) continue;
        s.add(fv * e(quadratic_phase(n, x, alpha)));
    }
    return s.value();
}

AfeStep afe_step(std::int64_t N, double x, double alpha) {
    if (!(x > 0.0 && x < 2.0)) throw Error(ErrorKind::Domain, "afe_step needs 0 < x < 2");
    AfeStep s;
    s.N = std::int64_t(std::floor(x * double(N)));
    s.x_raw = -1.0 / x;
    s.alpha = alpha / x;
    s.prefactor = std::sqrt(cplx(0, 1.0 / x)) * e(-alpha * alpha / (2 * x));
    return s;
}

double afe_residual(std::int64_t N, double x, double alpha) {
    AfeStep st = afe_step(N, x, alpha);
    cplx r = weyl_sum_direct(N, x, alpha) - st.prefactor * weyl_sum_direct(st.N, st.x_raw, st.alpha);
    return std::abs(r) * std::sqrt(x);
}

RenormResult weyl_sum_renormalized(std::int64_t N, double x, double alpha, std::int64_t N_cut, int max_iter) {
    RenormResult r;
    cplx F = 1.0;
    bool conj = false;
    double err_scale = 0.0;
    auto apply = [&](cplx v) { return conj ? std::conj(v) : v; };
    for (;;) {
        x -= 2.0 * std::floor(x / 2.0);
        alpha -= std::floor(alpha);
        if (x > 1.0) {
            // S_N(x, alpha) = conj S_N(2 - x, 1 - alpha)
            x = 2.0 - x;
            alpha = alpha == 0.0 ? 0.0 : 1.0 - alpha;
            conj = !conj;
        }
        if (N <= N_cut) break;
        if (x == 0.0 || x < 2.0 / double(N)) {
            r.fell_back = true;
            break;
        }
        if (r.iterations >= max_iter) throw Error(ErrorKind::MaxIterExceeded, "renormalization did not reach the base case");
        AfeStep s = afe_step(N, x, alpha);
        if (s.N >= N) {
            r.fell_back = true;
            break;
        }
        err_scale += std::abs(F) * kAfeErrorConstant / std::sqrt(x);
        F *= apply(s.prefactor);
        N = s.N;
        x = s.x_raw;
        alpha = s.alpha;
        ++r.iterations;
    }
    r.value = F * apply(weyl_sum_direct(N, x, alpha));
    r.error_estimate = err_scale;
    return r;
}

cplx CurlicuePath::at(double t) const {
    if (prefix.empty()) return 0.0;
    if (t <= 0.0) return prefix[0] / std::sqrt(double(N));
    double tn = t * double(N);
    std::int64_t k = std::min<std::int64_t>(N, std::int64_t(std::floor(tn)));
    double fr = tn - double(k);
    cplx v = prefix[k];
    if (k < N && fr > 0.0) v += fr * (prefix[k + 1] - prefix[k]);
    return v / std::sqrt(double(N));
}

std::vector<cplx> CurlicuePath::samples(const std::vector<double>& t_grid) const {
    std::vector<cplx> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) out.push_back(at(t));
    return out;
}

CurlicuePath curlicue(std::int64_t N, const WeylParams& p) {
    CurlicuePath c;
    c.N = N;
    c.params = p;
    c.prefix.assign(N + 1, 0.0);
    const cplx ph = e(p.c0 * p.x);
    CompensatedSum s;
    for_each_term(N, p.x, p.c1 * p.x + p.alpha, [&](std::int64_t n, cplx t) {
        s.add(t);
        c.prefix[n] = s.value() * ph;
    });
    return c;
}

void partial_sums(std::int64_t N, const WeylParams& p, const std::vector<std::int64_t>& ks, std::vector<cplx>& out) {
    out.assign(ks.size(), 0.0);
    const cplx ph = e(p.c0 * p.x);
    std::size_t j = 0;
    while (j < ks.size() && ks[j] <= 0) ++j;
    cplx s = 0.0;
    for_each_term(N, p.x, p.c1 * p.x + p.alpha, [&](std::int64_t n, cplx t) {
        s += t;
        while (j < ks.size() && ks[j] == n) out[j++] = s * ph;
    });
}

}  // namespace thetasum
