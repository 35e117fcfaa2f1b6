#include "thetasum/diophantine.hpp"

#include <cmath>

namespace thetasum {

ContinuedFraction continued_fraction(double x, int max_terms) {
    if (!std::isfinite(x)) throw Error(ErrorKind::Domain, "continued_fraction needs a finite x");
    if (max_terms < 0 || max_terms > 64) throw Error(ErrorKind::Domain, "max_terms must be in [0, 64]");
    ContinuedFraction cf;
    long double r = x;
    long double a = std::floor(r);
    cf.a0 = static_cast<std::int64_t>(a);
    std::int64_t p_prev = 1, q_prev = 0, p = cf.a0, q = 1;
    cf.convergents.push_back({p, q});
    r -= a;
    const std::int64_t limit = std::int64_t(1) << 52;
    for (int k = 0; k < max_terms && r != 0; ++k) {
        r = 1 / r;
        a = std::floor(r);
        r -= a;
        if (a > (long double)limit) throw Error(ErrorKind::PrecisionExhausted, "partial quotient too large");
        std::int64_t ak = static_cast<std::int64_t>(a);
        __int128 pn = (__int128)ak * p + p_prev, qn = (__int128)ak * q + q_prev;
        if (qn > limit || pn > ((__int128)1 << 62) || pn < -((__int128)1 << 62))
            throw Error(ErrorKind::PrecisionExhausted, "convergent denominator exceeds 2^52");
        cf.partial_quotients.push_back(ak);
        p_prev = p;
        q_prev = q;
        p = static_cast<std::int64_t>(pn);
        q = static_cast<std::int64_t>(qn);
        cf.convergents.push_back({p, q});
        if ((long double)p / (long double)q == (long double)x) break;
    }
    return cf;
}

DiophantineEstimate diophantine_type(double x, double kappa, std::int64_t Q_max) {
    if (kappa < 1) throw Error(ErrorKind::Domain, "kappa must be at least 1");
    if (Q_max < 1) throw Error(ErrorKind::Domain, "Q_max must be positive");
    DiophantineEstimate d;
    d.kappa = kappa;
    d.Q_max = Q_max;
    d.A_lower = INFINITY;
    d.A_asymptotic = INFINITY;
    std::int64_t q_tail = std::int64_t(std::ceil(std::sqrt(double(Q_max))));
    for (std::int64_t q = 1; q <= Q_max; ++q) {
        double v = std::pow(double(q), kappa) * std::abs(frac_product(double(q), x));
        if (v < d.A_lower) {
            d.A_lower = v;
            d.q_at_min = q;
        }
        if (q >= q_tail && v < d.A_asymptotic) d.A_asymptotic = v;
    }
    return d;
}

UpperHalfPoint z_su(double x, double u, double s) {
    double den = std::exp(2 * s) + u * u;
    return {x + u / den, std::exp(s) / den};
}

double excursion_W(double t) { return 1 + 0.5 * (t * t + std::abs(t) * std::sqrt(4 + t * t)); }

double excursion_bound(double, double u, double A, double kappa, double s) {
    if (u == 0) throw Error(ErrorKind::Domain, "excursion_bound needs u != 0");
    if (s < 0) throw Error(ErrorKind::Domain, "excursion_bound needs s >= 0");
    double au = std::abs(u);
    double s0 = 2 * std::max(std::log(1 / au), 0.0);
    if (s <= s0) return std::max(1 / (2 * au), 2.0);
    double k = 1 - 1 / kappa;
    return std::pow(A, -2 / kappa) * std::pow(au, k) * std::exp(-k * s) * excursion_W(u);
}

}  // namespace thetasum
