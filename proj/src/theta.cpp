#include "thetasum/theta.hpp"

#include <algorithm>
#include <cmath>

#include "thetasum/weyl.hpp"

namespace thetasum {

namespace {

// Upper bound for y^{1/4} sum over lattice points |w_n| > W of |f_phi(w_n)|,
// lattice spacing sqrt(y), both sides.
double tail_bound(const KPhiSlice& sl, double y, double W) {
    double d = W - sl.envelope_shift();
    if (d <= 0 || W < sl.far_start()) return INFINITY;
    double env = sl.envelope(W);
    double sy = std::sqrt(y);
    double integral_ratio = sl.decay_power() >= 2 ? d / (sl.decay_power() - 1) : 1.0 / (two_pi * d);
    return 2 * std::pow(y, 0.25) * env * (1 + integral_ratio / sy);
}

double truncation_radius(const KPhiSlice& sl, double y, double tol) {
    double lo = std::max(sl.far_start(), sl.envelope_shift()) + 1e-9;
    if (tail_bound(sl, y, lo) <= tol) return lo;
    double hi = lo;
    for (int k = 0;; ++k) {
        hi = sl.envelope_shift() + 2 * (hi - sl.envelope_shift()) + 1;
        if (tail_bound(sl, y, hi) <= tol) break;
        if (k > 200) throw Error(ErrorKind::AccuracyNotMet, "no truncation radius reaches the tolerance");
        lo = hi;
    }
    for (int k = 0; k < 40; ++k) {
        double mid = 0.5 * (lo + hi);
        if (tail_bound(sl, y, mid) <= tol)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

ThetaResult theta_f_at(const GroupElement& g, const KPhi& K, double tol, std::int64_t max_terms, bool& too_many) {
    const CutoffSpec& f = K.cutoff();
    KPhiSlice sl = K.at(g.phi);
    if (f.kind == CutoffKind::IndicatorUnit && !sl.exact_multiple())
        throw Error(ErrorKind::UnsupportedCutoff, "the indicator series does not converge absolutely unless phi is a multiple of pi");
    const double y = g.z.y, sy = std::sqrt(y);
    if (!(y > 0)) throw Error(ErrorKind::Domain, "theta_f needs y > 0");

    ThetaResult r;
    double wlo, whi;
    if (sl.exact_multiple() && !f.smooth()) {
        wlo = sl.support_lo();
        whi = sl.support_hi();
        r.certified_tail = 0;
    } else {
        double W = truncation_radius(sl, y, tol);
        wlo = -W;
        whi = W;
        r.certified_tail = tail_bound(sl, y, W);
    }
    double nlo_d = std::ceil(g.xi2 + wlo / sy), nhi_d = std::floor(g.xi2 + whi / sy);
    too_many = !(nhi_d - nlo_d < double(max_terms));
    if (too_many) return r;
    const std::int64_t nlo = std::int64_t(nlo_d), nhi = std::int64_t(nhi_d);

    const double x = g.z.x;
    const double base = g.zeta - 0.5 * g.xi1 * g.xi2 + 0.5 * g.xi2 * g.xi2 * x;
    const double lin = g.xi1 - g.xi2 * x;
    CompensatedSum sum;
    auto add = [&](std::int64_t n) {
        cplx fv = sl((double(n) - g.xi2) * sy);
        if (fv == cplx(0.0)) return;
        double ph = frac_n2(n, 0.5 * x) + frac_product(double(n), lin) + base;
        sum.add(fv * e(ph));
        ++r.terms_used;
    };
    std::int64_t n0 = std::clamp<std::int64_t>(std::int64_t(std::nearbyint(g.xi2)), nlo, std::max(nlo, nhi));
    if (nhi >= nlo) {
        add(n0);
        for (std::int64_t k = 1;; ++k) {
            bool any = false;
            if (n0 + k <= nhi) {
                add(n0 + k);
                any = true;
            }
            if (n0 - k >= nlo) {
                add(n0 - k);
                any = true;
            }
            if (!any) break;
        }
    }
    r.value = std::pow(y, 0.25) * sum.value();
    return r;
}

}  // namespace

ThetaResult theta_f(const GroupElement& g, const KPhi& K, double tol, const ThetaOptions& opt) {
    if (!(tol >= 0)) throw Error(ErrorKind::Domain, "tol must be nonnegative");
    bool too_many = false;
    ThetaResult r = theta_f_at(g, K, tol, opt.max_terms, too_many);
    if (!too_many) return r;
    if (!opt.reduce_if_expensive || K.cutoff().kind == CutoffKind::IndicatorUnit)
        throw Error(ErrorKind::AccuracyNotMet, "theta_f needs more than max_terms terms");
    r = theta_f_at(reduce_to_gamma_domain(g), K, tol, opt.max_terms, too_many);
    if (too_many) throw Error(ErrorKind::AccuracyNotMet, "theta_f needs more than max_terms terms after reduction");
    r.reduced = true;
    return r;
}

ThetaResult theta_f(const GroupElement& g, const CutoffSpec& f, double tol, const ThetaOptions& opt) {
    return theta_f(g, KPhi(f), tol, opt);
}

cplx jacobi_theta_series(cplx z, cplx alpha) {
    const double x = z.real(), y = z.imag();
    if (!(y > 0)) throw Error(ErrorKind::Domain, "jacobi_theta needs Im z > 0");
    const double center = -alpha.imag() / y;
    const double radius = std::sqrt(42.0 / (pi * y)) + 1;
    const std::int64_t n0 = std::int64_t(std::nearbyint(center));
    const std::int64_t r = std::int64_t(std::ceil(radius));
    CompensatedSum sum;
    for (std::int64_t k = 0; k <= r; ++k) {
        for (std::int64_t n : {n0 + k, n0 - k}) {
            if (k == 0 && n != n0) continue;
            double dn = double(n) - center;
            double logmag = -pi * y * (dn * dn - center * center);
            double ph = frac_n2(n, 0.5 * x) + frac_product(double(n), alpha.real());
            sum.add(std::exp(logmag) * e(ph));
            if (k == 0) break;
        }
    }
    return sum.value();
}

cplx jacobi_theta(cplx z, cplx alpha) {
    double x = z.real() - 2 * std::floor((z.real() + 1) / 2);
    cplx zz(x, z.imag());
    if (z.imag() < 0.5 && std::norm(zz) < 1.0) {
        cplx pref = std::sqrt(cplx(0, 1) / zz) * e(-alpha * alpha / (2.0 * zz));
        return pref * jacobi_theta_series(-1.0 / zz, alpha / zz);
    }
    return jacobi_theta_series(zz, alpha);
}

cplx jacobi_theta(const UpperHalfPoint& z, cplx alpha) { return jacobi_theta(z.as_complex(), alpha); }

EndpointCertificate endpoint_certificate(const GroupElement& g, double kappa, double q_cert) {
    EndpointCertificate c;
    c.kappa = kappa;
    Sl2Matrix m = matrix_of(g);
    if (m.c == 0.0) return c;
    c.finite_endpoint = true;
    c.endpoint = m.a / m.c;
    ContinuedFraction cf;
    try {
        cf = continued_fraction(c.endpoint, 64);
    } catch (const Error&) {
        return c;
    }
    double A = 1.0;
    for (const Convergent& cv : cf.convergents) {
        if (double(cv.q) > q_cert) break;
        double d = std::abs(frac_product(double(cv.q), c.endpoint));
        A = std::min(A, std::pow(double(cv.q), kappa) * d);
        c.q_max = double(cv.q);
    }
    c.A = A;
    return c;
}

double level_height_bound(const GroupElement& g, const EndpointCertificate& c, int j) {
    if (!c.finite_endpoint || c.A <= 0) return INFINITY;
    Sl2Matrix m = matrix_of(g);
    // z = M (i T) with T = 4^j; Y = T/(d^2 + c^2 T^2), Re z - endpoint = -d/(c(d^2 + c^2 T^2))
    double logT = 2.0 * j * std::log(2.0);
    double L = std::log(m.c * m.c) + 2 * logT;
    double logden = L + std::log1p(m.d * m.d * std::exp(-L));
    double logY = logT - logden;
    double t = -m.d / m.c * std::exp(-logT);
    double h = std::max(0.0, logY);
    h = std::max(h, -2.0 / c.kappa * std::log(c.A) + (-1 + 1 / c.kappa) * logY);
    return std::exp(h) * excursion_W(t);
}

double theta_level_bound(double kappa0, double kappa2, double y) {
    double s = std::sqrt(y);
    double S = 1 / ((1 + s / 2) * (1 + s / 2)) + 1 / (s * (1 + s / 2));
    return 1.05 * std::pow(y, 0.25) * (kappa0 + 2 * kappa2 * S);
}

namespace {

struct ChiConstants {
    KPhi delta{CutoffSpec::triangle()}, delta_minus{CutoffSpec::triangle_minus()};
    double k0 = kDeltaKappa0, k2 = kDeltaKappa2, k0m = kDeltaKappa0, k2m = kDeltaKappa2;
    // level bound for heights that are only known from above; the kappa_2 part
    // is decreasing in y on the fundamental domain so it is taken at y = sqrt(3)/2
    double tail_level(double H) const {
        double y0 = std::sqrt(3.0) / 2;
        double lowpart = theta_level_bound(0, 1, y0);
        return 1.05 * std::pow(H, 0.25) * (k0 + k0m) + lowpart * (k2 + k2m);
    }
};

const ChiConstants& chi_constants() {
    static const ChiConstants c;
    return c;
}

ThetaResult theta_chi_exact(const GroupElement& g) {
    // phi a multiple of pi: finite sums with the dyadic pieces as cutoffs at g itself
    ThetaResult r;
    const double q = g.phi / pi;
    const double refl = (static_cast<long long>(std::floor(q)) % 2 == 0) ? 1.0 : -1.0;
    const double sy = std::sqrt(g.z.y);
    // lattice values u_n = refl (n - xi2) sqrt(y) in (0, 1)
    double u_min = INFINITY, u_max = -INFINITY;
    {
        double lo = g.xi2 + (refl > 0 ? 0.0 : -1.0 / sy), hi = g.xi2 + (refl > 0 ? 1.0 / sy : 0.0);
        for (double n = std::floor(lo); n <= std::floor(lo) + 1; ++n) {
            double u = refl * (n - g.xi2) * sy;
            if (u > 0 && u < 1) u_min = std::min(u_min, u), u_max = std::max(u_max, u);
        }
        for (double n = std::ceil(hi); n >= std::ceil(hi) - 1; --n) {
            double u = refl * (n - g.xi2) * sy;
            if (u > 0 && u < 1) u_min = std::min(u_min, u), u_max = std::max(u_max, u);
        }
    }
    bool too_many = false;
    for (int j = 0; j < 1100; ++j) {
        double h = std::ldexp(1.0, -j);
        bool first = h * 2 / 3 > u_min, second = h * 2 / 3 > 1 - u_max;
        if (!first && !second) break;
        ThetaLevel lv;
        lv.j = j;
        lv.height = lv.height_minus = g.z.y;
        if (first) {
            ThetaResult t = theta_f_at(g, KPhi(CutoffSpec::trapezoid(h / 3, h / 3, h / 6, h / 3)), 0, INT64_MAX, too_many);
            lv.delta = t.value;
            r.terms_used += t.terms_used;
        }
        if (second) {
            ThetaResult t = theta_f_at(g, KPhi(CutoffSpec::trapezoid(1 - h / 3, 1 - h / 3, h / 3, h / 6)), 0, INT64_MAX, too_many);
            lv.delta_minus = t.value;
            r.terms_used += t.terms_used;
        }
        r.value += lv.delta + lv.delta_minus;
        r.levels.push_back(lv);
    }
    return r;
}

}  // namespace

ThetaResult theta_chi(const GroupElement& g, double tol, const ThetaChiOptions& opt) {
    if (!(tol > 0)) throw Error(ErrorKind::Domain, "tol must be positive");
    if (opt.J_max < 0) throw Error(ErrorKind::Domain, "J_max must be nonnegative");
    {
        double q = g.phi / pi;
        if (opt.exact_path && q == std::floor(q)) return theta_chi_exact(g);
    }
    const ChiConstants& C = chi_constants();
    const EndpointCertificate cert = endpoint_certificate(g, opt.kappa, opt.q_cert);

    // suffix sums of the level bounds beyond each j
    const int extra = 400;
    std::vector<double> suffix(opt.J_max + extra + 2, 0.0);
    for (int k = opt.J_max + extra; k >= 0; --k) {
        double H = level_height_bound(g, cert, k);
        suffix[k] = suffix[k + 1] + std::pow(2.0, -k / 2.0) * C.tail_level(H);
    }

    ThetaResult r;
    GroupElement h = reduce_to_gamma_domain(g);
    GroupElement hm = reduce_to_gamma_domain(jacobi_multiply(g, heisenberg(0, 1, 0)));
    const double level_tol = tol / (4 * (1 / (1 - std::pow(2.0, -0.25))));
    double eval_err = 0;
    bool done = false;
    ThetaOptions topt;
    topt.reduce_if_expensive = false;
    topt.max_terms = 50000000;
    for (int j = 0; j <= opt.J_max; ++j) {
        double w = std::pow(2.0, -j / 2.0);
        double tj = level_tol * std::pow(2.0, j / 4.0);
        ThetaResult a = theta_f(h, C.delta, tj, topt);
        ThetaResult b = theta_f(hm, C.delta_minus, tj, topt);
        ThetaLevel lv{j, w * a.value, w * b.value, h.z.y, hm.z.y};
        r.levels.push_back(lv);
        r.value += lv.delta + lv.delta_minus;
        r.terms_used += a.terms_used + b.terms_used;
        eval_err += w * (a.certified_tail + b.certified_tail);
        if (std::abs(r.value) > tolerances().divergence)
            throw Error(ErrorKind::DivergenceSuspected, "Theta_chi partial sum exceeded the divergence threshold");
        double Hb = level_height_bound(g, cert, j);
        if (std::max(h.z.y, hm.z.y) > Hb * (1 + 1e-9)) r.diophantine_warning = true;
        double tail = suffix[j + 1];
        r.certified_tail = tail + eval_err;
        if (tail < tol / 2) {
            done = true;
            break;
        }
        if (j < opt.J_max) {
            h = reduce_to_gamma_domain(geodesic_flow(h, -2 * std::log(2.0)));
            hm = reduce_to_gamma_domain(geodesic_flow(hm, -2 * std::log(2.0)));
        }
    }
    if (!done) r.diophantine_warning = true;
    return r;
}

double check_gamma_invariance(const GroupElement& g, const CutoffSpec& f, int i, double tol) {
    ThetaOptions opt;
    opt.reduce_if_expensive = false;
    opt.max_terms = 20000000;
    KPhi K(f);
    cplx a = theta_f(jacobi_multiply(gamma_generator(i), g), K, tol, opt).value;
    cplx b = theta_f(g, K, tol, opt).value;
    return std::abs(a - b);
}

double thm1_residual(double x, double alpha, double u, double beta, double s, const CutoffSpec& f) {
    if (s < 0) throw Error(ErrorKind::Domain, "s must be nonnegative");
    if (f.kind == CutoffKind::IndicatorUnit) throw Error(ErrorKind::UnsupportedCutoff, "thm1_residual needs a regular cutoff");
    const double N = std::exp(s / 2);
    GroupElement g = jacobi_multiply(jacobi_multiply(n_plus(x, alpha), n_minus(u, beta)), flow_element(s));
    cplx th = theta_f(g, f, 1e-13).value;
    cplx S = weyl_sum_cutoff(N, x, alpha, f);
    return std::abs(S - std::exp(s / 4) * th);
}

}  // namespace thetasum
