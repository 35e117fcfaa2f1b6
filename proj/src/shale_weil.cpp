#include "thetasum/shale_weil.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "thetasum/special.hpp"

namespace thetasum {

// ---------------------------------------------------------------- cutoffs

CutoffSpec CutoffSpec::gaussian() { return {}; }

CutoffSpec CutoffSpec::indicator() {
    CutoffSpec f;
    f.kind = CutoffKind::IndicatorUnit;
    f.a = 0;
    f.b = 1;
    return f;
}

CutoffSpec CutoffSpec::triangle() {
    CutoffSpec f;
    f.kind = CutoffKind::Triangle;
    f.a = f.b = 1.0 / 3;
    f.eps = 1.0 / 6;
    f.del = 1.0 / 3;
    return f;
}

CutoffSpec CutoffSpec::triangle_minus() {
    CutoffSpec f;
    f.kind = CutoffKind::TriangleMinus;
    f.a = f.b = -1.0 / 3;
    f.eps = 1.0 / 3;
    f.del = 1.0 / 6;
    return f;
}

CutoffSpec CutoffSpec::trapezoid(double a, double b, double eps, double del) {
    if (!(a >= 0 && a <= b && eps > 0 && del > 0))
        throw Error(ErrorKind::Domain, "trapezoid needs 0 <= a <= b and eps, del > 0");
    CutoffSpec f;
    f.kind = CutoffKind::Trapezoid;
    f.a = a;
    f.b = b;
    f.eps = eps;
    f.del = del;
    return f;
}

CutoffSpec CutoffSpec::hermite_series(std::vector<double> c) {
    if (c.empty()) throw Error(ErrorKind::Domain, "empty Hermite series");
    CutoffSpec f;
    f.kind = CutoffKind::HermiteSeries;
    f.coeffs = std::move(c);
    return f;
}

std::string CutoffSpec::name() const {
    switch (kind) {
    case CutoffKind::Gaussian: return "gaussian";
    case CutoffKind::IndicatorUnit: return "indicator";
    case CutoffKind::Triangle: return "triangle";
    case CutoffKind::TriangleMinus: return "triangle-minus";
    case CutoffKind::Trapezoid: return "trapezoid";
    case CutoffKind::HermiteSeries: return "hermite-series";
    }
    return "?";
}

std::vector<QuadPiece> pieces_of(const CutoffSpec& f) {
    std::vector<QuadPiece> out;
    if (f.kind == CutoffKind::IndicatorUnit) {
        out.push_back({0.0, 1.0, 1.0, 0.0, 0.0});
        return out;
    }
    if (f.smooth()) throw Error(ErrorKind::UnsupportedCutoff, "smooth cutoff has no piecewise form");
    const double a = f.a, b = f.b, e = f.eps, d = f.del;
    double s = 2.0 / (e * e);
    double c = a - e;
    out.push_back({a - e, a - e / 2, s * c * c, -2 * s * c, s});
    out.push_back({a - e / 2, a, 1 - s * a * a, 2 * s * a, -s});
    if (b > a) out.push_back({a, b, 1, 0, 0});
    s = 2.0 / (d * d);
    out.push_back({b, b + d / 2, 1 - s * b * b, 2 * s * b, -s});
    c = b + d;
    out.push_back({b + d / 2, b + d, s * c * c, -2 * s * c, s});
    return out;
}

double CutoffSpec::operator()(double w) const {
    switch (kind) {
    case CutoffKind::Gaussian: return std::exp(-pi * w * w);
    case CutoffKind::IndicatorUnit: return (w > 0.0 && w < 1.0) ? 1.0 : 0.0;
    case CutoffKind::HermiteSeries: {
        std::vector<double> psi;
        hermite_psi_all(int(coeffs.size()), w, psi);
        double s = 0;
        for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * psi[k];
        return s;
    }
    default: break;
    }
    for (const QuadPiece& p : pieces_of(*this))
        if (w >= p.lo && w < p.hi) return p(w);
    return 0.0;
}

double CutoffSpec::l2_norm_squared() const {
    if (kind == CutoffKind::Gaussian) return 1.0 / std::sqrt(2.0);
    if (kind == CutoffKind::HermiteSeries) {
        double s = 0;
        for (double c : coeffs) s += c * c;
        return s;
    }
    double s = 0;
    for (const QuadPiece& p : pieces_of(*this))
        s += gauss_legendre_real([&](double v) { return p(v) * p(v); }, p.lo, p.hi);
    return s;
}

int sigma_phi(double phi) {
    double q = phi / pi;
    double fl = std::floor(q);
    if (q == fl) return int(2 * fl);
    return int(2 * fl + 1);
}

// ---------------------------------------------------------------- Fresnel

namespace {

struct Phase {
    double c0, c1, c2;
    double at(double v) const { return c0 + v * (c1 + v * c2); }
};

cplx poly_integral_gl(const QuadPoly& p, const Phase& ph, double a, double b, int panels) {
    auto g = [&](double v) { return (p.q0 + v * (p.q1 + v * p.q2)) * e(ph.at(v)); };
    return gauss_legendre_panels(g, a, b, panels);
}

// closed form for c2 > 0
cplx fresnel_closed(const QuadPoly& p, const Phase& ph, double a, double b, double stationary) {
    const double c2 = ph.c2, c1 = ph.c1;
    const double s = std::sqrt(two_pi * c2);
    const double h = c1 / (2 * c2);
    const double ta = s * (a + h), tb = s * (b + h);
    const cplx rot = std::polar(1.0, pi / 4);
    const cplx K = 0.5 * std::sqrt(pi) * rot;
    const cplx Ea = e(ph.at(a)), Eb = e(ph.at(b));
    auto sgn = [](double t) { return t < 0 ? -1.0 : 1.0; };
    auto G = [&](double t) { return faddeeva(rot * std::abs(t)); };
    cplx J0 = -K * (sgn(tb) * Eb * G(tb) - sgn(ta) * Ea * G(ta));
    double ds = sgn(tb) - sgn(ta);
    if (ds != 0.0) J0 += ds * K * e(stationary);
    J0 /= s;
    if (p.q1 == 0.0 && p.q2 == 0.0) return p.q0 * J0;
    const cplx tpi(0, two_pi);
    cplx J1 = ((Eb - Ea) / tpi - c1 * J0) / (2 * c2);
    cplx J2 = ((b * Eb - a * Ea - J0) / tpi - c1 * J1) / (2 * c2);
    return p.q0 * J0 + p.q1 * J1 + p.q2 * J2;
}

// Taylor expansion in c2 with moments of e(c1 v), valid for small c2 and |c1| large
cplx fresnel_taylor(const QuadPoly& p, const Phase& ph, double a, double b) {
    const double c1 = ph.c1, c2 = ph.c2;
    const double W = std::max(std::abs(a), std::abs(b));
    const cplx tpc(0, two_pi * c1);
    const cplx Ea = e(c1 * a), Eb = e(c1 * b);
    std::vector<cplx> M;
    auto moment = [&](int m) {
        while (int(M.size()) <= m) {
            int j = int(M.size());
            cplx bd = std::pow(b, j) * Eb - std::pow(a, j) * Ea;
            M.push_back(j == 0 ? bd / tpc : (bd - double(j) * M[j - 1]) / tpc);
        }
        return M[m];
    };
    cplx sum = 0.0, fac = 1.0;
    const cplx z(0, two_pi * c2);
    double pmag = std::abs(p.q0) + std::abs(p.q1) * W + std::abs(p.q2) * W * W;
    for (int k = 0; k < 60; ++k) {
        if (k > 0) fac *= z / double(k);
        cplx term = fac * (p.q0 * moment(2 * k) + p.q1 * moment(2 * k + 1) + p.q2 * moment(2 * k + 2));
        sum += term;
        double bound = std::abs(fac) * std::pow(W, 2 * k) * pmag * (b - a);
        if (bound < 1e-18) break;
    }
    return sum * e(ph.c0);
}

cplx fresnel_dispatch(const QuadPoly& p, Phase ph, double a, double b, const double* stationary) {
    if (!(a <= b)) throw Error(ErrorKind::Domain, "fresnel integral needs a <= b");
    if (a == b) return 0.0;
    const double span = b - a;
    const double Lmax = std::max(std::abs(2 * ph.c2 * a + ph.c1), std::abs(2 * ph.c2 * b + ph.c1));
    const double V = Lmax * span;
    if (V <= 4.0) return poly_integral_gl(p, ph, a, b, 1);
    if (std::abs(ph.c2) >= 0.01) {
        bool neg = ph.c2 < 0;
        double stat = stationary ? *stationary : ph.c0 - ph.c1 * ph.c1 / (4 * ph.c2);
        if (neg) {
            // p is real, so conjugate the integrand
            Phase q{-ph.c0, -ph.c1, -ph.c2};
            return std::conj(fresnel_closed(p, q, a, b, -stat));
        }
        return fresnel_closed(p, ph, a, b, stat);
    }
    const double W = std::max(std::abs(a), std::abs(b));
    if (std::abs(ph.c1) >= 8.0 && two_pi * std::abs(ph.c2) * W * W <= 1.0) return fresnel_taylor(p, ph, a, b);
    int panels = int(std::ceil(V / 2.0));
    if (panels > 1000000) throw Error(ErrorKind::AccuracyNotMet, "oscillation too fast for panel quadrature");
    return poly_integral_gl(p, ph, a, b, panels);
}

}  // namespace

cplx fresnel_phase_integral(const QuadPoly& p, double c2, double c1, double a, double b) {
    return fresnel_dispatch(p, Phase{0.0, c1, c2}, a, b, nullptr);
}

cplx fresnel_phase_integral(const QuadPoly& p, double c2, double c1, double c0, double a, double b,
                            const double* stationary) {
    return fresnel_dispatch(p, Phase{c0, c1, c2}, a, b, stationary);
}

// ---------------------------------------------------------------- Hermite

std::vector<double> hermite_coeffs(const CutoffSpec& f, int K) {
    if (K < 1) throw Error(ErrorKind::Domain, "K must be positive");
    if (f.kind == CutoffKind::HermiteSeries) {
        std::vector<double> c(K, 0.0);
        for (int k = 0; k < K && k < int(f.coeffs.size()); ++k) c[k] = f.coeffs[k];
        return c;
    }
    if (f.kind != CutoffKind::Gaussian) throw Error(ErrorKind::UnsupportedCutoff, "Hermite coefficients need a smooth cutoff");
    const GaussHermiteRule& rule = gauss_hermite(std::min(600, std::max(20, 4 * K)));
    std::vector<double> c(K, 0.0), psi;
    const double scale = 1.0 / std::sqrt(two_pi);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double t = rule.nodes[i] * scale;
        hermite_psi_all(K, t, psi);
        double ft = f(t) * rule.scaled_weights[i] * scale;
        for (int k = 0; k < K; ++k) c[k] += ft * psi[k];
    }
    return c;
}

// ---------------------------------------------------------------- f_phi

namespace {

struct Knot {
    double v;
    double jump[3];  // jumps of p, p', p''
    int order;       // lowest m with a nonzero jump
};

std::vector<Knot> knots_of(const std::vector<QuadPiece>& ps) {
    std::map<double, std::array<double, 3>> acc;
    for (const QuadPiece& p : ps) {
        double lo = p.lo, hi = p.hi;
        std::array<double, 3> at_lo{p(lo), p.q1 + 2 * p.q2 * lo, 2 * p.q2};
        std::array<double, 3> at_hi{p(hi), p.q1 + 2 * p.q2 * hi, 2 * p.q2};
        for (int m = 0; m < 3; ++m) {
            acc[lo][m] += at_lo[m];
            acc[hi][m] -= at_hi[m];
        }
    }
    std::vector<Knot> out;
    for (auto& [v, j] : acc) {
        Knot k{v, {j[0], j[1], j[2]}, 3};
        for (int m = 0; m < 3; ++m) {
            if (std::abs(j[m]) < 1e-12 * (1 + std::abs(j[2]))) k.jump[m] = 0.0;
            if (k.jump[m] != 0.0 && k.order == 3) k.order = m;
        }
        if (k.order < 3) out.push_back(k);
    }
    return out;
}

// B[k][m]: coefficients of the integration-by-parts expansion
struct IbpTable {
    static constexpr int K = 48;
    double B[K][3] = {};
    IbpTable() {
        B[0][0] = 1.0;
        for (int k = 0; k + 1 < K; ++k)
            for (int m = 0; m < 3; ++m) {
                if (B[k][m] == 0.0) continue;
                if (m + 1 < 3) B[k + 1][m + 1] += B[k][m];
                B[k + 1][m] += -2.0 * (2 * k + 1 - m) * B[k][m];
            }
    }
};

const IbpTable& ibp() {
    static const IbpTable t;
    return t;
}

constexpr double kFarRatio = 0.005;

}  // namespace

struct KPhiSlice::Impl {
    CutoffSpec f;
    double phi = 0, s = 0, c = 0, c2 = 0, amp = 0;
    cplx phase;
    bool exact = false;
    double reflect = 1.0;
    std::vector<double> hermite;
    std::vector<cplx> hermite_rot;
    double hermite_abs = 0, turning = 0;
    std::vector<QuadPiece> pieces;
    std::vector<Knot> knots;
    double knot_max = 0;
    double envelope_const = 0;

    cplx smooth_value(double w) const {
        if (hermite.size() == 1) return hermite_rot[0] * std::pow(2.0, 0.25) * std::exp(-pi * w * w);
        std::vector<double> psi;
        hermite_psi_all(int(hermite.size()), w, psi);
        cplx sum = 0.0;
        for (std::size_t k = 0; k < hermite.size(); ++k) sum += hermite_rot[k] * psi[k];
        return sum;
    }

    bool far_value(double w, cplx& out) const {
        const double tiny = 1e-300;
        double Lmin = INFINITY;
        int sign = 0;
        double L[8];
        std::size_t nk = knots.size();
        for (std::size_t i = 0; i < nk; ++i) {
            L[i] = (knots[i].v * c - w) / s;
            int sg = L[i] > 0 ? 1 : -1;
            if (sign == 0) sign = sg;
            if (sg != sign || std::abs(L[i]) < tiny) return false;
            Lmin = std::min(Lmin, std::abs(L[i]));
        }
        if (std::abs(c2) > kFarRatio * Lmin * Lmin) return false;
        const IbpTable& T = ibp();
        cplx total = 0.0;
        for (std::size_t i = 0; i < nk; ++i) {
            const Knot& kn = knots[i];
            double theta = ((w * w + kn.v * kn.v) * c - 2 * w * kn.v) / (2 * s);
            double inv = 1.0 / L[i];
            cplx sum = 0.0;
            cplx pref = 1.0 / cplx(0, two_pi);  // (-1)^k / (2 pi i)^{k+1}
            double prev = INFINITY;
            for (int k = 0; k < IbpTable::K; ++k) {
                double t = 0.0;
                for (int m = 0; m <= std::min(k, 2); ++m)
                    if (kn.jump[m] != 0.0 && T.B[k][m] != 0.0)
                        t += T.B[k][m] * kn.jump[m] * std::pow(c2, k - m) * std::pow(inv, 2 * k + 1 - m);
                cplx term = pref * t;
                double mag = std::abs(term);
                if (k > kn.order + 1 && mag > prev) break;
                sum += term;
                if (k > kn.order && mag < 1e-17 * std::abs(sum)) break;
                if (k >= kn.order) prev = mag;
                pref *= -1.0 / cplx(0, two_pi);
            }
            total -= e(theta) * sum;
        }
        out = total;
        return true;
    }

    cplx near_value(double w) const {
        double c1 = -w / s;
        double c0 = 0.5 * w * w * c / s;
        double stat = -0.5 * w * w * s / c;
        const double* statp = (c != 0.0) ? &stat : nullptr;
        cplx sum = 0.0;
        for (const QuadPiece& p : pieces) sum += fresnel_phase_integral({p.q0, p.q1, p.q2}, c2, c1, c0, p.lo, p.hi, statp);
        return sum;
    }
};

cplx KPhiSlice::operator()(double w) const {
    const Impl& m = *impl_;
    if (m.f.smooth()) return m.smooth_value(w);
    if (m.exact) return m.phase * m.f(m.reflect * w);
    cplx v;
    if (!m.far_value(w, v)) v = m.near_value(w);
    return m.phase * m.amp * v;
}

double KPhiSlice::envelope(double w) const {
    const Impl& m = *impl_;
    double aw = std::abs(w);
    if (m.f.smooth()) {
        if (aw <= m.turning) return m.hermite_abs * std::pow(2.0, 0.25);
        double d = aw - m.turning;
        return m.hermite_abs * std::pow(2.0, 0.25) * std::exp(-pi * d * d);
    }
    if (m.exact) return aw > m.knot_max ? 0.0 : 1.0;
    double d = aw - m.knot_max * std::abs(m.c);
    if (d <= 0) return INFINITY;
    return m.envelope_const / std::pow(d, decay_power_);
}

KPhi::KPhi(const CutoffSpec& f, double hermite_tol) : f_(f) {
    if (f.smooth()) {
        int K = f.kind == CutoffKind::Gaussian ? 16 : int(f.coeffs.size());
        hermite_ = hermite_coeffs(f, K);
        int last = 0;
        for (int k = 0; k < K; ++k)
            if (std::abs(hermite_[k]) * std::pow(2.0, 0.25) >= hermite_tol / 10) last = k;
        hermite_.resize(last + 1);
    } else {
        pieces_ = pieces_of(f);
    }
}

KPhiSlice KPhi::at(double phi) const {
    auto m = std::make_shared<KPhiSlice::Impl>();
    m->f = f_;
    m->phi = phi;
    m->phase = e(-sigma_phi(phi) / 8.0);
    double q = phi / pi;
    m->exact = (q == std::floor(q));
    if (m->exact) m->reflect = (static_cast<long long>(std::floor(q)) % 2 == 0) ? 1.0 : -1.0;
    m->s = std::sin(phi);
    m->c = std::cos(phi);
    if (!m->exact) {
        m->c2 = m->c / (2 * m->s);
        m->amp = 1.0 / std::sqrt(std::abs(m->s));
    }
    KPhiSlice out;
    out.phi_ = phi;
    out.exact_ = m->exact;
    if (f_.smooth()) {
        m->hermite = hermite_;
        for (std::size_t k = 0; k < hermite_.size(); ++k) {
            m->hermite_rot.push_back(hermite_[k] * std::polar(1.0, -(2.0 * k + 1) * phi / 2));
            m->hermite_abs += std::abs(hermite_[k]);
        }
        m->turning = hermite_.size() == 1 ? 0.0 : std::sqrt((2.0 * hermite_.size() + 1) / two_pi);
        out.far_start_ = m->turning;
        out.shift_ = m->turning;
        out.decay_power_ = 0;
    } else {
        m->pieces = pieces_;
        m->knots = knots_of(pieces_);
        for (const Knot& k : m->knots) m->knot_max = std::max(m->knot_max, std::abs(k.v));
        if (m->exact) {
            out.far_start_ = m->knot_max;
            out.shift_ = m->knot_max;
            out.decay_power_ = 0;
            double lo = pieces_.front().lo, hi = pieces_.back().hi;
            out.support_lo_ = m->reflect > 0 ? lo : -hi;
            out.support_hi_ = m->reflect > 0 ? hi : -lo;
        } else {
            int p = 3;
            for (const Knot& k : m->knots) p = std::min(p, k.order + 1);
            double cst = 0;
            for (const Knot& k : m->knots)
                if (k.order + 1 == p) cst += std::abs(k.jump[k.order]);
            // leading integration-by-parts term, with 50% allowance for the rest
            m->envelope_const = 1.5 * m->amp * cst * std::pow(std::abs(m->s), p) / std::pow(two_pi, p);
            out.decay_power_ = p;
            out.far_start_ = m->knot_max + std::sqrt(std::abs(m->s * m->c) / (2 * kFarRatio)) + 1e-12;
            out.shift_ = m->knot_max * std::abs(m->c);
        }
    }
    out.impl_ = m;
    return out;
}

cplx apply_kphi(const CutoffSpec& f, double phi, double w) { return KPhi(f).at(phi)(w); }

cplx apply_kphi_quadrature(const CutoffSpec& f, double phi, double w) {
    double q = phi / pi;
    cplx phase = e(-sigma_phi(phi) / 8.0);
    if (q == std::floor(q)) {
        double refl = (static_cast<long long>(std::floor(q)) % 2 == 0) ? 1.0 : -1.0;
        return phase * f(refl * w);
    }
    double s = std::sin(phi), c = std::cos(phi);
    double c2 = c / (2 * s), c1 = -w / s, c0 = 0.5 * w * w * c / s;
    std::vector<std::pair<double, double>> spans;
    if (f.smooth()) {
        double R = 8.0 + (f.kind == CutoffKind::HermiteSeries ? std::sqrt(double(f.coeffs.size())) : 0.0);
        spans.push_back({-R, R});
    } else {
        for (const QuadPiece& p : pieces_of(f)) spans.push_back({p.lo, p.hi});
    }
    cplx sum = 0.0;
    for (auto [lo, hi] : spans) {
        double L = std::max(std::abs(2 * c2 * lo + c1), std::abs(2 * c2 * hi + c1));
        int panels = int(std::ceil(L * (hi - lo))) + 1;
        // evaluate f inside the span so that half-open piece conventions do not matter
        auto g = [&](double v) {
            double fv = f(std::clamp(v, lo + 1e-300, hi - 1e-300));
            if (f.kind == CutoffKind::IndicatorUnit) fv = 1.0;
            return fv * e(c0 + v * (c1 + v * c2));
        };
        sum += gauss_legendre_panels(g, lo, hi, panels);
    }
    return phase * sum / std::sqrt(std::abs(s));
}

cplx trapezoid_fourier(const CutoffSpec& T, double w, int sign) {
    if (!(T.kind == CutoffKind::Trapezoid || T.kind == CutoffKind::Triangle || T.kind == CutoffKind::TriangleMinus))
        throw Error(ErrorKind::UnsupportedCutoff, "trapezoid_fourier needs a trapezoid");
    const double a = T.a, b = T.b, ep = T.eps, de = T.del;
    double x = sign >= 0 ? w : -w;
    if (x == 0.0) return (2 * b - 2 * a + ep + de) / 2;
    if (std::abs(x) < 1e-2) {
        // series cancellation regime: integrate the pieces directly
        cplx s = 0.0;
        for (const QuadPiece& p : pieces_of(T))
            s += gauss_legendre([&](double v) { return p(v) * e(-x * v); }, p.lo, p.hi);
        return s;
    }
    cplx t1 = 1.0 - e(x * de / 2), t2 = 1.0 - e(x * ep / 2);
    cplx num = ep * ep * e(-x * (b + de)) * t1 * t1 - de * de * e(-a * x) * t2 * t2;
    return cplx(0, -1) * num / (2 * pi * pi * pi * x * x * x * ep * ep * de * de);
}

KappaEstimate kappa_eta_bound(const CutoffSpec& f, double eta) {
    if (eta < 0) throw Error(ErrorKind::Domain, "eta must be nonnegative");
    if (f.kind == CutoffKind::IndicatorUnit && eta > 1)
        throw Error(ErrorKind::UnsupportedCutoff, "indicator is not in S_eta for eta > 1");
    static std::mutex mu;
    static std::map<std::tuple<int, double, double, double, double, double, std::vector<double>>, double> cache;
    auto key = std::make_tuple(int(f.kind), f.a, f.b, f.eps, f.del, eta, f.coeffs);
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return {eta, it->second, "phi: 256 nodes on [0,pi); w: 0 and +-401 log-spaced in [1e-3,50]"};
    }
    KPhi K(f);
    std::vector<double> ws{0.0};
    for (int i = 0; i <= 400; ++i) {
        double v = std::pow(10.0, -3.0 + i * (std::log10(50.0) + 3.0) / 400);
        ws.push_back(v);
        ws.push_back(-v);
    }
    double best = 0;
    for (int j = 0; j < 256; ++j) {
        KPhiSlice sl = K.at(j * pi / 256);
        for (double w : ws) best = std::max(best, std::abs(sl(w)) * std::pow(1 + std::abs(w), eta));
    }
    std::lock_guard<std::mutex> lock(mu);
    cache[key] = best;
    return {eta, best, "phi: 256 nodes on [0,pi); w: 0 and +-401 log-spaced in [1e-3,50]"};
}

}  // namespace thetasum
