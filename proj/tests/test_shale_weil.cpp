#include <cmath>
#include <random>

#include "doctest.h"
#include "thetasum/shale_weil.hpp"
#include "thetasum/special.hpp"

using namespace thetasum;

TEST_CASE("Faddeeva function against high-precision values") {
    struct Ref {
        cplx z, w;
    };
    // reference values from 30-digit arithmetic
    const Ref refs[] = {
        {{0.5, 0.5}, {0.533156707912174914, 0.230488231384458409}},
        {{2, 0.01}, {0.0206200654455691273, 0.339281370580211262}},
        {{-3, 1}, {0.0653177772890469668, -0.173918315416348967}},
        {{10, 10}, {0.0282794674542324567, 0.0281384332763368956}},
        {{0.1, 7}, {0.0797845451462822515, 0.00111762739195870013}},
        {{1e-3, 1e-3}, {0.998871622335411247, 0.00112638067159986645}},
        {{5, -0.5}, {-0.0119003255124771519, 0.113972718597686737}},
        {{30, 0.1}, {0.0000627918019982521962, 0.0188165752124492485}},
    };
    for (const Ref& r : refs) CHECK(std::abs(faddeeva(r.z) - r.w) < 1e-13 * std::abs(r.w));
}

TEST_CASE("Faddeeva function against its Taylor series") {
    // w(z) = sum (iz)^n / Gamma(n/2 + 1)
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.5, 1.5), v(0, 1.5);
    for (int i = 0; i < 200; ++i) {
        cplx z(u(rng), v(rng));
        cplx s = 0, p = 1;
        for (int n = 0; n < 120; ++n) {
            s += p / std::tgamma(n / 2.0 + 1);
            p *= cplx(0, 1) * z;
        }
        CHECK(std::abs(faddeeva(z) - s) < 1e-12 * std::abs(s));
    }
}

TEST_CASE("Hermite functions") {
    CHECK(hermite_psi(0, 0.0) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-15));
    const GaussHermiteRule& rule = gauss_hermite(200);
    for (int k : {0, 5, 50}) {
        double s = 0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            double t = rule.nodes[i] / std::sqrt(two_pi);
            double p = hermite_psi(k, t);
            s += rule.scaled_weights[i] * p * p / std::sqrt(two_pi);
        }
        CHECK(std::abs(s - 1) < 1e-8);
    }
    // one uniform bound for k <= 500
    double sup = 0;
    std::vector<double> psi;
    for (double t = -15; t <= 15; t += 0.003) {
        hermite_psi_all(501, t, psi);
        for (double p : psi) sup = std::max(sup, std::abs(p));
    }
    CHECK(sup < 1.3);
    // deep underflow region returns zero rather than NaN
    CHECK(hermite_psi(3, 40.0) == 0.0);
    CHECK(std::isfinite(hermite_psi(2000, 25.0)));
}

TEST_CASE("Hermite coefficients") {
    auto c = hermite_coeffs(CutoffSpec::gaussian(), 12);
    CHECK(c[0] == doctest::Approx(std::pow(2.0, -0.25)).epsilon(1e-13));
    for (int k = 1; k < 12; ++k) CHECK(std::abs(c[k]) < 1e-13);
    auto h = hermite_coeffs(CutoffSpec::hermite_series({0, 1}), 4);
    CHECK(h == std::vector<double>{0, 1, 0, 0});
    CHECK_THROWS_AS(hermite_coeffs(CutoffSpec::triangle(), 4), Error);
}

TEST_CASE("Gaussian-times-polynomial has fast decaying coefficients") {
    // f(t) = (1 + t^2) exp(-2 pi t^2), expanded against psi_k by Gauss-Hermite quadrature
    const GaussHermiteRule& rule = gauss_hermite(240);
    const int K = 40;
    std::vector<double> c(K, 0.0), psi;
    const double sc = 1 / std::sqrt(two_pi);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double t = rule.nodes[i] * sc;
        hermite_psi_all(K, t, psi);
        double ft = (1 + t * t) * std::exp(-2 * pi * t * t) * rule.scaled_weights[i] * sc;
        for (int k = 0; k < K; ++k) c[k] += ft * psi[k];
    }
    for (int k = 10; k < K; k += 2) CHECK(std::abs(c[k]) * std::pow(k, 4) < std::abs(c[4]) * std::pow(4, 4));
    CHECK(std::abs(c[30]) < 1e-7);
}

TEST_CASE("sigma_phi") {
    CHECK(sigma_phi(0.0) == 0);
    CHECK(sigma_phi(0.1) == 1);
    CHECK(sigma_phi(pi) == 2);
    CHECK(sigma_phi(-0.1) == -1);
    CHECK(sigma_phi(3.5) == 3);
}

TEST_CASE("Fresnel phase integral") {
    CHECK(std::abs(fresnel_phase_integral({}, 0, 0, 0, 1) - 1.0) < 1e-15);
    CHECK(std::abs(fresnel_phase_integral({}, 0, 1, 0, 1)) < 1e-15);
    cplx fres(0.244126703037670377, 0.171707839181849121);
    CHECK(std::abs(fresnel_phase_integral({}, 1, 0, 0, 1) - fres) < 1e-12);
    QuadPoly p{1, 2, -3};
    CHECK(std::abs(fresnel_phase_integral(p, 0.37, -1.3, -0.4, 2.1) - cplx(-2.8283590165578513, 2.60417384854621743)) < 1e-10);
    CHECK(std::abs(fresnel_phase_integral(p, -5.2, 17.1, -0.4, 2.1) - cplx(-1.10410268509958893, 0.23053910024483994)) < 1e-10);
    QuadPoly q{0.5, -1, 1};
    CHECK(std::abs(fresnel_phase_integral(q, 3e-4, 40.3, -0.4, 2.1) - cplx(-0.00530090059869894915, 0.0105254022510876754)) < 1e-10);
}

TEST_CASE("Fresnel regimes agree across the switching thresholds") {
    QuadPoly p{0.3, -0.7, 1.1};
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> uc2(-0.05, 0.05), uc1(-30, 30);
    for (int i = 0; i < 300; ++i) {
        double c2 = uc2(rng), c1 = uc1(rng);
        double a = -0.3, b = 1.7;
        cplx ref = gauss_legendre_panels([&](double v) { return (p.q0 + v * (p.q1 + v * p.q2)) * e(c2 * v * v + c1 * v); }, a, b, 200);
        CHECK(std::abs(fresnel_phase_integral(p, c2, c1, a, b) - ref) < 1e-10);
    }
}

TEST_CASE("f_phi special cases") {
    KPhi g(CutoffSpec::gaussian());
    cplx expect = std::polar(1.0, -0.35) * std::exp(-pi * 0.09);
    CHECK(std::abs(g.at(0.7)(0.3) - expect) < 1e-14);
    CHECK(std::abs(apply_kphi_quadrature(CutoffSpec::gaussian(), 0.7, 0.3) - expect) < 1e-10);
    for (double phi : {0.0, 0.5, 1.0}) {
        auto tri = CutoffSpec::triangle();
        CHECK(std::abs(apply_kphi(tri, 0.0, 0.3) - tri(0.3)) < 1e-15);
        (void)phi;
    }
    // indicator at phi = pi/2
    for (double w : {0.3, -1.7, 5.5}) {
        cplx ex = std::polar(1.0, pi / 4) * (e(-w) - 1.0) / (two_pi * w);
        CHECK(std::abs(apply_kphi(CutoffSpec::indicator(), pi / 2, w) - ex) < 1e-12);
    }
    // phi = pi reflects and multiplies by e(-1/4)
    auto tri = CutoffSpec::triangle();
    CHECK(std::abs(apply_kphi(tri, pi, -0.3) - cplx(0, -1) * tri(0.3)) < 1e-15);
}

TEST_CASE("Triangle f_phi against high-precision quadrature") {
    struct Ref {
        double phi, w;
        cplx v;
    };
    const Ref refs[] = {
        {0.9, 0.45, {0.0812751475571248581, -0.267253247694438081}},
        {0.9, 3.0, {0.00809553884790460509, 0.0250282482526917077}},
        {2.5, -1.2, {-0.202426967386822199, -0.0981369164992008758}},
        {0.05, 0.4, {0.897431318478941338, -0.314862639567282213}},
    };
    for (const Ref& r : refs) CHECK(std::abs(apply_kphi(CutoffSpec::triangle(), r.phi, r.w) - r.v) < 1e-11);
}

TEST_CASE("Fresnel path and quadrature path agree") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> uphi(-6.0, 6.0), uw(-6.0, 6.0);
    for (auto f : {CutoffSpec::triangle(), CutoffSpec::triangle_minus(), CutoffSpec::trapezoid(0.2, 0.7, 0.1, 0.3)}) {
        KPhi K(f);
        double worst = 0;
        for (int i = 0; i < 100; ++i) {
            double phi = uphi(rng), w = uw(rng);
            worst = std::max(worst, std::abs(K.at(phi)(w) - apply_kphi_quadrature(f, phi, w)));
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("far field expansion matches the exact form") {
    auto f = CutoffSpec::triangle();
    KPhi K(f);
    for (double phi : {0.2, 1.3, 2.2, 4.0}) {
        KPhiSlice sl = K.at(phi);
        for (double w : {sl.far_start() + 0.01, sl.far_start() + 3, 40.0, -55.0}) {
            if (std::abs(w) < sl.far_start()) continue;
            cplx q = apply_kphi_quadrature(f, phi, w);
            CHECK(std::abs(sl(w) - q) < 1e-11);
            CHECK(std::abs(q) <= sl.envelope(w));
        }
    }
}

TEST_CASE("Hermite path agrees with quadrature") {
    auto f = CutoffSpec::hermite_series({0.3, -0.2, 0.5, 0.1});
    KPhi K(f);
    for (double phi : {0.4, 1.7, 2.9, -1.0})
        for (double w : {-1.3, 0.0, 0.8, 2.5}) CHECK(std::abs(K.at(phi)(w) - apply_kphi_quadrature(f, phi, w)) < 1e-6);
}

TEST_CASE("unitarity of the metaplectic action") {
    for (auto f : {CutoffSpec::gaussian(), CutoffSpec::triangle()}) {
        KPhi K(f);
        double norm = f.l2_norm_squared();
        for (double phi : {0.3, pi / 2, 2.9}) {
            KPhiSlice sl = K.at(phi);
            double s = gauss_legendre_panels([&](double w) { return cplx(std::norm(sl(w)), 0); }, -80, 80, 2000).real();
            // tail beyond |w| = 80 decays like w^-6
            CHECK(std::abs(s - norm) < 1e-6);
        }
    }
}

TEST_CASE("half-integral weight: f_{phi + 2 pi} = -f_phi") {
    for (auto f : {CutoffSpec::gaussian(), CutoffSpec::triangle(), CutoffSpec::hermite_series({0.2, 0.4, 0.1})}) {
        KPhi K(f);
        for (double phi : {0.0, 0.4, 1.9, pi})
            for (double w : {-0.7, 0.2, 1.1}) CHECK(std::abs(K.at(phi + two_pi)(w) + K.at(phi)(w)) < 1e-10);
    }
}

TEST_CASE("trapezoid Fourier transform") {
    auto T = CutoffSpec::trapezoid(0.2, 0.7, 0.1, 0.3);
    CHECK(trapezoid_fourier(T, 0.0, 1).real() == doctest::Approx((2 * 0.7 - 2 * 0.2 + 0.1 + 0.3) / 2));
    auto D = CutoffSpec::triangle();
    CHECK(std::abs(trapezoid_fourier(D, 3.7, 1) - cplx(0.00605426819659412074, -0.0218711514379476429)) < 1e-10);
    for (auto f : {T, D, CutoffSpec::triangle_minus()})
        for (double w : {0.005, 0.3, 3.7, -2.2, 11.0}) {
            cplx q = 0.0;
            for (const QuadPiece& p : pieces_of(f)) q += gauss_legendre([&](double v) { return p(v) * e(-w * v); }, p.lo, p.hi);
            CHECK(std::abs(trapezoid_fourier(f, w, 1) - q) < 1e-10);
            CHECK(std::abs(trapezoid_fourier(f, -w, -1) - q) < 1e-10);
        }
    // f_phi at phi = pi/2 is e(-1/8) times the transform
    CHECK(std::abs(apply_kphi(T, pi / 2, 2.3) - e(-0.125) * trapezoid_fourier(T, 2.3, 1)) < 1e-11);
    // decay like w^-2 (1/eps + 1/del) on |w| >= 1
    double worst = 0;
    for (double w = 1; w < 200; w += 0.37) worst = std::max(worst, std::abs(trapezoid_fourier(T, w, 1)) * w * w / (1 / 0.1 + 1 / 0.3));
    CHECK(worst < 0.1);
}

TEST_CASE("kappa_eta") {
    auto g = kappa_eta_bound(CutoffSpec::gaussian(), 2);
    // sup of exp(-pi w^2)(1+w)^2 at the stationary point pi w (1+w) = 1
    double ws = (-1 + std::sqrt(1 + 4 / pi)) / 2;
    double ref = std::exp(-pi * ws * ws) * (1 + ws) * (1 + ws);
    CHECK(g.value >= ref * (1 - 1e-4));
    CHECK(g.value <= ref * (1 + 1e-3));
    auto t = kappa_eta_bound(CutoffSpec::triangle(), 2);
    CHECK(std::isfinite(t.value));
    CHECK(t.value > 1.0);
    auto tr = kappa_eta_bound(CutoffSpec::trapezoid(0, 0, 1.0 / 6, 1.0 / 6), 2);
    CHECK(tr.value <= 12 * t.value / 2);  // C (1/eps + 1/del) with C from the triangle's 1/eps + 1/del = 9
    CHECK_THROWS_AS(kappa_eta_bound(CutoffSpec::indicator(), 2), Error);
}

TEST_CASE("E_Delta(phi, t) scales like |phi|^{3/4}") {
    KPhi K(CutoffSpec::triangle());
    auto tri = CutoffSpec::triangle();
    auto worst_ratio = [&](double lo, double hi) {
        double r = 0;
        for (double phi = lo; phi <= hi; phi *= 1.3)
            for (double sgn : {1.0, -1.0}) {
                KPhiSlice sl = K.at(sgn * phi);
                for (double t = -2; t <= 2; t += 0.01) r = std::max(r, std::abs(sl(t) - tri(t)) / std::pow(phi, 0.75));
            }
        return r;
    };
    double small = worst_ratio(1e-4, 1e-3), large = worst_ratio(1e-2, 1.0 / 6);
    CHECK(std::isfinite(small));
    CHECK(small <= 2 * large);
}
