#include "thetasum/group.hpp"

#include <cmath>

namespace thetasum {

namespace {

// cos and sin that are exact at multiples of pi/2.
void cos_sin(double phi, double& c, double& s) {
    double q = phi / (pi / 2);
    if (q == std::nearbyint(q) && std::abs(q) < 1e15) {
        long long k = static_cast<long long>(q) % 4;
        if (k < 0) k += 4;
        static const double cs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        c = cs[k][0];
        s = cs[k][1];
        return;
    }
    c = std::cos(phi);
    s = std::sin(phi);
}

// Angle cocycle of k_phi at w, lifted so that the value at w = i is phi.
double beta_kphi(double phi, cplx w) {
    double c, s;
    cos_sin(phi, c, s);
    if (s == 0.0) return phi;
    double principal = std::atan2(s, c);
    double k = std::nearbyint((phi - principal) / two_pi);
    return std::arg(w * s + c) + two_pi * k;
}

void check_height(double y) {
    if (!std::isfinite(y) || y <= 0.0) throw Error(ErrorKind::Range, "height left the representable range");
}

}  // namespace

GroupElement identity_element() { return GroupElement{}; }

Sl2Matrix matrix_of(const GroupElement& g) {
    double c, s;
    cos_sin(g.phi, c, s);
    double ry = std::sqrt(g.z.y);
    return {ry * c + g.z.x * s / ry, -ry * s + g.z.x * c / ry, s / ry, c / ry};
}

GroupElement jacobi_multiply(const GroupElement& g, const GroupElement& h) {
    Sl2Matrix m = matrix_of(g);
    cplx w = h.z.as_complex();
    cplx z = m.act(w);
    check_height(z.imag());
    GroupElement r;
    r.z = {z.real(), z.imag()};
    r.phi = h.phi + beta_kphi(g.phi, w);
    double mx1 = m.a * h.xi1 + m.b * h.xi2;
    double mx2 = m.c * h.xi1 + m.d * h.xi2;
    r.xi1 = g.xi1 + mx1;
    r.xi2 = g.xi2 + mx2;
    r.zeta = g.zeta + h.zeta + 0.5 * (g.xi1 * mx2 - g.xi2 * mx1);
    return r;
}

GroupElement jacobi_inverse(const GroupElement& g) {
    Sl2Matrix m = matrix_of(g);
    Sl2Matrix inv{m.d, -m.b, -m.c, m.a};
    cplx w = inv.act(cplx(0, 1));
    GroupElement r;
    r.z = {w.real(), w.imag()};
    r.phi = -beta_kphi(g.phi, w);
    r.xi1 = -(inv.a * g.xi1 + inv.b * g.xi2);
    r.xi2 = -(inv.c * g.xi1 + inv.d * g.xi2);
    r.zeta = -g.zeta;
    return r;
}

GroupElement flow_element(double s) {
    GroupElement g;
    g.z = {0.0, std::exp(-s)};
    check_height(g.z.y);
    return g;
}

GroupElement n_plus(double x, double alpha) {
    GroupElement g;
    g.z = {x, 1.0};
    g.xi1 = alpha;
    return g;
}

GroupElement n_minus(double u, double beta) {
    GroupElement g;
    double q = 1.0 + u * u;
    g.z = {u / q, 1.0 / q};
    g.phi = std::atan(u);
    g.xi2 = beta;
    return g;
}

GroupElement heisenberg(double xi1, double xi2, double zeta) {
    GroupElement g;
    g.xi1 = xi1;
    g.xi2 = xi2;
    g.zeta = zeta;
    return g;
}

GroupElement geodesic_flow(const GroupElement& g, double s) {
    GroupElement r = g;
    double c, sn;
    cos_sin(g.phi, c, sn);
    if (sn == 0.0) {
        r.z.y = g.z.y * std::exp(-s);
        check_height(r.z.y);
        return r;
    }
    if (c == 0.0) {
        r.z.y = g.z.y * std::exp(s);
        check_height(r.z.y);
        return r;
    }
    // cosh s + cos(2phi) sinh s, written as e^s cos^2 + e^{-s} sin^2
    double ep = std::exp(s), em = std::exp(-s);
    double den = ep * c * c + em * sn * sn;
    r.z.y = g.z.y / den;
    check_height(r.z.y);
    r.z.x = g.z.x - g.z.y * (2.0 * sn * c) * std::sinh(s) / den;
    double principal = std::atan2(sn, c);
    double k = std::nearbyint((g.phi - principal) / two_pi);
    r.phi = std::atan2(em * sn, c) + two_pi * k;
    return r;
}

IwasawaResult iwasawa(const Sl2Matrix& m) {
    if (std::abs(m.det() - 1.0) > tolerances().det_one)
        throw Error(ErrorKind::DegenerateMatrix, "determinant differs from one");
    cplx z = m.act(cplx(0, 1));
    return {{z.real(), z.imag()}, std::atan2(m.c, m.d)};
}

ReducedPoint reduce_to_fundamental(const UpperHalfPoint& z0) {
    if (!(z0.y > 0.0)) throw Error(ErrorKind::Domain, "point not in the upper half plane");
    ReducedPoint r{z0, Sl2Matrix{}, 0};
    double x = z0.x, y = z0.y;
    Sl2Matrix& m = r.m;
    const double tol = tolerances().fundamental;
    for (;;) {
        if (r.steps >= tolerances().reduce_max_steps)
            throw Error(ErrorKind::NonConvergence, "Gauss reduction did not terminate");
        double n = std::nearbyint(x);
        if (n != 0.0) {
            x -= n;
            m = Sl2Matrix{1, -n, 0, 1} * m;
        }
        double q = x * x + y * y;
        if (q >= 1.0 - tol) break;
        x = -x / q;
        y = y / q;
        m = Sl2Matrix{0, -1, 1, 0} * m;
        ++r.steps;
        if (!(y > 0.0) || !std::isfinite(y)) throw Error(ErrorKind::NonConvergence, "height underflow");
    }
    r.z = {x, y};
    return r;
}

double cusp_height(const UpperHalfPoint& z) { return reduce_to_fundamental(z).z.y; }

GroupElement reduce_to_gamma_domain(const GroupElement& g0) {
    GroupElement g = g0;
    const GroupElement g1 = gamma_generator(1);
    for (int step = 0;; ++step) {
        if (step > tolerances().reduce_max_steps)
            throw Error(ErrorKind::NonConvergence, "Gamma reduction did not terminate");
        double n = std::nearbyint(g.z.x);
        if (n != 0.0) {
            GroupElement t;
            t.z = {-n, 1.0};
            t.xi1 = -n / 2.0;
            g = jacobi_multiply(t, g);
            g.z.x -= std::nearbyint(g.z.x);  // exact cleanup of rounding in the translate
        }
        if (g.z.x * g.z.x + g.z.y * g.z.y >= 1.0 - tolerances().fundamental) break;
        g = jacobi_multiply(g1, g);
    }
    double k = std::floor(g.phi / pi);
    if (k != 0.0) {
        GroupElement r;
        r.phi = -k * pi;
        r.zeta = -k / 4.0;
        g = jacobi_multiply(r, g);
    }
    double m1 = -std::nearbyint(g.xi1), m2 = -std::nearbyint(g.xi2);
    if (m1 != 0.0 || m2 != 0.0) g = jacobi_multiply(heisenberg(m1, m2, 0.5 * m1 * m2), g);
    g.zeta -= std::nearbyint(g.zeta);
    return g;
}

GroupElement gamma_generator(int i) {
    GroupElement g;
    switch (i) {
    case 1: g.phi = pi / 2; g.zeta = 0.125; break;
    case 2: g.z = {1.0, 1.0}; g.xi1 = 0.5; break;
    case 3: g.xi1 = 1.0; break;
    case 4: g.xi2 = 1.0; break;
    case 5: g.zeta = 1.0; break;
    default: throw Error(ErrorKind::OutOfRange, "generator index must be 1..5");
    }
    return g;
}

HaarDraw haar_sample(std::mt19937_64& rng) {
    HaarDraw d;
    const double y0 = std::sqrt(3.0) / 2.0;
    for (;;) {
        ++d.proposals;
        double x = uniform01(rng) - 0.5;
        double y = y0 / (1.0 - uniform01(rng));
        if (x * x + y * y >= 1.0) {
            d.g.z = {x, y};
            break;
        }
    }
    d.g.phi = pi * uniform01(rng);
    d.g.xi1 = uniform01(rng) - 0.5;
    d.g.xi2 = uniform01(rng) - 0.5;
    d.g.zeta = uniform01(rng) - 0.5;
    return d;
}

AfeCoordinates afe_coordinates(double x, double alpha, double u, double beta, double N) {
    if (!(x > 0.0)) throw Error(ErrorKind::Domain, "x must be positive");
    if (!(N > 0.0)) throw Error(ErrorKind::Domain, "N must be positive");
    AfeCoordinates r;
    r.x = -1.0 / x;
    r.alpha = alpha / x;
    r.u = x * (1.0 + u * x);
    r.beta = alpha + beta * x;
    r.N = N * x;
    r.phase = e(0.125 - alpha * alpha / (2.0 * x));
    return r;
}

}  // namespace thetasum
