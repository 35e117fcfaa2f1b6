#include "thetasum/special.hpp"

#include <array>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <map>
#include <mutex>

namespace thetasum {

namespace {

constexpr int kWeidemanN = 40;

struct Weideman {
    std::array<double, kWeidemanN> a{};
    double L = 0.0;
    Weideman() {
        const int N = kWeidemanN, M = 2 * N;
        L = std::sqrt(N / std::sqrt(2.0));
        std::vector<double> f(2 * M - 1);
        for (int k = -M + 1; k <= M - 1; ++k) {
            double t = L * std::tan(k * pi / (2.0 * M));
            f[k + M - 1] = std::exp(-t * t) * (L * L + t * t);
        }
        for (int n = 1; n <= N; ++n) {
            double s = 0.0;
            for (int k = -M + 1; k <= M - 1; ++k) s += f[k + M - 1] * std::cos(n * k * pi / M);
            a[n - 1] = s / (2.0 * M);
        }
    }
};

const Weideman& weideman() {
    static const Weideman w;
    return w;
}

cplx faddeeva_upper(cplx z) {
    const double inv_sqrt_pi = 1.0 / std::sqrt(pi);
    if (std::abs(z) > 8.0) {
        // Laplace continued fraction
        cplx r = 0.0;
        for (int k = 30; k >= 1; --k) r = (0.5 * k) / (z - r);
        return cplx(0, inv_sqrt_pi) / (z - r);
    }
    const Weideman& W = weideman();
    cplx iz(-z.imag(), z.real());
    cplx Z = (W.L + iz) / (W.L - iz);
    cplx p = 0.0;
    for (int n = kWeidemanN - 1; n >= 0; --n) p = p * Z + W.a[n];
    cplx den = W.L - iz;
    return 2.0 * p / (den * den) + inv_sqrt_pi / den;
}

}  // namespace

cplx faddeeva(cplx z) {
    if (z.imag() >= 0.0) return faddeeva_upper(z);
    return 2.0 * std::exp(-z * z) - faddeeva_upper(-z);
}

namespace {
using GL = boost::math::quadrature::gauss<double, 32>;
}

cplx gauss_legendre(const std::function<cplx(double)>& f, double a, double b) {
    const auto& x = GL::abscissa();
    const auto& w = GL::weights();
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    cplx s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) {
            s += w[i] * f(c);
            continue;
        }
        s += w[i] * (f(c - h * x[i]) + f(c + h * x[i]));
    }
    return s * h;
}

double gauss_legendre_real(const std::function<double(double)>& f, double a, double b) {
    return gauss_legendre([&](double t) { return cplx(f(t), 0.0); }, a, b).real();
}

cplx gauss_legendre_panels(const std::function<cplx(double)>& f, double a, double b, int panels) {
    panels = std::max(1, panels);
    double h = (b - a) / panels;
    cplx s = 0.0;
    for (int i = 0; i < panels; ++i) s += gauss_legendre(f, a + i * h, i + 1 == panels ? b : a + (i + 1) * h);
    return s;
}

namespace {

// Normalized Hermite functions h_0..h_{n-1} at x (orthonormal in L^2(R, dx)).
void hermite_functions(int n, double x, std::vector<double>& h, double& log_scale) {
    h.assign(n, 0.0);
    log_scale = -0.5 * x * x - 0.25 * std::log(pi);
    if (n == 0) return;
    h[0] = 1.0;
    if (n > 1) h[1] = std::sqrt(2.0) * x;
    for (int k = 1; k + 1 < n; ++k) {
        h[k + 1] = std::sqrt(2.0 / (k + 1)) * x * h[k] - std::sqrt(double(k) / (k + 1)) * h[k - 1];
        if (std::abs(h[k + 1]) > 1e150) {
            for (int j = 0; j <= k + 1; ++j) h[j] *= 1e-150;
            log_scale += 150.0 * std::log(10.0);
        }
    }
}

}  // namespace

void hermite_psi_all(int K, double t, std::vector<double>& out) {
    double x = std::sqrt(two_pi) * t;
    double ls;
    hermite_functions(K, x, out, ls);
    double scale = std::exp(ls) * std::pow(two_pi, 0.25);
    for (double& v : out) v *= scale;
}

double hermite_psi(int k, double t) {
    std::vector<double> v;
    hermite_psi_all(k + 1, t, v);
    return v[k];
}

const GaussHermiteRule& gauss_hermite(int n) {
    static std::mutex mu;
    static std::map<int, GaussHermiteRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    if (n < 1 || n > 600) throw Error(ErrorKind::CapacityExceeded, "Gauss-Hermite rule limited to 600 nodes");

    GaussHermiteRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    r.scaled_weights.resize(n);
    // Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), sub(std::max(1, n - 1));
    for (int j = 1; j < n; ++j) sub[j - 1] = std::sqrt(j / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (n == 1)
        r.nodes[0] = 0.0;
    else {
        es.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::EigenvaluesOnly);
        for (int i = 0; i < n; ++i) r.nodes[i] = es.eigenvalues()[i];
    }
    std::vector<double> hv;
    for (int i = 0; i < n; ++i) {
        double ls;
        hermite_functions(n, r.nodes[i], hv, ls);
        double s = 0.0;
        for (double v : hv) s += v * v;
        // Christoffel weights 1/sum p_j^2, with sum h_j^2 = exp(-x^2) sum p_j^2
        double log_sum_h2 = std::log(s) + 2.0 * ls;
        r.scaled_weights[i] = std::exp(-log_sum_h2);
        r.weights[i] = std::exp(-r.nodes[i] * r.nodes[i] - log_sum_h2);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

}  // namespace thetasum
