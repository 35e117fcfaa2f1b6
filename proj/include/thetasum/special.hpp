#pragma once

#include <functional>
#include <vector>

#include "thetasum/core.hpp"

namespace thetasum {

// Faddeeva function w(z) = exp(-z^2) erfc(-iz).
cplx faddeeva(cplx z);

// Fixed 32-point Gauss-Legendre rule on [a,b].
cplx gauss_legendre(const std::function<cplx(double)>& f, double a, double b);
double gauss_legendre_real(const std::function<double(double)>& f, double a, double b);

// Composite rule with `panels` equal panels.
cplx gauss_legendre_panels(const std::function<cplx(double)>& f, double a, double b, int panels);

// Gauss-Hermite rule for the weight exp(-x^2). `scaled_weights` are
// w_i exp(x_i^2), so sum scaled_weights[i] * F(nodes[i]) approximates the
// integral of F over the real line for any F with Gaussian decay.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> scaled_weights;
};
const GaussHermiteRule& gauss_hermite(int n);

// psi_k(t) = (2^{k-1/2} k!)^{-1/2} H_k(sqrt(2 pi) t) exp(-pi t^2)
double hermite_psi(int k, double t);
// psi_0(t) ... psi_{K-1}(t)
void hermite_psi_all(int K, double t, std::vector<double>& out);

}  // namespace thetasum
