#pragma once

#include <array>
#include <random>

#include "thetasum/core.hpp"

namespace thetasum {

struct UpperHalfPoint {
    double x = 0.0;
    double y = 1.0;
    cplx as_complex() const { return {x, y}; }
};

// (z, phi; xi1, xi2, zeta). phi lives on the universal cover and is never reduced.
struct GroupElement {
    UpperHalfPoint z;
    double phi = 0.0;
    double xi1 = 0.0;
    double xi2 = 0.0;
    double zeta = 0.0;
};

struct Sl2Matrix {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
    double det() const { return a * d - b * c; }
    Sl2Matrix operator*(const Sl2Matrix& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    cplx act(cplx z) const { return (a * z + b) / (c * z + d); }
};

GroupElement identity_element();

// n_x a_y k_phi
Sl2Matrix matrix_of(const GroupElement& g);

GroupElement jacobi_multiply(const GroupElement& g, const GroupElement& h);
GroupElement jacobi_inverse(const GroupElement& g);

// Named one-parameter families and horospherical coordinates.
GroupElement flow_element(double s);                // Phi^s = (i e^{-s}, 0; 0, 0)
GroupElement n_plus(double x, double alpha);        // (x+i, 0; (alpha,0), 0)
GroupElement n_minus(double u, double beta);        // ((u+i)/(1+u^2), atan u; (0,beta), 0)
GroupElement heisenberg(double xi1, double xi2, double zeta);  // (i, 0; xi, zeta)

// g Phi^s through the closed-form coordinates.
GroupElement geodesic_flow(const GroupElement& g, double s);

struct IwasawaResult {
    UpperHalfPoint z;
    double phi0 = 0.0;
};
IwasawaResult iwasawa(const Sl2Matrix& m);

struct ReducedPoint {
    UpperHalfPoint z;
    Sl2Matrix m;  // integer entries, m z = z*
    int steps = 0;
};
ReducedPoint reduce_to_fundamental(const UpperHalfPoint& z);
double cusp_height(const UpperHalfPoint& z);

// Left translate g by an element of Gamma so that z lies in the SL(2,Z)
// fundamental domain, phi in [0, pi), xi and zeta in [-1/2, 1/2).
GroupElement reduce_to_gamma_domain(const GroupElement& g);

GroupElement gamma_generator(int i);

struct HaarDraw {
    GroupElement g;
    int proposals = 0;
};
HaarDraw haar_sample(std::mt19937_64& rng);

struct AfeCoordinates {
    double x, alpha, u, beta, N;
    cplx phase;
};
AfeCoordinates afe_coordinates(double x, double alpha, double u, double beta, double N);

// Uniform double in [0,1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace thetasum
