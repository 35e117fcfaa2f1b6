#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "thetasum/core.hpp"

namespace thetasum {

enum class CutoffKind { Gaussian, IndicatorUnit, Triangle, TriangleMinus, Trapezoid, HermiteSeries };

struct CutoffSpec {
    CutoffKind kind = CutoffKind::Gaussian;
    // Trapezoid parameters
    double a = 0, b = 0, eps = 0, del = 0;
    // HermiteSeries coefficients
    std::vector<double> coeffs;

    static CutoffSpec gaussian();
    static CutoffSpec indicator();
    static CutoffSpec triangle();
    static CutoffSpec triangle_minus();
    static CutoffSpec trapezoid(double a, double b, double eps, double del);
    static CutoffSpec hermite_series(std::vector<double> c);

    double operator()(double w) const;
    bool smooth() const { return kind == CutoffKind::Gaussian || kind == CutoffKind::HermiteSeries; }
    bool piecewise_quadratic() const { return !smooth(); }
    std::string name() const;
    double l2_norm_squared() const;
};

// p(v) = q0 + q1 v + q2 v^2 on [lo, hi]
struct QuadPiece {
    double lo, hi;
    double q0, q1, q2;
    double operator()(double v) const { return q0 + v * (q1 + v * q2); }
};

std::vector<QuadPiece> pieces_of(const CutoffSpec& f);

struct QuadPoly {
    double q0 = 1, q1 = 0, q2 = 0;
};

// integral over [a,b] of p(w) e(c2 w^2 + c1 w) dw
cplx fresnel_phase_integral(const QuadPoly& p, double c2, double c1, double a, double b);

// Same with an extra constant phase c0. `stationary` (if given) overrides the
// value c0 - c1^2/(4 c2) of the phase at its critical point, for callers that
// know it without cancellation.
cplx fresnel_phase_integral(const QuadPoly& p, double c2, double c1, double c0, double a, double b,
                            const double* stationary);

// sigma_phi: 2nu at phi = nu pi, 2nu+1 in between
int sigma_phi(double phi);

std::vector<double> hermite_coeffs(const CutoffSpec& f, int K);

// f_phi(w) at one angle; constructed once per phi and evaluated at many w.
class KPhiSlice {
public:
    double phi() const { return phi_; }
    cplx operator()(double w) const;
    // Upper bound for |f_phi(w)| valid for |w| >= far_start(); decreasing in |w|.
    double envelope(double w) const;
    double far_start() const { return far_start_; }
    // The envelope is a function of |w| - envelope_shift().
    double envelope_shift() const { return shift_; }
    // Support of f_phi when it is compactly supported (exact multiples of pi).
    double support_lo() const { return support_lo_; }
    double support_hi() const { return support_hi_; }
    // Decay exponent of the envelope (0 for Gaussian type decay).
    int decay_power() const { return decay_power_; }
    bool exact_multiple() const { return exact_; }

private:
    friend class KPhi;
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    double phi_ = 0, far_start_ = 0, shift_ = 0;
    double support_lo_ = -INFINITY, support_hi_ = INFINITY;
    int decay_power_ = 0;
    bool exact_ = false;
};

class KPhi {
public:
    explicit KPhi(const CutoffSpec& f, double hermite_tol = 1e-14);
    KPhiSlice at(double phi) const;
    const CutoffSpec& cutoff() const { return f_; }

private:
    CutoffSpec f_;
    std::vector<double> hermite_;
    std::vector<QuadPiece> pieces_;
};

cplx apply_kphi(const CutoffSpec& f, double phi, double w);

// Direct panel quadrature of the defining integral; cross-check path.
cplx apply_kphi_quadrature(const CutoffSpec& f, double phi, double w);

// Closed-form Fourier transform of a trapezoid, integral of e(-s w w') T(w') dw'
// with s = sign; the caller supplies e(-sigma/8).
cplx trapezoid_fourier(const CutoffSpec& T, double w, int sign);

struct KappaEstimate {
    double eta = 0;
    double value = 0;
    std::string grid_spec;
};
KappaEstimate kappa_eta_bound(const CutoffSpec& f, double eta);

}  // namespace thetasum
