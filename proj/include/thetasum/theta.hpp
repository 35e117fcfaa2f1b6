#pragma once

#include <cstdint>
#include <vector>

#include "thetasum/diophantine.hpp"
#include "thetasum/group.hpp"
#include "thetasum/shale_weil.hpp"

namespace thetasum {

struct ThetaLevel {
    int j = 0;
    cplx delta, delta_minus;  // weighted terms 2^{-j/2} Theta(...)
    double height = 0, height_minus = 0;
};

struct ThetaResult {
    cplx value;
    std::int64_t terms_used = 0;
    double certified_tail = 0;
    bool diophantine_warning = false;
    bool reduced = false;  // theta_f moved g into the Gamma domain first
    std::vector<ThetaLevel> levels;
};

struct ThetaOptions {
    // Above this many terms theta_f evaluates at the Gamma-reduced point
    // instead (or throws AccuracyNotMet when reduce_if_expensive is off).
    std::int64_t max_terms = 2000000;
    bool reduce_if_expensive = true;
};

ThetaResult theta_f(const GroupElement& g, const KPhi& f, double tol, const ThetaOptions& opt = {});
ThetaResult theta_f(const GroupElement& g, const CutoffSpec& f, double tol, const ThetaOptions& opt = {});

// Plain series for Jacobi's theta function.
cplx jacobi_theta_series(cplx z, cplx alpha);
// x reduced mod 2 and one application of the functional equation when y < 1/2
// and it increases the imaginary part.
cplx jacobi_theta(cplx z, cplx alpha);
cplx jacobi_theta(const UpperHalfPoint& z, cplx alpha);

struct ThetaChiOptions {
    // The backward flow expands coordinate errors by 4 per level, so past
    // about 22 levels a double-precision chain no longer tracks the orbit.
    int J_max = 22;
    double kappa = kDefaultKappa;
    // only convergents with denominators up to this count towards A
    double q_cert = 1e6;
    // at phi = 0 mod pi the series is a finite sum at g itself; turning this
    // off forces the reduced geodesic series (used to cross-check both paths)
    bool exact_path = true;
};

// Endpoint Diophantine data used for the level-height bound.
struct EndpointCertificate {
    bool finite_endpoint = false;
    double endpoint = 0;
    double A = 0;
    double kappa = 1;
    double q_max = 0;
};
EndpointCertificate endpoint_certificate(const GroupElement& g, double kappa, double q_cert);

// Bound for sup over Gamma of the height along g Phi^{-2 j ln 2}.
double level_height_bound(const GroupElement& g, const EndpointCertificate& c, int j);

// kappa_0 and kappa_2 of the dyadic pieces (same for both by reflection),
// tabulated once with kappa_eta_bound on its default grid.
inline constexpr double kDeltaKappa0 = 1.0385031297703742;
inline constexpr double kDeltaKappa2 = 1.9583745171312257;

// Bound for |Theta_f(h)| at a point of height y, from the kappa_0, kappa_2 norms.
double theta_level_bound(double kappa0, double kappa2, double y);

ThetaResult theta_chi(const GroupElement& g, double tol, const ThetaChiOptions& opt = {});

double check_gamma_invariance(const GroupElement& g, const CutoffSpec& f, int i, double tol);

// |S_N(x,alpha;f) - e^{s/4} Theta_f(n+(x,alpha) n-(u,beta) Phi^s)| with N = e^{s/2}
double thm1_residual(double x, double alpha, double u, double beta, double s, const CutoffSpec& f);

}  // namespace thetasum
