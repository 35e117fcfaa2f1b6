#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace thetasum {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Tolerances shared across modules. One record so callers can tighten or relax.
struct Tolerances {
    double det_one = 1e-12;
    double group_eq = 1e-10;
    double flow_eq = 1e-12;
    double fundamental = 1e-12;
    double kphi_accuracy = 1e-8;
    double fresnel_abs = 1e-10;
    double fresnel_c2_taylor = 1e-6;
    double divergence = 1e6;
    int reduce_max_steps = 10000;
};

const Tolerances& tolerances();

enum class ErrorKind {
    Domain,
    Range,
    DegenerateMatrix,
    NonConvergence,
    OutOfRange,
    UnsupportedCutoff,
    AccuracyNotMet,
    DivergenceSuspected,
    MaxIterExceeded,
    PrecisionExhausted,
    CapacityExceeded,
    InsufficientTailSamples,
    Io,
    RationalPairWarning,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Fractional part in [-1/2, 1/2).
inline double centered_frac(double t) { return t - std::floor(t + 0.5); }

// frac(a*b) with the rounding error of the product recovered by fma, so that
// large integer-valued a does not destroy the phase.
inline double product_error(double a, double b, double p) {
#ifdef __FMA__
    return std::fma(a, b, -p);
#else
    // Dekker; std::fma is a slow library call without hardware support
    constexpr double split = 134217729.0;
    double ca = split * a, ah = ca - (ca - a), al = a - ah;
    double cb = split * b, bh = cb - (cb - b), bl = b - bh;
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl;
#endif
}

inline double frac_product(double a, double b) {
    double p = a * b;
    double err = product_error(a, b, p);
    double fp = p - std::floor(p);
    return centered_frac(fp + err);
}

// e(t) = exp(2 pi i t)
inline cplx e(double t) {
    double r = centered_frac(t);
    return {std::cos(two_pi * r), std::sin(two_pi * r)};
}

inline cplx e(cplx t) { return std::exp(cplx(0.0, two_pi) * t); }

// Neumaier summation for complex values.
class CompensatedSum {
public:
    void add(cplx v) {
        re_.add(v.real());
        im_.add(v.imag());
    }
    cplx value() const { return {re_.value(), im_.value()}; }

private:
    struct Part {
        double s = 0.0, c = 0.0;
        void add(double v) {
            double t = s + v;
            if (std::abs(s) >= std::abs(v))
                c += (s - t) + v;
            else
                c += (v - t) + s;
            s = t;
        }
        double value() const { return s + c; }
    };
    Part re_, im_;
};

}  // namespace thetasum
