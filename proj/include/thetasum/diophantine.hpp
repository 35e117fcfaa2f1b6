#pragma once

#include <cstdint>
#include <vector>

#include "thetasum/group.hpp"

namespace thetasum {

struct Convergent {
    std::int64_t p, q;
};

struct ContinuedFraction {
    std::int64_t a0 = 0;
    std::vector<std::int64_t> partial_quotients;
    std::vector<Convergent> convergents;  // p_k/q_k for k = 0.. (first is a0/1)
};

// Stops early when x is reached exactly; throws PrecisionExhausted past q = 2^52.
ContinuedFraction continued_fraction(double x, int max_terms);

struct DiophantineEstimate {
    double kappa = 1;
    double A_lower = 0;       // min over 1 <= q <= Q_max of q^kappa dist(qx, Z)
    std::int64_t q_at_min = 1;
    double A_asymptotic = 0;  // the same minimum restricted to sqrt(Q_max) <= q <= Q_max
    std::int64_t Q_max = 0;
};

DiophantineEstimate diophantine_type(double x, double kappa, std::int64_t Q_max);

inline constexpr double kDefaultKappa = 1.01;

UpperHalfPoint z_su(double x, double u, double s);

double excursion_W(double t);
double excursion_bound(double x, double u, double A, double kappa, double s);

}  // namespace thetasum
