#include "thetasum/core.hpp"

namespace thetasum {

const Tolerances& tolerances() {
    static const Tolerances t{};
    return t;
}

const char* error_kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Range: return "RangeError";
    case ErrorKind::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::UnsupportedCutoff: return "UnsupportedCutoff";
    case ErrorKind::AccuracyNotMet: return "AccuracyNotMet";
    case ErrorKind::DivergenceSuspected: return "DivergenceSuspected";
    case ErrorKind::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorKind::PrecisionExhausted: return "PrecisionExhausted";
    case ErrorKind::CapacityExceeded: return "CapacityExceeded";
    case ErrorKind::InsufficientTailSamples: return "InsufficientTailSamples";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::RationalPairWarning: return "RationalPairWarning";
    }
    return "Error";
}

}  // namespace thetasum
