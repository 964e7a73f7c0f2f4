#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stoplab {

/// Stable error codes. The string form is part of the CLI contract.
enum class ErrorCode {
    InvalidArgument,
    ValidationSigma,
    ValidationRate,
    ValidationInfiniteValue,
    ValidationTabulation,
    Nondifferentiable,
    OutOfDomain,
    CapTooSmall,
    InsufficientHits,
    RootNotBracketed,
    ThresholdNotBracketed,
    GridTooNarrow,
    NoConvergence,
    PayoffVanishes,
    DegenerateA,
    SingularDesign,
    StructuralViolation,
    NonFiniteReport,
    Io,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::ValidationSigma: return "VALIDATION_SIGMA";
    case ErrorCode::ValidationRate: return "VALIDATION_RATE";
    case ErrorCode::ValidationInfiniteValue: return "VALIDATION_INFINITE_VALUE";
    case ErrorCode::ValidationTabulation: return "VALIDATION_TABULATION";
    case ErrorCode::Nondifferentiable: return "NONDIFFERENTIABLE";
    case ErrorCode::OutOfDomain: return "OUT_OF_DOMAIN";
    case ErrorCode::CapTooSmall: return "CAP_TOO_SMALL";
    case ErrorCode::InsufficientHits: return "INSUFFICIENT_HITS";
    case ErrorCode::RootNotBracketed: return "ROOT_NOT_BRACKETED";
    case ErrorCode::ThresholdNotBracketed: return "THRESHOLD_NOT_BRACKETED";
    case ErrorCode::GridTooNarrow: return "GRID_TOO_NARROW";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::PayoffVanishes: return "PAYOFF_VANISHES";
    case ErrorCode::DegenerateA: return "DEGENERATE_A";
    case ErrorCode::SingularDesign: return "SINGULAR_DESIGN";
    case ErrorCode::StructuralViolation: return "STRUCTURAL_VIOLATION";
    case ErrorCode::NonFiniteReport: return "NON_FINITE_REPORT";
    case ErrorCode::Io: return "IO_ERROR";
    }
    return "UNKNOWN";
}

/// Numerical failures exit with 3, everything else a module raises with 1.
inline bool is_numerical_failure(ErrorCode code) {
    switch (code) {
    case ErrorCode::RootNotBracketed:
    case ErrorCode::ThresholdNotBracketed:
    case ErrorCode::NoConvergence:
    case ErrorCode::SingularDesign:
    case ErrorCode::NonFiniteReport:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorCode::InvalidArgument, message);
}

} // namespace stoplab
