#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tilecps {

enum class ErrorCode {
    NonMonic,
    NotSquarefree,
    ContextMismatch,
    NotUnimodular,
    NoConvergence,
    Inconclusive,
    SchemaError,
    NotPrimitive,
    NoExactEigenvector,
    GapOrOverlap,
    SizeLimit,
    NoSeed,
    RankDeficient,
    EmptyInternalSpace,
    DegenerateLattice,
    PatchTooSmall,
    NotFound,
    NotContractive,
    BudgetExceeded,
    InsufficientPoints,
    Unsupported,
    IoError,
};

inline std::string_view to_string(ErrorCode c)
{
    switch (c) {
    case ErrorCode::NonMonic: return "NonMonic";
    case ErrorCode::NotSquarefree: return "NotSquarefree";
    case ErrorCode::ContextMismatch: return "ContextMismatch";
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NotPrimitive: return "NotPrimitive";
    case ErrorCode::NoExactEigenvector: return "NoExactEigenvector";
    case ErrorCode::GapOrOverlap: return "GapOrOverlap";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::NoSeed: return "NoSeed";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::EmptyInternalSpace: return "EmptyInternalSpace";
    case ErrorCode::DegenerateLattice: return "DegenerateLattice";
    case ErrorCode::PatchTooSmall: return "PatchTooSmall";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::NotContractive: return "NotContractive";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace tilecps
