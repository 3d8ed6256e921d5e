#pragma once

#include <stdexcept>
#include <string>

namespace perciso {

enum class ErrorCode {
    InvalidArgument,
    EmptyCluster,
    BoundaryClipped,
    Unsuitable,
    UnboundedCrystal,
    DegenerateNorm,
    BudgetExceeded,
    InfeasibleCap,
    CarveFailed,
    ScaleMismatch,
    OutOfRange,
    HypothesisViolated,
    OceanAmbiguous,
    ConfigError,
    IoError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline const char* error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::BoundaryClipped: return "BoundaryClipped";
    case ErrorCode::Unsuitable: return "Unsuitable";
    case ErrorCode::UnboundedCrystal: return "UnboundedCrystal";
    case ErrorCode::DegenerateNorm: return "DegenerateNorm";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InfeasibleCap: return "InfeasibleCap";
    case ErrorCode::CarveFailed: return "CarveFailed";
    case ErrorCode::ScaleMismatch: return "ScaleMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::OceanAmbiguous: return "OceanAmbiguous";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Error";
}

}  // namespace perciso
