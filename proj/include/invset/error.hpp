#pragma once

#include <stdexcept>
#include <string>

namespace invset {

enum class ErrorCode {
    Usage,
    InvalidArgument,
    DomainMismatch,
    Validation,
    Parse,
    RankDeficient,
    NotConverged,
    Separation,
    DegenerateSE,
    BootstrapDegenerate,
    Internal,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::DegenerateSE: return "DegenerateSE";
    case ErrorCode::BootstrapDegenerate: return "BootstrapDegenerate";
    case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

/// Process exit status for a failure of the given kind:
/// 2 usage, 3 data/validation, 4 numeric, 5 internal.
inline int exit_code(ErrorCode code) {
    switch (code) {
    case ErrorCode::Usage:
        return 2;
    case ErrorCode::InvalidArgument:
    case ErrorCode::DomainMismatch:
    case ErrorCode::Validation:
    case ErrorCode::Parse:
        return 3;
    case ErrorCode::RankDeficient:
    case ErrorCode::NotConverged:
    case ErrorCode::Separation:
    case ErrorCode::DegenerateSE:
    case ErrorCode::BootstrapDegenerate:
        return 4;
    case ErrorCode::Internal:
        return 5;
    }
    return 5;
}

inline bool is_numeric(ErrorCode code) { return exit_code(code) == 4; }

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace invset
