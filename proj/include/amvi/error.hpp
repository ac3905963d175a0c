/**
 * @file error.hpp
 * @brief Error codes and the exception type thrown by every amvi routine
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace amvi {

enum class ErrorCode {
    InvalidParameter,
    NonpositiveStep,
    StabilityViolation,
    ThetaOutOfRange,
    IndexOutOfWindow,
    WindowMismatch,
    DegenerateQuadratic,
    NoBoundary,
    PrematureTruncation,
    NoContraction,
    MaxIterExceeded,
    EmptyContactSet,
    StructureViolation,
    NonIntegerSteps,
    ScheduleNotIncreasing,
    TooFewLevels,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::NonpositiveStep: return "NonpositiveStep";
        case ErrorCode::StabilityViolation: return "StabilityViolation";
        case ErrorCode::ThetaOutOfRange: return "ThetaOutOfRange";
        case ErrorCode::IndexOutOfWindow: return "IndexOutOfWindow";
        case ErrorCode::WindowMismatch: return "WindowMismatch";
        case ErrorCode::DegenerateQuadratic: return "DegenerateQuadratic";
        case ErrorCode::NoBoundary: return "NoBoundary";
        case ErrorCode::PrematureTruncation: return "PrematureTruncation";
        case ErrorCode::NoContraction: return "NoContraction";
        case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
        case ErrorCode::EmptyContactSet: return "EmptyContactSet";
        case ErrorCode::StructureViolation: return "StructureViolation";
        case ErrorCode::NonIntegerSteps: return "NonIntegerSteps";
        case ErrorCode::ScheduleNotIncreasing: return "ScheduleNotIncreasing";
        case ErrorCode::TooFewLevels: return "TooFewLevels";
    }
    return "Unknown";
}

/**
 * Exception carrying a machine-readable ErrorCode.
 *
 * what() is "<Code>: <detail>" so CLI messages stay greppable.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail)
        , code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace amvi
