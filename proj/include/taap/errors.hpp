#pragma once

#include <stdexcept>
#include <string>

namespace taap {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct ZeroField : Error { using Error::Error; };
struct NoMinimum : Error { using Error::Error; };
struct AdiabaticityViolation : Error { using Error::Error; };
struct StepTooLarge : Error { using Error::Error; };
struct CentrifugalLimit : Error { using Error::Error; };
struct FitDiverged : Error { using Error::Error; };
struct LowAcceptance : Error { using Error::Error; };
struct RingNotFound : Error { using Error::Error; };
struct FlowBlocked : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };

}  // namespace taap
